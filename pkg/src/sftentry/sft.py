"""Transition matrices, admissible words, and Perron eigendata.

Symbols are 0-based integers.  A :class:`TransitionMatrix` is certified
primitive at construction, so downstream code can rely on a finite
aperiodicity exponent and a strictly positive Perron eigenpair.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CapExceeded,
    EmptyRowOrColumn,
    NoConvergence,
    NonBinaryEntry,
    NotPrimitive,
)

_POWER_ITERATION_CAP = 10**6


@dataclass(frozen=True)
class TransitionMatrix:
    """Certified 0/1 incidence matrix of a primitive subshift."""

    size: int
    entries: np.ndarray
    aperiodicity_exponent: int

    def allows(self, i: int, j: int) -> bool:
        return self.entries[i, j] != 0


@dataclass(frozen=True)
class PerronData:
    """Dominant eigendata of a primitive matrix.

    ``right_vector`` sums to one, ``left_vector`` is scaled so that
    ``left @ right == 1``; both are strictly positive.  ``residual`` is the
    max-norm eigen-residual after normalization.
    """

    eigenvalue: float
    right_vector: np.ndarray
    left_vector: np.ndarray
    residual: float


def validate(matrix) -> TransitionMatrix:
    """Certify a raw 0/1 array as a primitive transition matrix.

    The search for the aperiodicity exponent is capped at the Wielandt bound
    (a-1)^2 + 1; a primitive matrix always has a positive power at or below
    that cap.
    """
    A = np.asarray(matrix)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NonBinaryEntry("expected a square 0/1 array")
    a = int(A.shape[0])
    if a < 2:
        raise NonBinaryEntry("alphabet needs at least two symbols")
    if not np.isin(A, (0, 1)).all():
        raise NonBinaryEntry("entries must be 0 or 1")
    entries = A.astype(np.uint8)
    if (entries.sum(axis=1) == 0).any():
        raise EmptyRowOrColumn("some symbol has no outgoing edge")
    if (entries.sum(axis=0) == 0).any():
        raise EmptyRowOrColumn("some symbol has no incoming edge")

    cap = (a - 1) ** 2 + 1
    power = entries.astype(np.int64)
    base = entries.astype(np.int64)
    exponent = None
    for d in range(1, cap + 1):
        if (power > 0).all():
            exponent = d
            break
        power = np.minimum(power @ base, 1)
    if exponent is None:
        raise NotPrimitive(f"no entrywise-positive power up to the Wielandt bound {cap}")
    entries.setflags(write=False)
    return TransitionMatrix(size=a, entries=entries, aperiodicity_exponent=exponent)


def full_shift(a: int) -> TransitionMatrix:
    """Full shift on ``a`` symbols (all transitions allowed)."""
    return validate(np.ones((a, a), dtype=np.uint8))


def golden_mean() -> TransitionMatrix:
    """Two symbols, the word 11 forbidden."""
    return validate([[1, 1], [1, 0]])


def named_system(name: str) -> TransitionMatrix:
    table = {"full2": lambda: full_shift(2), "full3": lambda: full_shift(3), "golden": golden_mean}
    if name not in table:
        raise KeyError(f"unknown builtin system {name!r}")
    return table[name]()


def is_admissible(A: TransitionMatrix, word) -> bool:
    w = tuple(word)
    if not w:
        return False
    if any(s < 0 or s >= A.size for s in w):
        return False
    return all(A.entries[w[k], w[k + 1]] for k in range(len(w) - 1))


def _power_vector(M: np.ndarray, tol: float) -> np.ndarray:
    """L1-normalized power iteration from the uniform positive start."""
    a = M.shape[0]
    x = np.full(a, 1.0 / a)
    for _ in range(_POWER_ITERATION_CAP):
        y = M @ x
        y = y / y.sum()
        if np.max(np.abs(y - x)) < tol:
            return y
        x = y
    raise NoConvergence(f"power iteration did not reach tol={tol:g} within {_POWER_ITERATION_CAP} steps")


def perron_triple(M: np.ndarray, tol: float) -> tuple[float, np.ndarray, np.ndarray, float]:
    """Perron eigenvalue and normalized left/right vectors of a primitive
    nonnegative matrix; works for weighted matrices too.

    Iterates until successive iterates are within ``tol`` in max norm, then
    polishes until the eigen-residual certifies at 1e-12 (scaled by the
    eigenvalue).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = _power_vector(M, tol)
    u = _power_vector(M.T, tol)
    best = None
    for _ in range(256):
        v = v / v.sum()
        u = u / float(u @ v)
        lam = float(u @ (M @ v))
        res = max(
            float(np.max(np.abs(M @ v - lam * v))),
            float(np.max(np.abs(u @ M - lam * u))),
        )
        if best is None or res < best[0]:
            best = (res, lam, v.copy(), u.copy())
        if res <= 1e-13 * max(1.0, lam):
            break
        v = M @ v
        u = u @ M
    res, lam, v, u = best
    if res > 1e-12 * max(1.0, lam):
        raise NoConvergence(f"eigen-residual {res:.3e} did not certify at 1e-12")
    return lam, v, u, res


def perron(A: TransitionMatrix, tol: float = 1e-12) -> PerronData:
    """Perron data of a certified transition matrix."""
    lam, v, u, res = perron_triple(A.entries.astype(float), tol)
    if lam < 1.0 - 1e-9:
        raise NoConvergence(f"transition matrix returned eigenvalue {lam} < 1")
    return PerronData(eigenvalue=lam, right_vector=v, left_vector=u, residual=res)


def entropy(A: TransitionMatrix) -> float:
    """Topological entropy: log of the Perron eigenvalue."""
    return float(np.log(perron(A, tol=1e-14).eigenvalue))


def count_words(A: TransitionMatrix, L: int) -> int:
    """Exact number of admissible words of length ``L`` (Python integers)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    a = A.size
    M = A.entries
    counts = [1] * a
    for _ in range(L - 1):
        counts = [sum(counts[i] for i in range(a) if M[i, j]) for j in range(a)]
    return sum(counts)


def word_matrix(A: TransitionMatrix, L: int) -> np.ndarray:
    """All admissible words of length ``L`` as an (N, L) int8 array, in
    lexicographic order."""
    a = A.size
    W = np.arange(a, dtype=np.int8)[:, None]
    for _ in range(L - 1):
        base = np.repeat(W, a, axis=0)
        tail = np.tile(np.arange(a, dtype=np.int8), W.shape[0])
        keep = A.entries[base[:, -1], tail] == 1
        W = np.hstack([base[keep], tail[keep][:, None]])
    return W


def enumerate_words(A: TransitionMatrix, L: int, cap: int = 1_000_000) -> list[tuple[int, ...]]:
    """Admissible words of length ``L`` in lexicographic order.

    Raises :class:`CapExceeded` when the exact count (computed first, without
    materializing anything) exceeds ``cap``.
    """
    total = count_words(A, L)
    if total > cap:
        raise CapExceeded(f"{total} admissible words of length {L} exceed cap {cap}")
    return [tuple(row) for row in word_matrix(A, L).tolist()]


def _bool_product(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return (X.astype(np.int64) @ Y.astype(np.int64)) > 0


def connection_exists(A: TransitionMatrix, i: int, j: int, steps: int) -> bool:
    """True iff some admissible path of exactly ``steps`` edges joins i to j.

    Computed over booleans, so large powers cannot overflow.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    B = A.entries != 0
    result = None
    sq = B
    k = steps
    while k:
        if k & 1:
            result = sq if result is None else _bool_product(result, sq)
        k >>= 1
        if k:
            sq = _bool_product(sq, sq)
    return bool(result[i, j])


def earliest_connection(
    A: TransitionMatrix, sources, targets, cap: int
) -> tuple[int, int, int] | None:
    """Least s >= 1 admitting an s-edge path from some source to some target.

    Returns ``(s, i, j)`` with the lexicographically first witness pair, or
    None when nothing connects within ``cap`` steps.
    """
    src = sorted(set(sources))
    tgt = sorted(set(targets))
    B = A.entries != 0
    R = B
    for s in range(1, cap + 1):
        sub = R[np.ix_(src, tgt)]
        if sub.any():
            si, ti = map(int, np.argwhere(sub)[0])
            return s, src[si], tgt[ti]
        R = _bool_product(R, B)
    return None


def connection_path(A: TransitionMatrix, i: int, j: int, steps: int) -> tuple[int, ...]:
    """Symbols strictly between i and j along one admissible path of
    ``steps`` edges (greedy lexicographic reconstruction)."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    B = A.entries != 0
    powers = [np.eye(A.size, dtype=bool), B]
    while len(powers) <= steps:
        powers.append(_bool_product(powers[-1], B))
    if not powers[steps][i, j]:
        raise ValueError(f"no path of {steps} edges from {i} to {j}")
    path = []
    cur = i
    for remaining in range(steps, 1, -1):
        cur = next(c for c in range(A.size) if B[cur, c] and powers[remaining - 1][c, j])
        path.append(cur)
    return tuple(path)


def parse_transition_matrix(text: str) -> TransitionMatrix:
    """Parse the plain-text format: first line ``a``, then a rows of a
    space-separated 0/1 digits."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise NonBinaryEntry("empty matrix file")
    a = int(lines[0])
    rows = [[int(tok) for tok in ln.split()] for ln in lines[1 : a + 1]]
    if len(rows) != a or any(len(r) != a for r in rows):
        raise NonBinaryEntry(f"expected {a} rows of {a} entries")
    return validate(rows)


def load_transition_matrix(path) -> TransitionMatrix:
    return parse_transition_matrix(Path(path).read_text())


def format_transition_matrix(A: TransitionMatrix) -> str:
    rows = "\n".join(" ".join(str(int(x)) for x in row) for row in A.entries)
    return f"{A.size}\n{rows}\n"
