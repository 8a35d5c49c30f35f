"""Stationary Markov measures on a subshift: product measures, the
maximal-entropy chain, and two-coordinate Gibbs states.

Every measure here is realized as a stationary one-step Markov chain (a
stationary vector plus a row-stochastic kernel supported exactly on the
transition matrix).  That realization makes cylinder masses, window-set
masses, pressure, and mixing coefficients exactly computable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    BadProbabilityVector,
    CutoffTooLarge,
    MixedLength,
    PotentialOnForbiddenEdge,
)
from .sft import TransitionMatrix, enumerate_words, full_shift, perron, perron_triple, word_matrix

if TYPE_CHECKING:  # avoid an import cycle; WindowSet is duck-typed below
    from .families import WindowSet

_ATOL = 1e-12


@dataclass
class MarkovMeasure:
    """Stationary one-step Markov measure.

    ``stationary`` is a positive probability vector, ``kernel`` a
    row-stochastic matrix whose support matches the transition matrix
    exactly.  Instances are treated as immutable.
    """

    base: TransitionMatrix
    stationary: np.ndarray
    kernel: np.ndarray
    origin: str = "custom"

    def __post_init__(self):
        self.stationary = np.asarray(self.stationary, dtype=float)
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.stationary.setflags(write=False)
        self.kernel.setflags(write=False)


@dataclass(frozen=True)
class LocallyConstantPotential:
    """Potential depending on two adjacent coordinates, stored edge-wise.

    Off-support entries are forced to zero and never read.
    """

    base: TransitionMatrix
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.base.size, self.base.size):
            raise PotentialOnForbiddenEdge("potential array must be a x a")
        support = self.base.entries != 0
        if not np.isfinite(vals[support]).all():
            raise PotentialOnForbiddenEdge("potential must be finite on every allowed edge")
        cleaned = np.where(support, vals, 0.0)
        cleaned.setflags(write=False)
        object.__setattr__(self, "values", cleaned)

    @property
    def sup_norm(self) -> float:
        support = self.base.entries != 0
        return float(np.max(np.abs(self.values[support])))


@dataclass(frozen=True)
class GibbsData:
    """Markov realization of a two-coordinate Gibbs state.

    ``constants`` brackets the ratio of cylinder mass to
    exp(-pressure*m + word Birkhoff sum) over all words of depth
    <= ``depth_checked``.
    """

    measure: MarkovMeasure
    pressure: float
    potential: LocallyConstantPotential
    constants: tuple[float, float]
    depth_checked: int


@dataclass(frozen=True)
class MixingProfile:
    """Mixing coefficients psi_0 .. psi_max over cylinder events."""

    deltas: tuple[int, ...]
    psi: tuple[float, ...]
    method: str
    cutoff: int
    bounded: bool
    nonincreasing: bool

    def value(self, delta: int) -> float:
        if delta < 0 or delta > self.deltas[-1]:
            raise IndexError(f"psi_{delta} not in profile (max {self.deltas[-1]})")
        return self.psi[delta]

    def prefix_sum(self, n: int) -> float:
        """Sum of psi_0 .. psi_{n-1}."""
        if n > len(self.psi):
            raise IndexError(f"profile too short for prefix sum of length {n}")
        return float(math.fsum(self.psi[:n]))


def validate_measure(m: MarkovMeasure, atol: float = _ATOL) -> None:
    """Raise if the stationarity / stochasticity / support invariants fail."""
    a = m.base.size
    if m.stationary.shape != (a,) or m.kernel.shape != (a, a):
        raise BadProbabilityVector("measure arrays have the wrong shape")
    if (m.stationary <= 0).any():
        raise BadProbabilityVector("stationary vector must be strictly positive")
    if abs(m.stationary.sum() - 1.0) > atol:
        raise BadProbabilityVector("stationary vector does not sum to 1")
    rows = m.kernel.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > atol:
        raise BadProbabilityVector("kernel rows must sum to 1")
    support_ok = (m.kernel > 0) == (m.base.entries == 1)
    if not support_ok.all():
        raise BadProbabilityVector("kernel support must match the transition matrix")
    drift = np.max(np.abs(m.stationary @ m.kernel - m.stationary))
    if drift > atol:
        raise BadProbabilityVector(f"stationarity violated: |piP - pi| = {drift:.3e}")


def markov_measure(
    base: TransitionMatrix,
    stationary,
    kernel,
    origin: str = "custom",
    validate: bool = True,
) -> MarkovMeasure:
    m = MarkovMeasure(base=base, stationary=np.array(stationary, dtype=float),
                      kernel=np.array(kernel, dtype=float), origin=origin)
    if validate:
        validate_measure(m)
    return m


def bernoulli(p) -> MarkovMeasure:
    """Product measure on the full shift with symbol law ``p``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or len(p) < 2:
        raise BadProbabilityVector("need a probability vector over >= 2 symbols")
    if (p <= 0).any():
        raise BadProbabilityVector("probabilities must be strictly positive")
    if abs(p.sum() - 1.0) > 1e-9:
        raise BadProbabilityVector(f"probabilities sum to {p.sum()!r}, not 1")
    base = full_shift(len(p))
    kernel = np.tile(p, (len(p), 1))
    return markov_measure(base, p, kernel, origin="bernoulli")


def parry(A: TransitionMatrix) -> MarkovMeasure:
    """The maximal-entropy Markov chain of a primitive transition matrix."""
    data = perron(A, tol=1e-14)
    lam, v, u = data.eigenvalue, data.right_vector, data.left_vector
    kernel = A.entries * v[None, :] / (lam * v[:, None])
    kernel = kernel / kernel.sum(axis=1, keepdims=True)
    pi = u * v
    pi = pi / pi.sum()
    return markov_measure(A, pi, kernel, origin="parry")


def gibbs(A: TransitionMatrix, potential: LocallyConstantPotential, depth: int = 8) -> GibbsData:
    """Gibbs state of a two-coordinate potential, realized as a Markov chain.

    Builds the weighted matrix L(i,j) = A(i,j) * exp(phi(i,j)), reads the
    pressure off its Perron eigenvalue, and brackets the Gibbs ratio over
    all words of length <= ``depth``.  The word Birkhoff sum uses the m-1
    interior edges of an m-word; the boundary term is absorbed into the
    constants.
    """
    if potential.base is not A:
        if potential.base.size != A.size or not np.array_equal(potential.base.entries, A.entries):
            raise PotentialOnForbiddenEdge("potential was built for a different transition matrix")
    weighted = A.entries * np.exp(potential.values)
    lam, v, u = perron_triple(weighted, tol=1e-14)[:3]
    pressure = float(np.log(lam))
    kernel = weighted * v[None, :] / (lam * v[:, None])
    kernel = np.where(A.entries == 1, kernel, 0.0)
    kernel = kernel / kernel.sum(axis=1, keepdims=True)
    pi = u * v
    pi = pi / pi.sum()
    measure = markov_measure(A, pi, kernel, origin="gibbs")
    c1, c2 = _gibbs_constants(measure, potential, pressure, depth)
    return GibbsData(measure=measure, pressure=pressure, potential=potential,
                     constants=(c1, c2), depth_checked=depth)


def _gibbs_constants(measure, potential, pressure, depth) -> tuple[float, float]:
    c1, c2 = np.inf, -np.inf
    for m in range(1, depth + 1):
        W = word_matrix(measure.base, m)
        mass = word_measures(measure, W)
        if m == 1:
            sums = np.zeros(len(W))
        else:
            sums = potential.values[W[:, :-1].astype(int), W[:, 1:].astype(int)].sum(axis=1)
        ratio = mass / np.exp(-pressure * m + sums)
        c1 = min(c1, float(ratio.min()))
        c2 = max(c2, float(ratio.max()))
    return c1, c2


def cylinder_measure(m: MarkovMeasure, word) -> float:
    """Mass of the cylinder fixed to ``word``; 0 when the word is not
    admissible (programmatic unions may contain such candidates)."""
    w = tuple(word)
    if not w:
        raise ValueError("empty word has no cylinder")
    a = m.base.size
    if any(s < 0 or s >= a for s in w):
        return 0.0
    out = m.stationary[w[0]]
    for i, j in zip(w, w[1:]):
        p = m.kernel[i, j]
        if p == 0.0:
            return 0.0
        out *= p
    return float(out)


def word_measures(m: MarkovMeasure, W: np.ndarray) -> np.ndarray:
    """Vectorized cylinder masses for the rows of a word matrix."""
    Wi = W.astype(int)
    out = m.stationary[Wi[:, 0]].copy()
    for k in range(W.shape[1] - 1):
        out *= m.kernel[Wi[:, k], Wi[:, k + 1]]
    return out


def set_measure(m: MarkovMeasure, window: "WindowSet") -> float:
    """Mass of a finite union of equal-length cylinders.

    The words are pairwise distinct of common length, so the cylinders are
    disjoint and the masses add.
    """
    lengths = {len(w) for w in window.words}
    if len(lengths) > 1:
        raise MixedLength(f"window set mixes word lengths {sorted(lengths)}")
    if lengths and lengths != {window.length}:
        raise MixedLength("window words disagree with the declared length")
    return float(math.fsum(cylinder_measure(m, w) for w in window.words))


def shannon_entropy_rate(m: MarkovMeasure) -> float:
    """Entropy rate -sum pi_i P(i,j) log P(i,j) of the chain."""
    P = m.kernel
    mask = P > 0
    terms = np.where(mask, m.stationary[:, None] * P * np.log(np.where(mask, P, 1.0)), 0.0)
    return float(-terms.sum())


def stationary_from_kernel(kernel: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic kernel (direct linear solve)."""
    a = kernel.shape[0]
    M = np.vstack([kernel.T - np.eye(a), np.ones(a)])
    rhs = np.zeros(a + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    return pi


# ---------------------------------------------------------------------------
# mixing coefficients


def _deviation_power(m: MarkovMeasure, t: int) -> np.ndarray:
    """P^t - 1 pi^T computed by the deviation recursion E_{t+1} = E_t P.

    Algebraically identical to forming the matrix power and subtracting, but
    keeps relative accuracy for large t and returns exact zeros for product
    measures (where the one-step deviation already vanishes).
    """
    E = m.kernel - np.tile(m.stationary, (m.base.size, 1))
    for _ in range(t - 1):
        E = E @ m.kernel
    return E


def psi_by_enumeration(m: MarkovMeasure, delta: int, cutoff: int, pair_cap: int = 10**7) -> float:
    """Mixing coefficient by direct enumeration over cylinder pairs.

    Slow but independent of the Markov reduction: the joint mass is summed
    word-by-word over every gap filling.  Used as the oracle that licenses
    the closed form.
    """
    a = m.base.size
    words: list[tuple[int, ...]] = []
    for length in range(1, cutoff + 1):
        words.extend(enumerate_words(m.base, length))
    total = len(words) ** 2 * a**delta
    if total > pair_cap:
        raise CutoffTooLarge(f"enumeration needs {total} cylinder-pair terms > {pair_cap}")
    gaps = list(itertools.product(range(a), repeat=delta))
    best = 0.0
    for u in words:
        mu_u = cylinder_measure(m, u)
        if mu_u == 0.0:
            continue
        for v in words:
            mu_v = cylinder_measure(m, v)
            if mu_v == 0.0:
                continue
            joint = math.fsum(cylinder_measure(m, u + g + v) for g in gaps)
            best = max(best, abs(joint / (mu_u * mu_v) - 1.0))
    return best


def _ensure_reduction_validated(m: MarkovMeasure, cutoff: int) -> None:
    """One-time empirical check (per measure) that the single-cylinder
    reduction of the mixing supremum matches direct enumeration."""
    cache = m.__dict__.setdefault("_psi_reduction_checked", set())
    key = cutoff
    if key in cache:
        return
    for delta in (0, 1, 2):
        closed = float(np.max(np.abs(_deviation_power(m, delta + 1)) / m.stationary[None, :]))
        enumerated = psi_by_enumeration(m, delta, cutoff)
        if abs(closed - enumerated) > 1e-12 * (1.0 + closed):
            raise RuntimeError(
                "mixing-coefficient reduction disagrees with enumeration: "
                f"delta={delta} closed={closed!r} enumerated={enumerated!r}"
            )
    cache.add(key)


def psi_coefficient(m: MarkovMeasure, delta: int, cutoff: int = 4) -> float:
    """Exact mixing coefficient over cylinder events with gap ``delta``.

    For a stationary chain the supremum over pairs of cylinder events is
    attained at a pair of single-symbol cylinders, collapsing the value to
    the largest relative deviation of the (delta+1)-step kernel from
    stationarity.  The reduction is re-verified against enumeration (up to
    min(cutoff, 4)) once per measure before being trusted.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    _ensure_reduction_validated(m, min(cutoff, 4))
    dev = _deviation_power(m, delta + 1)
    return float(np.max(np.abs(dev) / m.stationary[None, :]))


def psi_profile(m: MarkovMeasure, delta_max: int, cutoff: int = 4) -> MixingProfile:
    """Vector of mixing coefficients for gaps 0..delta_max."""
    _ensure_reduction_validated(m, min(cutoff, 4))
    values = []
    E = _deviation_power(m, 1)
    for _ in range(delta_max + 1):
        values.append(float(np.max(np.abs(E) / m.stationary[None, :])))
        E = E @ m.kernel
    psi = tuple(values)
    bounded = all(math.isfinite(x) for x in psi)
    noninc = all(psi[i + 1] <= psi[i] + 1e-12 for i in range(len(psi) - 1))
    if not noninc:
        # impossible for a stationary chain; a failure means a broken kernel
        raise RuntimeError("mixing coefficients are not non-increasing")
    return MixingProfile(deltas=tuple(range(delta_max + 1)), psi=psi,
                         method="exact-enumeration", cutoff=cutoff,
                         bounded=bounded, nonincreasing=noninc)


# ---------------------------------------------------------------------------
# pressure bound


def sup_birkhoff_norm(potential: LocallyConstantPotential, n: int) -> float:
    """Max over admissible n-words of the sum of the n-1 interior edge values
    (max-plus matrix power)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = potential.base.size
    phi = np.where(potential.base.entries != 0, potential.values, -np.inf)
    dp = np.zeros(a)
    for _ in range(n - 1):
        dp = np.max(dp[:, None] + phi, axis=0)
    return float(dp.max())


def gibbs_bound(g: GibbsData, window: "WindowSet") -> tuple[float, bool]:
    """Pressure bound m_n * exp(-P n + ||S_n phi||) for a union of m_n
    cylinders of length n; returns (bound, bound holds for the set mass)."""
    n = window.length
    m_n = len(window.words)
    norm = sup_birkhoff_norm(g.potential, n)
    bound = m_n * math.exp(-g.pressure * n + norm)
    mass = set_measure(g.measure, window)
    return bound, bool(mass <= bound + 1e-12)


# ---------------------------------------------------------------------------
# serialization


def potential_from_text(base: TransitionMatrix, text: str) -> LocallyConstantPotential:
    """Parse edge-wise potential lines ``i j value``."""
    values = np.zeros((base.size, base.size))
    seen = np.zeros((base.size, base.size), dtype=bool)
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        i_s, j_s, val_s = line.split()
        i, j, val = int(i_s), int(j_s), float(val_s)
        if not base.allows(i, j):
            raise PotentialOnForbiddenEdge(f"edge ({i},{j}) is forbidden by the transition matrix")
        values[i, j] = val
        seen[i, j] = True
    return LocallyConstantPotential(base=base, values=values)


def load_potential(base: TransitionMatrix, path) -> LocallyConstantPotential:
    return potential_from_text(base, Path(path).read_text())


def potential_to_text(potential: LocallyConstantPotential) -> str:
    lines = []
    a = potential.base.size
    for i in range(a):
        for j in range(a):
            if potential.base.allows(i, j):
                lines.append(f"{i} {j} {potential.values[i, j]!r}")
    return "\n".join(lines) + "\n"


def measure_to_dict(m: MarkovMeasure) -> dict:
    return {
        "origin": m.origin,
        "alphabet": m.base.size,
        "transition": m.base.entries.astype(int).tolist(),
        "stationary": [float(x) for x in m.stationary],
        "kernel": [[float(x) for x in row] for row in m.kernel],
    }


def measure_from_dict(d: dict) -> MarkovMeasure:
    from .sft import validate as validate_matrix

    base = validate_matrix(d["transition"])
    return markov_measure(base, d["stationary"], d["kernel"], origin=d.get("origin", "custom"))
