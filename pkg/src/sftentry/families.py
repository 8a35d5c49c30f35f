"""Families of cylinder-union targets, their return times, and envelopes.

A :class:`WindowSet` is a finite union of equal-length cylinders anchored at
a common coordinate offset; families produce one window set per index n.
Two-sided anchoring is stored as (offset, one-sided word): stationarity makes
all masses offset-invariant, so only relative shifts ever matter.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import measures
from .errors import DescriptorInvalid, EmptySet, FamilyNotShrinking, MixedLength, NotPrimitive
from .sft import (
    TransitionMatrix,
    connection_path,
    count_words,
    earliest_connection,
    is_admissible,
    validate as validate_matrix,
)

# ---------------------------------------------------------------------------
# symbol streams


class PeriodicStream:
    """Two-sided periodic symbol stream."""

    def __init__(self, cycle, name: str | None = None):
        self.cycle = tuple(int(c) for c in cycle)
        if not self.cycle:
            raise DescriptorInvalid("empty cycle")
        self.name = name or "".join(map(str, self.cycle)) + "*"

    def symbol(self, i: int) -> int:
        return self.cycle[i % len(self.cycle)]

    def window(self, start: int, length: int) -> tuple[int, ...]:
        return tuple(self.symbol(i) for i in range(start, start + length))


class SturmianStream:
    """Aperiodic rotation-coded 0/1 stream with isolated ones.

    symbol(i) = floor((i+1) g) - floor(i g) for the irrational slope
    g = sqrt(radicand) - shift in (0, 1/2); floors are exact via integer
    square roots, so windows are reproducible bit-for-bit.
    """

    def __init__(self, radicand: int, shift: int, name: str | None = None):
        root = math.isqrt(radicand)
        if root * root == radicand:
            raise DescriptorInvalid("radicand must not be a perfect square")
        slope_lo = root  # floor(sqrt(radicand))
        if not (0 < slope_lo + 1 - shift and shift >= root):
            pass  # slope sanity handled below
        self.radicand = radicand
        self.shift = shift
        self.name = name or f"sturmian{radicand}"
        # slope must land in (0, 1/2) so ones are isolated
        approx = math.sqrt(radicand) - shift
        if not (0.0 < approx < 0.5):
            raise DescriptorInvalid(f"slope {approx} outside (0, 1/2)")

    def _floor_mult(self, i: int) -> int:
        # floor(i * sqrt(radicand)), exact for any sign of i
        if i >= 0:
            return math.isqrt(self.radicand * i * i)
        return -math.isqrt(self.radicand * i * i) - 1

    def _floor_slope(self, i: int) -> int:
        return self._floor_mult(i) - self.shift * i

    def symbol(self, i: int) -> int:
        return int(self._floor_slope(i + 1) - self._floor_slope(i))

    def window(self, start: int, length: int) -> tuple[int, ...]:
        return tuple(self.symbol(i) for i in range(start, start + length))


def named_stream(token: str):
    """Stream from a config token: digit cycles ('0', '01', ...) or the named
    aperiodic streams 'sturmian2' / 'sturmian5'."""
    if token == "sturmian2":
        return SturmianStream(2, 1)
    if token == "sturmian5":
        return SturmianStream(5, 2)
    if token.isdigit():
        return PeriodicStream(tuple(int(c) for c in token))
    raise DescriptorInvalid(f"unknown stream token {token!r}")


# ---------------------------------------------------------------------------
# window sets


@dataclass
class WindowSet:
    """Finite union of equal-length cylinders at a common anchor offset."""

    base: TransitionMatrix
    offset: int
    length: int
    words: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        words = tuple(sorted(set(tuple(int(s) for s in w) for w in self.words)))
        for w in words:
            if len(w) != self.length:
                raise MixedLength(f"word {w} does not have length {self.length}")
            if not is_admissible(self.base, w):
                raise DescriptorInvalid(f"word {w} is not admissible")
        self.words = words
        self._word_set = frozenset(words)

    @property
    def cardinality(self) -> int:
        return len(self.words)

    def __contains__(self, word) -> bool:
        return tuple(word) in self._word_set

    def covers_all_words(self) -> bool:
        """True when the set contains every admissible word of its length."""
        return len(self.words) == count_words(self.base, self.length)


def window_set_to_dict(w: WindowSet) -> dict:
    if w.base.size <= 10:
        words = ["".join(str(s) for s in word) for word in w.words]
    else:
        words = [",".join(str(s) for s in word) for word in w.words]
    return {"n": w.length, "offset": w.offset, "words": words}


def window_set_from_dict(base: TransitionMatrix, d: dict) -> WindowSet:
    words = []
    for token in d["words"]:
        if "," in token:
            words.append(tuple(int(t) for t in token.split(",")))
        else:
            words.append(tuple(int(c) for c in token))
    return WindowSet(base=base, offset=int(d["offset"]), length=int(d["n"]), words=tuple(words))


# ---------------------------------------------------------------------------
# family descriptors


@dataclass
class PrefixFamily:
    """Words that start with a fixed head symbol and continue inside a tail
    alphabet: the n-th set is the union over admissible tails of length n-1."""

    base: TransitionMatrix
    head: int
    tail: tuple[int, ...]
    n_min: int = 1
    n_max: int = 64
    kind: str = "prefix"
    anchor: str = "one_sided"

    def __post_init__(self):
        a = self.base.size
        self.tail = tuple(sorted(set(int(t) for t in self.tail)))
        if not (0 <= self.head < a):
            raise DescriptorInvalid(f"head symbol {self.head} outside alphabet")
        if not self.tail or any(t < 0 or t >= a for t in self.tail):
            raise DescriptorInvalid("tail alphabet must be a nonempty subset of the alphabet")

    def describe(self) -> str:
        return f"prefix head={self.head} tail={{{','.join(map(str, self.tail))}}}"

    def window_set(self, n: int) -> WindowSet:
        rows = [(self.head,)]
        for _ in range(n - 1):
            rows = [r + (t,) for r in rows for t in self.tail if self.base.allows(r[-1], t)]
            if not rows:
                raise EmptySet(f"no admissible words at n={n}")
        return WindowSet(self.base, 0, n, tuple(rows))


@dataclass
class FixedPointFamily:
    """Cylinders of a single point: prefixes (one_sided) or centered windows
    of a fixed symbol stream."""

    base: TransitionMatrix
    stream: object
    anchor: str = "one_sided"
    n_min: int = 1
    n_max: int = 64
    kind: str = "fixed_point"

    def describe(self) -> str:
        return f"fixed_point stream={getattr(self.stream, 'name', '?')} anchor={self.anchor}"

    def window_set(self, n: int) -> WindowSet:
        if self.anchor == "centered":
            word = self.stream.window(-n, 2 * n)
            offset = -n
        else:
            word = self.stream.window(0, n)
            offset = 0
        if not is_admissible(self.base, word):
            raise EmptySet(f"stream window {word} is not admissible")
        return WindowSet(self.base, offset, len(word), (word,))


@dataclass
class SubmatrixFamily:
    """An entry symbol followed by words of a primitive proper sub-alphabet."""

    base: TransitionMatrix
    block_symbols: tuple[int, ...]
    entry: int
    n_min: int = 1
    n_max: int = 64
    kind: str = "submatrix"
    anchor: str = "one_sided"

    def __post_init__(self):
        a = self.base.size
        if a <= 2:
            raise DescriptorInvalid("submatrix families need an alphabet larger than 2")
        block = tuple(sorted(set(int(s) for s in self.block_symbols)))
        if not (2 <= len(block) <= a - 1):
            raise DescriptorInvalid("sub-alphabet must have between 2 and a-1 symbols")
        if any(s < 0 or s >= a for s in block):
            raise DescriptorInvalid("sub-alphabet outside the alphabet")
        if self.entry in block or not (0 <= self.entry < a):
            raise DescriptorInvalid("entry symbol must lie outside the sub-alphabet")
        sub = self.base.entries[np.ix_(block, block)]
        try:
            validate_matrix(sub)
        except NotPrimitive as exc:
            raise DescriptorInvalid(f"sub-alphabet block is not primitive: {exc}") from exc
        self.block_symbols = block

    def describe(self) -> str:
        return f"submatrix entry={self.entry} block={{{','.join(map(str, self.block_symbols))}}}"

    def window_set(self, n: int) -> WindowSet:
        rows = [(self.entry,)]
        for _ in range(n - 1):
            rows = [r + (t,) for r in rows for t in self.block_symbols if self.base.allows(r[-1], t)]
            if not rows:
                raise EmptySet(f"no admissible words at n={n}")
        return WindowSet(self.base, 0, n, tuple(rows))


@dataclass
class ExplicitFamily:
    """Window sets listed explicitly per index."""

    base: TransitionMatrix
    table: dict[int, WindowSet]
    anchor: str = "one_sided"
    name: str = "explicit"
    kind: str = "explicit"

    def __post_init__(self):
        if not self.table:
            raise DescriptorInvalid("explicit family with empty table")
        self.n_min = min(self.table)
        self.n_max = max(self.table)

    def describe(self) -> str:
        return f"explicit {self.name} n={self.n_min}..{self.n_max}"

    def window_set(self, n: int) -> WindowSet:
        if n not in self.table:
            raise DescriptorInvalid(f"explicit family has no entry for n={n}")
        return self.table[n]


def instantiate(family, n: int) -> WindowSet:
    """The family's window set at index n (range-checked)."""
    if n < family.n_min or n > family.n_max:
        raise DescriptorInvalid(f"n={n} outside family range {family.n_min}..{family.n_max}")
    window = family.window_set(n)
    if not window.words:
        raise EmptySet(f"family produced no words at n={n}")
    return window


def explicit_family_from_json(base: TransitionMatrix, path) -> ExplicitFamily:
    entries = json.loads(Path(path).read_text())
    table = {int(e["n"]): window_set_from_dict(base, e) for e in entries}
    offsets = {n: w.offset for n, w in table.items()}
    anchor = "centered" if all(offsets[n] == -n for n in table) else "one_sided"
    return ExplicitFamily(base=base, table=table, anchor=anchor, name=Path(path).stem)


def explicit_family_to_json(family: ExplicitFamily, path) -> None:
    payload = [window_set_to_dict(family.table[n]) for n in sorted(family.table)]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- builders for constructed families --------------------------------------


def block_return_family(
    base: TransitionMatrix, n_range, period_of, name: str = "blocks", anchor: str = "one_sided"
) -> ExplicitFamily:
    """Single-cylinder family whose n-th word is the length-n (or 2n, when
    centered) prefix of (0^{r-1} 1)^inf with r = period_of(n).

    The block is a primitive word, so the word's least self-overlap shift is
    exactly r whenever the word is at least r long: the family realizes a
    prescribed return time.
    """
    table = {}
    for n in n_range:
        r = int(period_of(n))
        length = 2 * n if anchor == "centered" else n
        if not (1 <= r <= length):
            raise DescriptorInvalid(f"period {r} invalid for word length {length}")
        cycle = (0,) * (r - 1) + (1,)
        word = tuple(cycle[i % r] for i in range(length))
        offset = -n if anchor == "centered" else 0
        table[n] = WindowSet(base, offset, length, (word,))
    return ExplicitFamily(base=base, table=table, anchor=anchor, name=name)


def anchored_stream_family(base: TransitionMatrix, stream, n_range, name: str = "anchored") -> ExplicitFamily:
    """Centered-frame family showing the first 2n stream symbols at offset -n.

    After realignment by the shift, consecutive sets are nested by
    construction (each word extends the previous one), which is what the
    centered nesting condition asks for.
    """
    table = {}
    for n in n_range:
        word = stream.window(0, 2 * n)
        if not is_admissible(base, word):
            raise EmptySet(f"stream window at n={n} not admissible")
        table[n] = WindowSet(base, -n, 2 * n, (word,))
    return ExplicitFamily(base=base, table=table, anchor="centered", name=name)


def union_of_points_family(
    base: TransitionMatrix, streams, n_range, name: str = "union", anchor: str = "one_sided"
) -> ExplicitFamily:
    """Union of the point-cylinders of several streams (sets that never
    shrink to a single point)."""
    table = {}
    for n in n_range:
        words = []
        for s in streams:
            w = s.window(-n, 2 * n) if anchor == "centered" else s.window(0, n)
            if is_admissible(base, w):
                words.append(w)
        if not words:
            raise EmptySet(f"no admissible words at n={n}")
        offset = -n if anchor == "centered" else 0
        table[n] = WindowSet(base, offset, (2 * n if anchor == "centered" else n), tuple(words))
    return ExplicitFamily(base=base, table=table, anchor=anchor, name=name)


# ---------------------------------------------------------------------------
# return times


@dataclass(frozen=True)
class ReturnTimeRecord:
    """Least k >= 1 with U meeting its k-shifted copy, plus a witness.

    ``configuration`` is one admissible word carrying both window
    memberships: the left word at relative position 0 and the right word at
    position eta.
    """

    eta: int
    regime: str  # 'overlap' (eta < L) or 'bridge' (eta >= L)
    left: tuple[int, ...]
    right: tuple[int, ...]
    configuration: tuple[int, ...]

    def verify(self, window: WindowSet) -> bool:
        L = window.length
        cfg = self.configuration
        return (
            len(cfg) == self.eta + L
            and is_admissible(window.base, cfg)
            and cfg[:L] in window
            and cfg[self.eta :] in window
        )


def return_time(window: WindowSet) -> ReturnTimeRecord:
    """Minimal self-return of a window set.

    Overlap regime (k < L): scan suffix-prefix matches; the merged word is
    automatically admissible because the adjacency constraints are
    nearest-neighbour.  Bridge regime (k >= L): the least admissible path
    from some last symbol to some first symbol; primitivity bounds the
    search, so a miss is an internal error rather than a domain condition.
    """
    if not window.words:
        raise EmptySet("return time of an empty window set")
    L = window.length
    words = window.words
    for k in range(1, L):
        suffixes = {w[k:] for w in words}
        for w in words:
            if w[: L - k] in suffixes:
                u = next(x for x in words if x[k:] == w[: L - k])
                return ReturnTimeRecord(
                    eta=k, regime="overlap", left=u, right=w, configuration=u + w[L - k :]
                )
    a = window.base.size
    cap = L + (a - 1) ** 2 + 1
    hit = earliest_connection(
        window.base, [w[-1] for w in words], [w[0] for w in words], cap
    )
    if hit is None:  # impossible for a primitive matrix
        raise RuntimeError("bridge search exceeded the primitivity cap; transition data corrupt")
    steps, i, j = hit
    u = next(w for w in words if w[-1] == i)
    w = next(x for x in words if x[0] == j)
    mid = connection_path(window.base, i, j, steps)
    return ReturnTimeRecord(
        eta=L + steps - 1, regime="bridge", left=u, right=w, configuration=u + mid + w
    )


def check_nested(family, n: int) -> bool:
    """Containment of consecutive sets after shift alignment.

    Both anchorings reduce to the same word-level rule: every word of the
    (n+1)-st set restricted to its first L_n symbols must belong to the
    n-th set (L_n = n one-sided, 2n centered).
    """
    current = instantiate(family, n)
    nxt = instantiate(family, n + 1)
    L = current.length
    if nxt.length < L:
        raise DescriptorInvalid("window length must not decrease in n")
    return all(w[:L] in current for w in nxt.words)


def envelope(window: WindowSet, eta: int, side: str) -> WindowSet:
    """Smallest window set containing ``window`` that is measurable in the
    floor(eta/2)+1 first (prefix) or last (suffix) coordinates."""
    span = eta // 2 + 1
    if span > window.length:
        raise DescriptorInvalid(f"envelope span {span} exceeds window length {window.length}")
    if side == "prefix":
        words = tuple({w[:span] for w in window.words})
        offset = window.offset
    elif side == "suffix":
        words = tuple({w[-span:] for w in window.words})
        offset = window.offset + window.length - span
    else:
        raise ValueError("side must be 'prefix' or 'suffix'")
    return WindowSet(window.base, offset, span, words)


# ---------------------------------------------------------------------------
# per-family diagnostics table


@dataclass(frozen=True)
class FamilyReportRow:
    n: int
    epsilon: float
    cardinality: int
    eta: int
    regime: str
    nested: bool | None
    scaled_half_eta_mass: float | None
    note: str = ""


def family_report(family, measure: measures.MarkovMeasure, n_values) -> list[FamilyReportRow]:
    """Per-n diagnostics: mass, cardinality, return time, nesting, and the
    n * mu(U_{floor(eta/2)}) column used by the shrinking-set criterion."""
    rows = []
    ns = list(n_values)
    for n in ns:
        window = instantiate(family, n)
        eps = measures.set_measure(measure, window)
        record = return_time(window)
        nested: bool | None
        try:
            nested = check_nested(family, n)
        except (DescriptorInvalid, EmptySet):
            nested = None
        half = record.eta // 2
        note = ""
        scaled = None
        if half < 1:
            note = "floor(eta/2) < 1: column unavailable"
        else:
            try:
                scaled = n * measures.set_measure(measure, instantiate(family, half))
            except (DescriptorInvalid, EmptySet):
                note = f"family not instantiable at {half}"
        rows.append(
            FamilyReportRow(
                n=n,
                epsilon=eps,
                cardinality=window.cardinality,
                eta=record.eta,
                regime=record.regime,
                nested=nested,
                scaled_half_eta_mass=scaled,
                note=note,
            )
        )
    return rows


def require_shrinking(family, n_values) -> None:
    """Raise FamilyNotShrinking unless consecutive sets are nested across the
    given range."""
    ns = sorted(n_values)
    for n in ns[:-1]:
        if not check_nested(family, n):
            raise FamilyNotShrinking(f"containment fails between n={n} and n={n + 1}")
