"""Exact entry-time distributions via a sub-stochastic window chain.

The chain's states are the admissible words of the target's window length;
one step slides the window by one coordinate.  Making the target windows
absorbing turns tail probabilities of the entry time into iterated
masked matrix-vector products, exact up to float rounding.  The same
machinery evaluates every identity and correlation bound used by the
exponential-law arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from . import measures
from .errors import DescriptorInvalid, HorizonExceeded, StateSpaceTooLarge
from .families import WindowSet, envelope, instantiate, require_shrinking, return_time
from .measures import MarkovMeasure, MixingProfile, set_measure
from .sft import count_words, word_matrix

_STATE_GUARD = 10**6
_IDENTITY_TOL = 1e-10

# series summation used by the identity checks; module-level so tests can
# fault-inject a broken implementation
_series_sum = math.fsum


@dataclass
class WindowChain:
    """Markov chain on admissible L-words with the target windows marked."""

    measure: MarkovMeasure
    window: WindowSet
    length: int
    keys: np.ndarray           # base-a encodings of the states, ascending
    rho: np.ndarray            # stationary window law
    step_T: sparse.csr_matrix  # transposed one-step matrix, for mass pushes
    absorbing: np.ndarray      # bool: state lies in the target

    @property
    def states(self) -> int:
        return len(self.keys)

    @property
    def epsilon(self) -> float:
        return float(self.rho[self.absorbing].sum())


def _encode_words(words, a: int) -> np.ndarray:
    arr = np.asarray(words, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    L = arr.shape[1]
    weights = a ** np.arange(L - 1, -1, -1, dtype=np.int64)
    return arr @ weights


def build_chain(measure: MarkovMeasure, window: WindowSet) -> WindowChain:
    """Assemble the window chain for a target window set.

    The state count is guarded; window offsets do not enter (stationarity
    makes the window law offset-free) so only the window length matters.
    """
    A = measure.base
    L = window.length
    a = A.size
    total = count_words(A, L)
    if total > _STATE_GUARD:
        raise StateSpaceTooLarge(f"{total} window states exceed the guard {_STATE_GUARD}")
    if L * math.log2(a) > 62:
        raise StateSpaceTooLarge("window keys would overflow 64-bit encoding")
    W = word_matrix(A, L)
    keys = _encode_words(W, a)
    rho = measures.word_measures(measure, W)
    last = W[:, -1].astype(int)
    tail_mod = a ** (L - 1)
    rows_src = []
    rows_dst = []
    rows_val = []
    for c in range(a):
        ok = np.nonzero(A.entries[last, c] == 1)[0]
        if len(ok) == 0:
            continue
        dkey = (keys[ok] % tail_mod) * a + c
        dst = np.searchsorted(keys, dkey)
        rows_src.append(ok)
        rows_dst.append(dst)
        rows_val.append(measure.kernel[last[ok], c])
    src = np.concatenate(rows_src)
    dst = np.concatenate(rows_dst)
    val = np.concatenate(rows_val)
    step_T = sparse.csr_matrix((val, (dst, src)), shape=(total, total))
    absorbing = np.isin(keys, _encode_words(window.words, a))
    return WindowChain(
        measure=measure, window=window, length=L, keys=keys, rho=rho,
        step_T=step_T, absorbing=absorbing,
    )


def slice_mask(chain: WindowChain, start: int, words) -> np.ndarray:
    """Boolean state mask: the window's symbols at positions
    [start, start+len(word)) spell one of ``words``."""
    a = chain.measure.base.size
    span = len(next(iter(words)))
    if start < 0 or start + span > chain.length:
        raise ValueError("slice outside the window")
    shift = a ** (chain.length - start - span)
    sub = (chain.keys // shift) % a**span
    return np.isin(sub, _encode_words(list(words), a))


# ---------------------------------------------------------------------------
# survival curves


@dataclass
class SurvivalCurve:
    """Exact tail q -> mu{tau > q} for q = 0..Q."""

    epsilon: float
    values: np.ndarray
    tail_threshold: float
    capped: bool
    label: str = ""

    @property
    def horizon(self) -> int:
        return len(self.values) - 1


def default_horizon(epsilon: float, tail_threshold: float = 1e-4, cap: int = 5_000_000) -> tuple[int, bool]:
    """Grid length needed to push exp(-t) below the tail threshold, capped."""
    need = int(math.ceil(-math.log(tail_threshold) / epsilon)) + 1
    return (min(need, cap), need > cap)


def survival(chain: WindowChain, Q: int, tail_threshold: float = 1e-4,
             capped: bool = False, label: str = "") -> SurvivalCurve:
    """Exact survival s(q) = mu(no window among positions 1..q hits the
    target), computed by masked mass propagation."""
    if Q < 0:
        raise ValueError("Q must be >= 0")
    s = np.empty(Q + 1)
    s[0] = 1.0
    keep = ~chain.absorbing
    u = chain.rho * keep
    if Q >= 1:
        s[1] = u.sum()
    for q in range(2, Q + 1):
        u = chain.step_T @ u
        u *= keep
        s[q] = u.sum()
    eps = set_measure(chain.measure, chain.window)
    return SurvivalCurve(epsilon=eps, values=s, tail_threshold=tail_threshold,
                         capped=capped, label=label)


def survival_curve(measure: MarkovMeasure, window: WindowSet,
                   tail_threshold: float = 1e-4, cap: int = 5_000_000,
                   label: str = "") -> SurvivalCurve:
    """Build the chain and integrate far enough for tail comparisons."""
    chain = build_chain(measure, window)
    eps = chain.epsilon
    Q, capped = default_horizon(eps, tail_threshold, cap)
    return survival(chain, Q, tail_threshold=tail_threshold, capped=capped, label=label)


def conditional_survival(chain: WindowChain, Q: int) -> np.ndarray:
    """mu{x in target : tau(x) > q} for q = 0..Q.

    The window process is Markov, so conditioning on the initial window
    lying in the target only changes the starting mass; the joint law of
    consecutive windows is carried exactly by the one-step matrix.
    """
    c = np.empty(Q + 1)
    start = chain.rho * chain.absorbing
    c[0] = start.sum()
    keep = ~chain.absorbing
    u = chain.step_T @ start
    u *= keep
    if Q >= 1:
        c[1] = u.sum()
    for q in range(2, Q + 1):
        u = chain.step_T @ u
        u *= keep
        c[q] = u.sum()
    return c


def rescaled_law(curve: SurvivalCurve, t: float) -> float:
    """Exact tail of the rescaled entry time at t on the grid:
    mu{tau > floor(t / eps)}."""
    N = int(math.floor(t / curve.epsilon))
    if N > curve.horizon:
        raise HorizonExceeded(f"floor(t/eps) = {N} beyond horizon {curve.horizon}")
    if N < 0:
        raise ValueError("t must be nonnegative")
    return float(curve.values[N])


def ks_vs_exponential(curve: SurvivalCurve, allow_truncated: bool = False) -> float:
    """Sup distance between the survival curve and the unit exponential tail
    over the grid t_q = q * eps, plus the truncation bound exp(-t_Q) as a
    conservative adjustment."""
    eps = curve.epsilon
    q = np.arange(len(curve.values), dtype=float)
    sup = float(np.max(np.abs(curve.values - np.exp(-q * eps))))
    tail = math.exp(-curve.horizon * eps)
    if curve.capped and tail > curve.tail_threshold and not allow_truncated:
        raise HorizonExceeded(
            f"horizon cap left tail mass {tail:.3e} above threshold {curve.tail_threshold:g}"
        )
    return sup + tail


# ---------------------------------------------------------------------------
# propagation helpers shared by the bound checks


def pair_correlations(chain: WindowChain, i_max: int) -> np.ndarray:
    """E[i] = mu(target at position 0 and target at position i), i = 0..i_max."""
    out = np.empty(i_max + 1)
    v = chain.rho * chain.absorbing
    out[0] = v.sum()
    for i in range(1, i_max + 1):
        v = chain.step_T @ v
        out[i] = v[chain.absorbing].sum()
    return out


def correlations_from(chain: WindowChain, start_mask: np.ndarray,
                      target_mask: np.ndarray, i_max: int) -> np.ndarray:
    """E[i] = mu(start event at position 0, target event at position i)."""
    out = np.empty(i_max + 1)
    v = chain.rho * start_mask
    out[0] = v[target_mask].sum()
    for i in range(1, i_max + 1):
        v = chain.step_T @ v
        out[i] = v[target_mask].sum()
    return out


def masked_from(chain: WindowChain, start_mask: np.ndarray, first_masked: int,
                q_max: int) -> np.ndarray:
    """E[q] = mu(start event at 0, and no target window at positions
    first_masked..q), for q = 0..q_max (empty constraint below
    first_masked)."""
    out = np.empty(q_max + 1)
    keep = ~chain.absorbing
    v = chain.rho * start_mask
    out[0] = v.sum()
    for q in range(1, q_max + 1):
        v = chain.step_T @ v
        if q >= first_masked:
            v *= keep
        out[q] = v.sum()
    return out


# ---------------------------------------------------------------------------
# check reports


@dataclass
class CheckReport:
    """Outcome of one identity or inequality verification."""

    check_id: str
    passed: bool
    tolerance: float
    max_residual: float | None = None
    max_violation: float | None = None
    details: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "passed": bool(self.passed),
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "max_violation": self.max_violation,
            "details": self.details,
            "notes": list(self.notes),
        }


def _trace(qs, values, limit: int = 256) -> list[list[float]]:
    pairs = list(zip(qs, values))
    if len(pairs) > limit:
        idx = np.linspace(0, len(pairs) - 1, limit).astype(int)
        pairs = [pairs[i] for i in idx]
    return [[float(q), float(v)] for q, v in pairs]


def telescoping_check(curve: SurvivalCurve, t: float) -> CheckReport:
    """Algebraic telescoping of the survival tail against the Bernoulli
    reference (1-eps)^N: a harness self-test that holds for any sequence."""
    eps = curve.epsilon
    N = int(math.floor(t / eps))
    if N > curve.horizon:
        raise HorizonExceeded(f"N = {N} beyond horizon {curve.horizon}")
    s = curve.values
    q = np.arange(N)
    weights = (1.0 - eps) ** (N - q - 1)
    terms = weights * (s[1 : N + 1] - (1.0 - eps) * s[:N])
    rhs = _series_sum(terms.tolist())
    lhs = float(s[N] - (1.0 - eps) ** N)
    residual = abs(lhs - rhs)
    return CheckReport(
        check_id="telescoping_identity",
        passed=residual <= _IDENTITY_TOL,
        tolerance=_IDENTITY_TOL,
        max_residual=residual,
        details={"N": N, "t": t},
    )


def entry_identity_check(chain: WindowChain, Q: int,
                         curve: SurvivalCurve | None = None,
                         conditional: np.ndarray | None = None) -> CheckReport:
    """One-step decomposition of the survival tail through the conditional
    tail on the target; exact for a stationary chain, so the residual is an
    end-to-end stationarity probe."""
    if curve is None or curve.horizon < Q + 1:
        curve = survival(chain, Q + 1)
    if conditional is None or len(conditional) < Q + 1:
        conditional = conditional_survival(chain, Q)
    s = curve.values
    c = conditional
    eps = chain.epsilon
    q = np.arange(Q)
    residuals = np.abs((s[1 : Q + 1] - (1 - eps) * s[:Q]) - (eps * s[:Q] - c[:Q]))
    worst = int(residuals.argmax())
    return CheckReport(
        check_id="entry_decomposition_identity",
        passed=float(residuals.max()) <= _IDENTITY_TOL,
        tolerance=_IDENTITY_TOL,
        max_residual=float(residuals.max()),
        details={"argmax_q": worst, "trace": _trace(q, residuals)},
    )


def correlation_bounds_check(chain: WindowChain, profile: MixingProfile,
                             Q: int | None = None, k_max: int = 12,
                             q_step: int = 4) -> CheckReport:
    """Two-block correlation bounds for a one-sided target of length n.

    Verifies, with exactly computed left sides:
      joint_hit:        E(1_U 1_U o sigma^{n+k})      <= eps^2 (1 + psi_k)
      conditioned_gap:  |E(1_U prod_{2n..q}) - E(1_U prod_{n..q})|
                                                      <= eps^2 (n + sum_{i<n} psi_i)
      plain_gap:        |E(prod_{2n..q}) - E(prod_{n..q})|  <= n eps
      decorrelation:    |eps E(prod_{2n..q}) - E(1_U prod_{2n..q})| <= eps psi_n
    """
    n = chain.length
    eps = chain.epsilon
    if Q is None:
        Q = 3 * n + 9
    q_samples = list(range(2 * n + 1, Q + 1, q_step))
    if not q_samples:
        raise ValueError("horizon too short: need q >= 2n+1")
    k_top = min(k_max, profile.deltas[-1])
    pair = pair_correlations(chain, n + k_top)
    e_from_n = masked_from(chain, chain.absorbing, n, Q)
    e_from_2n = masked_from(chain, chain.absorbing, 2 * n, Q)
    curve = survival(chain, Q)
    s = curve.values

    tol = _IDENTITY_TOL
    details: dict = {}
    violations: dict[str, float] = {}

    ks = np.arange(0, k_top + 1)
    lhs13 = pair[n + ks]
    rhs13 = eps**2 * (1.0 + np.array([profile.value(int(k)) for k in ks]))
    violations["joint_hit"] = float(np.max(lhs13 - rhs13))
    details["joint_hit"] = {"k": ks.tolist(), "lhs": lhs13.tolist(), "rhs": rhs13.tolist()}

    psi_prefix = profile.prefix_sum(n)
    psi_n = profile.value(n)
    v14, v15, v16 = [], [], []
    for q in q_samples:
        lhs14 = abs(e_from_2n[q] - e_from_n[q])
        v14.append(lhs14 - eps**2 * (n + psi_prefix))
        lhs15 = abs(s[q - 2 * n + 1] - s[q - n + 1])
        v15.append(lhs15 - n * eps)
        lhs16 = abs(eps * s[q - 2 * n + 1] - e_from_2n[q])
        v16.append(lhs16 - eps * psi_n)
    violations["conditioned_gap"] = float(max(v14))
    violations["plain_gap"] = float(max(v15))
    violations["decorrelation"] = float(max(v16))
    details["q_samples"] = q_samples
    details["conditioned_gap"] = _trace(q_samples, v14)
    details["plain_gap"] = _trace(q_samples, v15)
    details["decorrelation"] = _trace(q_samples, v16)

    worst = max(violations.values())
    return CheckReport(
        check_id="block_correlation_bounds",
        passed=worst <= tol,
        tolerance=tol,
        max_violation=worst,
        details={"violations": violations, **details},
    )


def partial_sum_bounds_check(chain: WindowChain, profile: MixingProfile, t: float,
                             curve: SurvivalCurve | None = None) -> CheckReport:
    """Early/late partial sums of the telescoping series.

    The early sum is bounded by n*eps outright.  The late-sum bound is the
    mixing estimate 4(n+1)(t+1) eps + (t+1) psi_n + N eps^2 sum_{i<n} psi_i,
    whose derivation needs return times >= n; when the target returns
    earlier the late bound is reported as not applicable.
    """
    n = chain.length
    eps = chain.epsilon
    N = int(math.floor(t / eps))
    if curve is None or curve.horizon < N:
        curve = survival(chain, N)
    s = curve.values
    q = np.arange(N)
    p = (1.0 - eps) ** (N - q - 1) * (s[1 : N + 1] - (1.0 - eps) * s[:N])
    s1 = _series_sum(p[: min(n, N)].tolist())
    s2 = _series_sum(p[min(n, N) :].tolist())
    decomposition = abs((s1 + s2) - (s[N] - (1.0 - eps) ** N))

    eta = return_time(chain.window).eta
    tol = _IDENTITY_TOL
    early_violation = s1 - n * eps
    bound_late = (4 * (n + 1) * (t + 1) * eps + (t + 1) * profile.value(n)
                  + N * eps**2 * profile.prefix_sum(n))
    late_applicable = eta >= n
    late_violation = (s2 - bound_late) if late_applicable else None

    notes = []
    if not late_applicable:
        notes.append(f"return time {eta} < n={n}: late-sum bound not applicable")
    passed = (early_violation <= tol and decomposition <= tol
              and (late_violation is None or late_violation <= tol))
    return CheckReport(
        check_id="partial_sum_bounds",
        passed=passed,
        tolerance=tol,
        max_residual=decomposition,
        max_violation=float(max(early_violation, late_violation if late_violation is not None else -math.inf)),
        details={
            "N": N, "t": t, "early_sum": s1, "late_sum": s2,
            "early_violation": early_violation,
            "late_violation": late_violation,
            "late_bound": bound_late if late_applicable else None,
        },
        notes=tuple(notes),
    )


def early_return_bound_check(family, measure: MarkovMeasure, n: int,
                             profile: MixingProfile,
                             q_samples=None) -> CheckReport:
    """For a shrinking one-sided family: restarting the avoidance product at
    the return time instead of at n costs at most
    n * eps_n * eps_{floor(eta/2)} * (1 + psi_{floor(eta/2)}).

    Also verifies the exact containment step
    E(1_U 1_U o sigma^i) <= E(1_U 1_{U_{floor(i/2)}} o sigma^i).
    """
    require_shrinking(family, range(family.n_min, n + 1))
    window = instantiate(family, n)
    chain = build_chain(measure, window)
    eps = chain.epsilon
    eta = return_time(window).eta
    tol = _IDENTITY_TOL

    if eta >= n:
        return CheckReport(
            check_id="early_return_bound",
            passed=True,
            tolerance=tol,
            max_violation=0.0,
            details={"eta": eta, "n": n},
            notes=("return time >= n: the two products coincide identically",),
        )

    half = eta // 2
    if half < max(1, family.n_min):
        raise DescriptorInvalid(
            f"floor(eta/2) = {half} below the family range; pick a family with later returns"
        )
    eps_half = set_measure(measure, instantiate(family, half))
    psi_half = profile.value(half)
    if q_samples is None:
        q_samples = list(range(n + 1, 3 * n + 1, 2))
    Q = max(q_samples)
    e_from_n = masked_from(chain, chain.absorbing, n, Q)
    e_from_eta = masked_from(chain, chain.absorbing, eta, Q)
    bound = n * eps * eps_half * (1.0 + psi_half)
    diffs = [abs(e_from_n[q] - e_from_eta[q]) for q in q_samples]
    violation = max(d - bound for d in diffs)

    # exact containment per intermediate index
    pair = pair_correlations(chain, n - 1)
    containment_gap = -math.inf
    for i in range(max(eta, 2), n):
        coarse = instantiate(family, i // 2)
        mask = slice_mask(chain, 0, coarse.words)
        upper = correlations_from(chain, chain.absorbing, mask, i)[i]
        containment_gap = max(containment_gap, pair[i] - upper)
    passed = violation <= tol and containment_gap <= tol
    return CheckReport(
        check_id="early_return_bound",
        passed=passed,
        tolerance=tol,
        max_violation=float(max(violation, containment_gap)),
        details={
            "eta": eta, "n": n, "bound": bound,
            "eps_half": eps_half, "psi_half": psi_half,
            "q_samples": list(q_samples),
            "diff_trace": _trace(q_samples, diffs),
            "containment_gap": containment_gap,
        },
    )


def centered_return_bound_check(family, measure: MarkovMeasure, n: int,
                                profile: MixingProfile) -> CheckReport:
    """Correlation bound for centered windows at lags between the return
    time and 2n.

    Long returns (eta >= n+1): compare against the centered sub-window at
    half-width k = eta-n-1 across a gap of one coordinate.  Early returns
    (eta <= n): compare against the prefix/suffix envelopes across a gap of
    floor(eta/2) coordinates.
    """
    window = instantiate(family, n)
    if window.offset != -n or window.length != 2 * n:
        raise ValueError("centered check requires offset -n and window length 2n")
    chain = build_chain(measure, window)
    eps = chain.epsilon
    eta = return_time(window).eta
    i_values = list(range(eta, 2 * n + 1))
    pair = pair_correlations(chain, 2 * n)
    tol = _IDENTITY_TOL
    details: dict = {"eta": eta, "n": n, "i_values": i_values}
    notes: list[str] = []

    if eta >= n + 1:
        k = eta - n - 1
        delta = 1
        details["case"] = "long_return"
        details["decompositions"] = [[kk, eta - n - kk] for kk in range(0, eta - n)]
        details["k"] = k
        details["delta"] = delta
        if k >= 1:
            sub = instantiate(family, k)
            if sub.length != 2 * k:
                raise ValueError("family must stay centered at the sub-index")
            containment_ok = all(w[n - k : n + k] in sub for w in window.words)
            details["containment"] = containment_ok
            if not containment_ok:
                notes.append("centered containment U_n within U_k fails; bound unsupported")
            eps_k = set_measure(measure, sub)
        else:
            eps_k = 1.0
            details["containment"] = True
            notes.append("k = 0: sub-window is the whole space")
        bound = eps * eps_k * (1.0 + profile.value(delta))
        violation = max(pair[i] - bound for i in i_values)
        details["bound"] = bound
        details["pair_trace"] = _trace(i_values, [pair[i] for i in i_values])
        passed = violation <= tol and details.get("containment", True)
        return CheckReport(
            check_id="centered_return_bound", passed=passed, tolerance=tol,
            max_violation=float(violation), details=details, notes=tuple(notes),
        )

    details["case"] = "early_return"
    psi_half = profile.value(eta // 2)
    span = eta // 2 + 1
    sides = {}
    worst = -math.inf
    for side in ("prefix", "suffix"):
        V = envelope(window, eta, side)
        muV = set_measure(measure, V)
        degenerate = V.covers_all_words()
        if degenerate:
            notes.append(f"{side} envelope covers all words: bound vacuous")
        mask = slice_mask(chain, 0 if side == "prefix" else chain.length - span, V.words)
        if side == "prefix":
            lhs = correlations_from(chain, mask, chain.absorbing, 2 * n)
        else:
            lhs = correlations_from(chain, chain.absorbing, mask, 2 * n)
        bound = muV * eps * (1.0 + psi_half)
        viol = max(lhs[i] - bound for i in i_values)
        dominate = max(pair[i] - lhs[i] for i in i_values)
        sides[side] = {
            "mass": muV, "bound": bound, "degenerate": degenerate,
            "violation": float(viol), "envelope_dominates_gap": float(dominate),
        }
        worst = max(worst, viol, dominate)
    details["sides"] = sides
    details["psi_half"] = psi_half
    return CheckReport(
        check_id="centered_return_bound",
        passed=worst <= tol,
        tolerance=tol,
        max_violation=float(worst),
        details=details,
        notes=tuple(notes),
    )
