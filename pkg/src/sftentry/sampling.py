"""Seeded Monte-Carlo sampling of entry times.

Reproducibility contract (bit-exact, platform-independent):

* every trial ``i`` owns a private splitmix64 stream whose initial state is
  ``mix64(seed + i * C)`` computed in wrapping 64-bit arithmetic, with
  ``C = 0x9E3779B97F4A7C15`` and ``mix64`` the splitmix64 output map

      z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;
      z ^= z >> 27;  z *= 0x94D049BB133111EB;
      z ^= z >> 31;

* each draw advances the state by ``C`` and returns ``mix64(state)``;
  uniforms take the top 53 bits scaled by 2**-53.

Identical configurations therefore produce identical samples regardless of
chunking or worker count: workers only split the trial range.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import AllCensored, EmptySample
from .families import WindowSet
from .measures import MarkovMeasure
from .oracle import SurvivalCurve, WindowChain, build_chain

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_U53 = 2.0**-53


@dataclass(frozen=True)
class SamplerConfig:
    """Deterministic sampler parameters; see the module docstring for the
    exact stream derivation."""

    seed: int
    trials: int
    max_steps: int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


@dataclass
class EmpiricalLaw:
    """Entry times from seeded trials; ``taus`` is indexed by trial, with 0
    marking a censored trial (the cap was hit before entry)."""

    epsilon: float
    taus: np.ndarray
    censored: int
    config: SamplerConfig

    @property
    def trials(self) -> int:
        return len(self.taus)

    def sample(self) -> np.ndarray:
        """Sorted uncensored rescaled values x = eps * tau."""
        ok = self.taus > 0
        if not ok.any():
            raise EmptySample("all trials censored")
        return np.sort(self.epsilon * self.taus[ok].astype(float))


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _derive_states(seed: int, lo: int, hi: int) -> np.ndarray:
    idx = np.arange(lo, hi, dtype=np.uint64)
    base = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    return _mix64(base + idx * _GOLDEN)


def _draw(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    states = states + _GOLDEN
    z = _mix64(states)
    return states, (z >> _S11).astype(np.float64) * _U53


def _successor_tables(chain: WindowChain) -> tuple[np.ndarray, np.ndarray]:
    """Per-state successor indices and cumulative probabilities, padded; the
    last live column is pinned to 1.0 so a uniform can never fall off."""
    A = chain.measure.base
    a = A.size
    N = chain.states
    keys = chain.keys
    last = (keys % a).astype(int)
    tail_mod = a ** (chain.length - 1)
    succ = np.zeros((N, a), dtype=np.int64)
    prob = np.zeros((N, a), dtype=np.float64)
    col = np.zeros(N, dtype=np.int64)
    for c in range(a):  # ascending symbol keeps successor columns sorted
        ok = np.nonzero(A.entries[last, c] == 1)[0]
        if len(ok) == 0:
            continue
        dst = np.searchsorted(keys, (keys[ok] % tail_mod) * a + c)
        succ[ok, col[ok]] = dst
        prob[ok, col[ok]] = chain.measure.kernel[last[ok], c]
        col[ok] += 1
    cum = np.cumsum(prob, axis=1)
    cum[np.arange(N), col - 1] = 1.0
    cum = np.maximum.accumulate(cum, axis=1)
    return succ, cum


def _run_chunk(chain, succ, cum, rho_cum, seed, lo, hi, max_steps):
    with np.errstate(over="ignore"):
        states = _derive_states(seed, lo, hi)
        states, u = _draw(states)
        cur = np.searchsorted(rho_cum, u, side="right")
        taus = np.zeros(hi - lo, dtype=np.int64)
        alive = np.arange(hi - lo)
        absorbing = chain.absorbing
        for step in range(1, max_steps + 1):
            states, u = _draw(states)
            choice = (u[:, None] >= cum[cur]).sum(axis=1)
            cur = succ[cur, choice]
            hit = absorbing[cur]
            if hit.any():
                taus[alive[hit]] = step
                keep = ~hit
                alive = alive[keep]
                cur = cur[keep]
                states = states[keep]
                if len(alive) == 0:
                    break
        return taus


def sample_entry_times(measure: MarkovMeasure, window: WindowSet, cfg: SamplerConfig,
                       chain: WindowChain | None = None, workers: int = 1) -> EmpiricalLaw:
    """Entry times of seeded stationary trials.

    Each trial draws its initial window exactly from the stationary window
    law (no burn-in) and then walks the window chain, reporting the first
    step whose window lies in the target.  Trials hitting ``max_steps`` are
    censored, never imputed.
    """
    if chain is None:
        chain = build_chain(measure, window)
    eps = chain.epsilon
    if cfg.max_steps < 10.0 / eps:
        warnings.warn(
            f"max_steps={cfg.max_steps} is below the recommended 10/eps = {10.0 / eps:.0f}",
            stacklevel=2,
        )
    succ, cum = _successor_tables(chain)
    rho_cum = np.cumsum(chain.rho)
    rho_cum[-1] = max(rho_cum[-1], 1.0)

    chunk = 1 << 16
    bounds = [(lo, min(lo + chunk, cfg.trials)) for lo in range(0, cfg.trials, chunk)]
    run = lambda b: _run_chunk(chain, succ, cum, rho_cum, cfg.seed, b[0], b[1], cfg.max_steps)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    taus = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
    censored = int((taus == 0).sum())
    if censored == cfg.trials:
        raise AllCensored(f"every trial hit the cap {cfg.max_steps}; raise max_steps")
    return EmpiricalLaw(epsilon=eps, taus=taus, censored=censored, config=cfg)


def dkw_band(trials: int, confidence: float) -> float:
    """Half-width of the distribution-free confidence envelope for an ECDF:
    sqrt(ln(2 / (1 - confidence)) / (2 * trials))."""
    if not (0.0 < confidence < 1.0):
        raise ValueError("confidence must be inside (0, 1)")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * trials))


def ks_statistic(law: EmpiricalLaw, reference) -> float:
    """Sup distance between the ECDF of the rescaled sample and a reference.

    ``reference`` is either the string ``"exp1"`` (unit exponential) or a
    :class:`SurvivalCurve`.  Censored trials are excluded from the ECDF (and
    carried separately in the law); the supremum is exact, including the
    left limits at the jump points.
    """
    xs = law.sample()
    m = len(xs)
    total = law.trials  # censored mass sits above every evaluated grid point
    if isinstance(reference, SurvivalCurve):
        # compare on the integer grid of the curve, up to the largest tau
        taus = np.sort(law.taus[law.taus > 0])
        qmax = int(taus[-1])
        if qmax > reference.horizon:
            raise ValueError("survival curve horizon shorter than the largest sample")
        counts = np.bincount(taus, minlength=qmax + 1)
        ecdf = np.cumsum(counts)[: qmax + 1] / total
        exact_cdf = 1.0 - reference.values[: qmax + 1]
        return float(np.max(np.abs(ecdf - exact_cdf)))
    if reference == "exp1":
        F = 1.0 - np.exp(-xs)
        hi = np.arange(1, m + 1) / total
        lo = np.arange(0, m) / total
        return float(max(np.max(np.abs(hi - F)), np.max(np.abs(lo - F))))
    raise ValueError("reference must be 'exp1' or a SurvivalCurve")
