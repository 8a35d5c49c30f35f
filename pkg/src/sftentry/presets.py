"""Experiment descriptions and the builtin preset registry.

Each preset reproduces one of the worked constructions end to end:
oracle survival curves, Monte-Carlo comparison, hypothesis checks, and
identity diagnostics, all with pinned seeds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import families, measures, sft
from .families import (
    FixedPointFamily,
    PrefixFamily,
    SubmatrixFamily,
    anchored_stream_family,
    block_return_family,
    named_stream,
    union_of_points_family,
)
from .measures import LocallyConstantPotential, bernoulli, gibbs, parry


@dataclass
class Experiment:
    """Fully resolved experiment description (deterministic given fields)."""

    name: str
    system: sft.TransitionMatrix
    system_label: str
    measure: measures.MarkovMeasure
    measure_label: str
    family: object | None
    family_label: str
    n_values: tuple[int, ...]
    seed: int = 20160401
    trials: int = 100_000
    max_steps: int = 0          # 0: auto, ceil(12 / eps)
    workers: int = 1
    mc_min_epsilon: float = 1e-4
    tail_threshold: float = 1e-4
    horizon_cap: int = 5_000_000
    checks: tuple[str, ...] = ()
    diagnostics: bool = True
    emit_trials: bool = False
    figures: bool = True
    special: str | None = None
    extras: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "Experiment":
        return replace(self, **kw)


def _uniform3() -> measures.MarkovMeasure:
    return bernoulli([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])


def _submatrix_potential(base: sft.TransitionMatrix) -> LocallyConstantPotential:
    rng = np.random.default_rng(74250273)
    vals = rng.uniform(-0.1, 0.1, size=(base.size, base.size))
    return LocallyConstantPotential(base=base, values=vals)


def _grown_period(n: int) -> int:
    return n + math.ceil(n / 2) + 1


def _slow_period(n: int) -> int:
    return int(math.floor(math.log2(n))) + math.ceil(n / 4)


def preset_bernoulli_prefix() -> Experiment:
    full3 = sft.full_shift(3)
    return Experiment(
        name="bernoulli-prefix",
        system=full3, system_label="full3",
        measure=_uniform3(), measure_label="bernoulli:1/3,1/3,1/3",
        family=PrefixFamily(base=full3, head=0, tail=(1, 2)),
        family_label="prefix:0:12",
        n_values=tuple(range(2, 13)),
        checks=("basic", "shrinking"),
    )


def preset_submatrix_gibbs() -> Experiment:
    full3 = sft.full_shift(3)
    pot = _submatrix_potential(full3)
    g = gibbs(full3, pot)
    return Experiment(
        name="submatrix-gibbs",
        system=full3, system_label="full3",
        measure=g.measure, measure_label="gibbs:seeded-uniform(+-0.1)",
        family=SubmatrixFamily(base=full3, block_symbols=(0, 1), entry=2),
        family_label="submatrix:2:01",
        n_values=tuple(range(2, 11)),
        checks=("basic",),
        extras={"potential": pot, "gibbs": g, "block_symbols": (0, 1)},
        special="submatrix_gap",
    )


def preset_golden_cylinders() -> Experiment:
    golden = sft.golden_mean()
    return Experiment(
        name="golden-cylinders",
        system=golden, system_label="golden",
        measure=parry(golden), measure_label="parry",
        family=FixedPointFamily(base=golden, stream=named_stream("sturmian2")),
        family_label="fixed:sturmian2:one_sided",
        n_values=tuple(range(2, 13)),
        checks=("shrinking",),
    )


def preset_golden_two_points() -> Experiment:
    golden = sft.golden_mean()
    fam = union_of_points_family(
        golden, [named_stream("sturmian2"), named_stream("sturmian5")],
        range(2, 11), name="two-points",
    )
    return Experiment(
        name="golden-two-points",
        system=golden, system_label="golden",
        measure=parry(golden), measure_label="parry",
        family=fam, family_label="explicit:two-points",
        n_values=tuple(range(2, 11)),
        checks=("shrinking",),
    )


def preset_slow_return_blocks() -> Experiment:
    full2 = sft.full_shift(2)
    fam = block_return_family(full2, range(8, 14), _slow_period, name="slow-blocks")
    return Experiment(
        name="slow-return-blocks",
        system=full2, system_label="full2",
        measure=bernoulli([0.5, 0.5]), measure_label="bernoulli:1/2,1/2",
        family=fam, family_label="explicit:slow-blocks",
        n_values=tuple(range(8, 14)),
        checks=(),
        extras={"expected_eta": {n: _slow_period(n) for n in range(8, 14)}},
    )


def preset_periodic_counterexample() -> Experiment:
    full2 = sft.full_shift(2)
    return Experiment(
        name="periodic-counterexample",
        system=full2, system_label="full2",
        measure=bernoulli([0.5, 0.5]), measure_label="bernoulli:1/2,1/2",
        family=FixedPointFamily(base=full2, stream=named_stream("0")),
        family_label="fixed:0:one_sided",
        n_values=tuple(range(2, 11)),
        checks=("basic", "shrinking"),
    )


def preset_centered_anchored_stream() -> Experiment:
    golden = sft.golden_mean()
    fam = anchored_stream_family(golden, named_stream("sturmian2"), range(2, 9), name="anchored-sturmian2")
    return Experiment(
        name="centered-anchored-stream",
        system=golden, system_label="golden",
        measure=parry(golden), measure_label="parry",
        family=fam, family_label="explicit:anchored-sturmian2",
        n_values=tuple(range(2, 9)),
        checks=("centered",),
    )


def preset_centered_grown_return() -> Experiment:
    full2 = sft.full_shift(2)
    fam = block_return_family(full2, range(2, 7), _grown_period, name="grown-blocks", anchor="centered")
    return Experiment(
        name="centered-grown-return",
        system=full2, system_label="full2",
        measure=bernoulli([0.5, 0.5]), measure_label="bernoulli:1/2,1/2",
        family=fam, family_label="explicit:grown-blocks",
        n_values=tuple(range(2, 7)),
        checks=("centered",),
        extras={"expected_eta": {n: _grown_period(n) for n in range(2, 7)}},
    )


def preset_centered_envelope() -> Experiment:
    golden = sft.golden_mean()
    return Experiment(
        name="centered-envelope",
        system=golden, system_label="golden",
        measure=parry(golden), measure_label="parry",
        family=FixedPointFamily(base=golden, stream=named_stream("sturmian2"), anchor="centered"),
        family_label="fixed:sturmian2:centered",
        n_values=tuple(range(2, 9)),
        checks=("centered",),
    )


def preset_gibbs_bound_suite() -> Experiment:
    full2 = sft.full_shift(2)
    return Experiment(
        name="gibbs-bound-suite",
        system=full2, system_label="full2+golden",
        measure=bernoulli([0.5, 0.5]), measure_label="(per-instance gibbs states)",
        family=None, family_label="prefix+fixed per system",
        n_values=tuple(range(2, 9)),
        trials=0, figures=False, diagnostics=False,
        special="gibbs_bounds",
        extras={"seeds": tuple(range(10)), "raw_scale": 0.25},
    )


def preset_fault_injection_suite() -> Experiment:
    full2 = sft.full_shift(2)
    return Experiment(
        name="fault-injection-suite",
        system=full2, system_label="full2+golden",
        measure=bernoulli([0.5, 0.5]), measure_label="(per-instance)",
        family=None, family_label="(per-instance)",
        n_values=(),
        trials=0, figures=False, diagnostics=False,
        special="fault_injection",
    )


PRESETS = {
    "bernoulli-prefix": (preset_bernoulli_prefix,
                         "full 3-shift, uniform product measure, head-0 tail-{1,2} prefix family"),
    "submatrix-gibbs": (preset_submatrix_gibbs,
                        "full 3-shift Gibbs state, entry symbol over the {0,1} block, gap test"),
    "golden-cylinders": (preset_golden_cylinders,
                         "golden mean, maximal-entropy chain, cylinders of an aperiodic point"),
    "golden-two-points": (preset_golden_two_points,
                          "golden mean, union of two point-cylinder families (not a single point)"),
    "slow-return-blocks": (preset_slow_return_blocks,
                           "full 2-shift uniform, single blocks with return time log2(n)+ceil(n/4)"),
    "periodic-counterexample": (preset_periodic_counterexample,
                                "full 2-shift uniform, cylinders of the all-zeros point (law stays off exponential)"),
    "centered-anchored-stream": (preset_centered_anchored_stream,
                                 "centered windows anchored to a stream's left edge (nesting route)"),
    "centered-grown-return": (preset_centered_grown_return,
                              "centered blocks with return time n + ceil(n/2) + 1 (grown-return route)"),
    "centered-envelope": (preset_centered_envelope,
                          "centered cylinders of an aperiodic point (envelope route)"),
    "gibbs-bound-suite": (preset_gibbs_bound_suite,
                          "pressure bound over seeded random potentials on full2 and golden"),
    "fault-injection-suite": (preset_fault_injection_suite,
                              "kernel perturbation and weakened-mixing injections; detection table"),
}


def get_preset(name: str) -> Experiment:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; try list-presets")
    return PRESETS[name][0]()


def list_presets() -> list[tuple[str, str]]:
    return [(name, doc) for name, (_, doc) in PRESETS.items()]
