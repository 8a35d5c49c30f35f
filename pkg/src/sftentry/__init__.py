"""Exact and Monte-Carlo entry-time statistics for subshifts of finite type."""

from . import checks, errors, families, measures, oracle, presets, report, runner, sampling, sft
from .families import (
    ExplicitFamily,
    FixedPointFamily,
    PrefixFamily,
    ReturnTimeRecord,
    SubmatrixFamily,
    WindowSet,
    check_nested,
    envelope,
    family_report,
    instantiate,
    return_time,
)
from .measures import (
    GibbsData,
    LocallyConstantPotential,
    MarkovMeasure,
    MixingProfile,
    bernoulli,
    cylinder_measure,
    gibbs,
    gibbs_bound,
    parry,
    psi_coefficient,
    psi_profile,
    set_measure,
)
from .oracle import (
    CheckReport,
    SurvivalCurve,
    WindowChain,
    build_chain,
    conditional_survival,
    ks_vs_exponential,
    rescaled_law,
    survival,
    survival_curve,
)
from .sampling import EmpiricalLaw, SamplerConfig, dkw_band, ks_statistic, sample_entry_times
from .sft import PerronData, TransitionMatrix, entropy, enumerate_words, perron, validate

__version__ = "0.1.0"
