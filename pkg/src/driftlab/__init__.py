from __future__ import annotations

import typing

from .imports import lazy_import
from .version import version as __version__  # noqa: F401


__all__ = [
    # .config
    "ExperimentConfig",
    "ExperimentKind",
    "load_config",
    "parse_config",
    # .drift
    "DensityGrid",
    "DriftField",
    "drift_field",
    "mean_shift_drift",
    "multiscale_drift",
    "multiscale_drift_field",
    "score_identity_sweep",
    "smoothed_kl",
    "verify_score_identity",
    # .exceptions
    "ConfigError",
    "ConfigParseError",
    "DimensionMismatch",
    "DriftlabError",
    "InsufficientData",
    "InvalidConfigField",
    "InvalidParameter",
    "MisalignedGrids",
    "NonFiniteLoss",
    "NumericalError",
    "SchemaError",
    "ShapeMismatch",
    "UnequalSampleCounts",
    "UnsupportedBackend",
    "UsageError",
    # .experiments
    "run",
    # .flow
    "FlowHistory",
    "particle_flow",
    # .generator
    "MlpGenerator",
    "adam_step",
    "mlp_forward",
    # .kernels
    "BandwidthSchedule",
    "Family",
    "KernelSpec",
    "ScheduleKind",
    "kernel_eval",
    "kernel_fourier",
    "schedule_sigma",
    # .landscape
    "LandscapeScan",
    "landscape_scan",
    "principal_directions",
    # .metrics
    "MetricReport",
    "sliced_wasserstein",
    # .plots
    "PlotKind",
    "emit_svg",
    # .spectral
    "analytic_convergence_time",
    "annealing_bound",
    "decay_rate",
    "schedule_ablation",
    "simulate_mode_decay",
    # .targets
    "GaussianMixture",
    "IsotropicGaussian",
    "ParticleSet",
    "get_target",
    "probe_grid",
    # .training
    "DriftBackend",
    "LossMode",
    "TrainConfig",
    "TrainHistory",
    "TrainResult",
    "train",
    # .transport
    "sinkhorn_divergence",
    "sinkhorn_drift",
    "sinkhorn_plan",
    # .typing
    "LoggerLike",
]

# When type checking, import eagerly. Else, import on demand.
if typing.TYPE_CHECKING:
    from .config import ExperimentConfig, ExperimentKind, load_config, parse_config
    from .drift import (
        DensityGrid,
        DriftField,
        drift_field,
        mean_shift_drift,
        multiscale_drift,
        multiscale_drift_field,
        score_identity_sweep,
        smoothed_kl,
        verify_score_identity,
    )
    from .exceptions import (
        ConfigError,
        ConfigParseError,
        DimensionMismatch,
        DriftlabError,
        InsufficientData,
        InvalidConfigField,
        InvalidParameter,
        MisalignedGrids,
        NonFiniteLoss,
        NumericalError,
        SchemaError,
        ShapeMismatch,
        UnequalSampleCounts,
        UnsupportedBackend,
        UsageError,
    )
    from .experiments import run
    from .flow import FlowHistory, particle_flow
    from .generator import MlpGenerator, adam_step, mlp_forward
    from .kernels import (
        BandwidthSchedule,
        Family,
        KernelSpec,
        ScheduleKind,
        kernel_eval,
        kernel_fourier,
        schedule_sigma,
    )
    from .landscape import LandscapeScan, landscape_scan, principal_directions
    from .metrics import MetricReport, sliced_wasserstein
    from .plots import PlotKind, emit_svg
    from .spectral import (
        analytic_convergence_time,
        annealing_bound,
        decay_rate,
        schedule_ablation,
        simulate_mode_decay,
    )
    from .targets import (
        GaussianMixture,
        IsotropicGaussian,
        ParticleSet,
        get_target,
        probe_grid,
    )
    from .training import (
        DriftBackend,
        LossMode,
        TrainConfig,
        TrainHistory,
        TrainResult,
        train,
    )
    from .transport import sinkhorn_divergence, sinkhorn_drift, sinkhorn_plan
    from .typing import LoggerLike
else:
    lazy_import(
        globals(),
        aliases={
            # .config
            "ExperimentConfig": ".config",
            "ExperimentKind": ".config",
            "load_config": ".config",
            "parse_config": ".config",
            # .drift
            "DensityGrid": ".drift",
            "DriftField": ".drift",
            "drift_field": ".drift",
            "mean_shift_drift": ".drift",
            "multiscale_drift": ".drift",
            "multiscale_drift_field": ".drift",
            "score_identity_sweep": ".drift",
            "smoothed_kl": ".drift",
            "verify_score_identity": ".drift",
            # .exceptions
            "ConfigError": ".exceptions",
            "ConfigParseError": ".exceptions",
            "DimensionMismatch": ".exceptions",
            "DriftlabError": ".exceptions",
            "InsufficientData": ".exceptions",
            "InvalidConfigField": ".exceptions",
            "InvalidParameter": ".exceptions",
            "MisalignedGrids": ".exceptions",
            "NonFiniteLoss": ".exceptions",
            "NumericalError": ".exceptions",
            "SchemaError": ".exceptions",
            "ShapeMismatch": ".exceptions",
            "UnequalSampleCounts": ".exceptions",
            "UnsupportedBackend": ".exceptions",
            "UsageError": ".exceptions",
            # .experiments
            "run": ".experiments",
            # .flow
            "FlowHistory": ".flow",
            "particle_flow": ".flow",
            # .generator
            "MlpGenerator": ".generator",
            "adam_step": ".generator",
            "mlp_forward": ".generator",
            # .kernels
            "BandwidthSchedule": ".kernels",
            "Family": ".kernels",
            "KernelSpec": ".kernels",
            "ScheduleKind": ".kernels",
            "kernel_eval": ".kernels",
            "kernel_fourier": ".kernels",
            "schedule_sigma": ".kernels",
            # .landscape
            "LandscapeScan": ".landscape",
            "landscape_scan": ".landscape",
            "principal_directions": ".landscape",
            # .metrics
            "MetricReport": ".metrics",
            "sliced_wasserstein": ".metrics",
            # .plots
            "PlotKind": ".plots",
            "emit_svg": ".plots",
            # .spectral
            "analytic_convergence_time": ".spectral",
            "annealing_bound": ".spectral",
            "decay_rate": ".spectral",
            "schedule_ablation": ".spectral",
            "simulate_mode_decay": ".spectral",
            # .targets
            "GaussianMixture": ".targets",
            "IsotropicGaussian": ".targets",
            "ParticleSet": ".targets",
            "get_target": ".targets",
            "probe_grid": ".targets",
            # .training
            "DriftBackend": ".training",
            "LossMode": ".training",
            "TrainConfig": ".training",
            "TrainHistory": ".training",
            "TrainResult": ".training",
            "train": ".training",
            # .transport
            "sinkhorn_divergence": ".transport",
            "sinkhorn_drift": ".transport",
            "sinkhorn_plan": ".transport",
            # .typing
            "LoggerLike": ".typing",
        },
    )
