"""
End-to-end experiments driven by an :class:`~driftlab.config.ExperimentConfig`.

Every run writes its tables and particle clouds to the output directory,
appends metrics to ``metrics.jsonl``, and finishes with ``manifest.json``,
which echoes the configuration and lists every output. Given the same
configuration, every output is byte-identical across runs except for the
wall time recorded in the manifest.

"""

from __future__ import annotations

import dataclasses
import logging
import pathlib
import platform
import time
from collections.abc import Iterable, Sequence
from typing import Any, Callable

import numpy as np
import scipy
from scipy.stats import linregress

from . import artifacts
from .config import (
    ExperimentConfig,
    ExperimentKind,
    LandscapeSection,
    ParticleFlowSection,
    ScheduleAblationSection,
    SpectralSection,
    TrainSection,
    VerifyScoreSection,
)
from .drift import DriftField, score_identity_sweep
from .flow import particle_flow
from .generator import MlpGenerator, mlp_forward
from .landscape import landscape_scan
from .metrics import MetricReport
from .spectral import (
    CURVE_DT,
    DecayRateSpec,
    analytic_convergence_time,
    annealing_bound,
    decay_rate,
    gaussian_cutoff,
    schedule_ablation,
    schedule_curve,
    simulate_mode_decay,
)
from .targets import (
    GaussianMixture,
    IsotropicGaussian,
    ParticleSet,
    get_target,
    probe_grid,
    sample_gmm,
)
from .training import (
    KERNEL,
    SINKHORN,
    DriftBackend,
    TrainRecord,
    TrainResult,
    train,
)
from .utils import spawn_seeds
from .version import version as driftlab_version


__all__ = ["Run", "run"]


logger = logging.getLogger(__name__)


class Run:
    """
    Output directory of one experiment.

    Keeps track of the files written so that the manifest can list them.

    """

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.out = config.out
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.metrics_path = self.out / "metrics.jsonl"
        self.metrics_path.write_text("", encoding="utf-8")
        self.summary: dict[str, Any] = {}

    def path(self, name: str) -> pathlib.Path:
        if name not in self.outputs:
            self.outputs.append(name)
        return self.out / name

    def _wrote(self, path: pathlib.Path) -> None:
        logger.info("wrote %s", path)

    def table(
        self,
        name: str,
        columns: Sequence[str],
        rows: Iterable[Sequence[Any]],
    ) -> None:
        self._wrote(artifacts.write_csv(self.path(name), columns, rows))

    def particles(self, name: str, particles: ParticleSet) -> None:
        self._wrote(artifacts.write_particles(self.path(name), particles))

    def drift_field(self, name: str, field: DriftField) -> None:
        self._wrote(artifacts.write_drift_field(self.path(name), field))

    def json(self, name: str, data: dict[str, Any]) -> None:
        self._wrote(artifacts.write_json(self.path(name), data))

    def metric(self, report: MetricReport) -> None:
        report.append_to(self.metrics_path)

    def manifest(self, wall_time: float) -> pathlib.Path:
        manifest = {
            "config": self.config.to_json(),
            "seed": self.config.seed,
            "versions": {
                "driftlab": driftlab_version,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "outputs": ["metrics.jsonl"] + self.outputs,
            "summary": self.summary,
            "wall_time": wall_time,
        }
        return artifacts.write_json(self.out / "manifest.json", manifest)


def _verify_score(run: Run, section: VerifyScoreSection) -> None:
    probe_seed, sample_seed = spawn_seeds(run.config.seed, 2)
    p = GaussianMixture.default_four_mode(section.component_std)
    q = IsotropicGaussian.standard(section.q_std, p.dim)
    probes = sample_gmm(p, section.n_probes, probe_seed)
    reports = score_identity_sweep(
        p, q, section.sigmas, section.n_samples, probes, sample_seed
    )
    run.table(
        "score_errors.csv",
        ["sigma", "mean_error", "max_error"],
        [(r.sigma, r.mean_error, r.max_error) for r in reports],
    )
    run.json("score_report.json", {"reports": [r.to_json() for r in reports]})
    for report in reports:
        run.metric(
            MetricReport(
                "score_identity_mean_error", report.mean_error, report.n_samples
            )
        )

    grid = probe_grid(-2.0, 2.0, section.grid_n, p.dim)
    grid_reports = score_identity_sweep(
        p, q, section.sigmas, section.n_samples, grid, sample_seed
    )
    for report in grid_reports:
        label = f"{report.sigma:g}"
        run.drift_field(f"drift_field_sigma_{label}.csv", report.empirical)
        run.drift_field(
            f"analytic_field_sigma_{label}.csv",
            DriftField(report.empirical.probe_points, report.analytic),
        )
    run.summary["mean_error"] = {f"{r.sigma:g}": r.mean_error for r in reports}


def _spectral(run: Run, section: SpectralSection) -> None:
    modes = np.arange(1, section.k_max + 1, dtype=np.float64)
    specs = {
        "gaussian": DecayRateSpec.gaussian(section.sigma),
        "laplacian": DecayRateSpec.laplacian(section.tau),
    }
    record_every = max(1, int(round(section.curve_step / CURVE_DT)))
    worst: dict[str, float] = {}
    for name, spec in specs.items():
        result = simulate_mode_decay(
            spec,
            modes,
            amplitude=section.amplitude,
            eps=section.eps,
            dt=CURVE_DT,
            t_max=section.t_max,
            record_every=record_every,
            record_until=section.curve_horizon,
        )
        analytic = np.asarray(analytic_convergence_time(spec, modes, section.eps))
        run.table(
            f"decay_times_{name}.csv",
            ["k", "measured", "analytic"],
            zip(modes, result.times, analytic),
        )
        run.table(
            f"total_error_{name}.csv",
            ["t", "total_error"],
            zip(result.curve_times, result.total_error),
        )
        converged = result.converged
        if np.any(converged):
            gap = np.abs(result.times[converged] / analytic[converged] - 1.0)
            worst[name] = float(np.max(gap))

    wavenumbers = np.linspace(0.05, float(section.k_max), 400)
    rates = {
        name: np.asarray(decay_rate(spec, wavenumbers))
        for name, spec in specs.items()
    }
    run.table(
        "decay_rates.csv",
        ["k", *rates],
        zip(wavenumbers, *rates.values()),
    )
    run.summary["relative_time_error"] = worst
    run.summary["gaussian_cutoff"] = gaussian_cutoff(section.sigma)
    run.summary["gaussian_rate_argmax"] = float(
        wavenumbers[np.argmax(rates["gaussian"])]
    )


def _schedule_ablation(run: Run, section: ScheduleAblationSection) -> None:
    schedules = section.schedules()
    modes = np.arange(1, section.k_max + 1, dtype=np.float64)
    result = schedule_ablation(
        schedules,
        modes,
        section.eps,
        amplitude=section.amplitude,
        t_max=section.t_max,
        curve_step=section.curve_step,
        curve_horizon=section.curve_horizon,
    )
    exponential = schedules["exponential"]
    assert exponential.rate is not None
    bounds = [
        annealing_bound(
            section.sigma0, section.sigma_min, exponential.rate, k, section.eps
        )
        for k in modes
    ]
    names = list(schedules)
    columns = ["k", *names, *(f"{name}_analytic" for name in names), "bound"]
    rows = zip(
        modes,
        *(result.simulations[name].times for name in names),
        *(result.analytic[name] for name in names),
        bounds,
    )
    run.table("ablation_times.csv", columns, rows)
    for name in names:
        simulation = result.simulations[name]
        run.table(
            f"ablation_curve_{name}.csv",
            ["t", "total_error"],
            zip(simulation.curve_times, simulation.total_error),
        )
    horizon = 1.2 * max(section.horizon, section.sweep_time)
    times = np.linspace(0.0, horizon, 601)
    run.table(
        "bandwidth_schedules.csv",
        ["t", *names],
        zip(times, *(schedule_curve(schedules[name], times) for name in names)),
    )

    measured = result.simulations["exponential"].times
    fit = linregress(np.log(modes), measured) if len(modes) > 2 else None
    run.summary["speedup_linear"] = result.speedup("linear", "exponential", modes[-1])
    run.summary["speedup_cosine"] = result.speedup("cosine", "exponential", modes[-1])
    run.summary["within_bound"] = bool(np.all(measured <= np.asarray(bounds)))
    if fit is not None:
        run.summary["log_k_r_squared"] = float(fit.rvalue**2)


def _train_once(
    run: Run,
    section: TrainSection,
    backend: DriftBackend,
    prefix: str = "",
) -> TrainResult:
    config = section.train_config(backend)
    sampler = get_target(section.target)
    train_seed, snapshot_seed = spawn_seeds(run.config.seed, 2)
    snapshot_noise = np.random.default_rng(snapshot_seed).standard_normal(
        (section.sw_samples, config.noise_dim)
    )

    def on_record(record: TrainRecord, generator: MlpGenerator) -> None:
        for name in ["mean_drift_norm", "sliced_wasserstein"]:
            run.metric(
                MetricReport(
                    f"{prefix}{name}",
                    getattr(record, name),
                    config.sw_samples,
                    config.sw_projections if name == "sliced_wasserstein" else 0,
                    step=record.step,
                )
            )
        every = section.snapshot_every
        if every and record.step % every == 0:
            particles = ParticleSet(mlp_forward(generator, snapshot_noise))
            run.particles(f"{prefix}particles_step_{record.step}.csv", particles)

    result = train(
        config,
        sampler,
        train_seed,
        logger=logging.getLogger("driftlab.training"),
        on_record=on_record,
        checkpoint_dir=run.out / f"{prefix}checkpoints",
    )
    run.path(f"{prefix}checkpoints/final.bin")
    run.table(f"{prefix}history.csv", result.history.columns, result.history.rows())
    final = ParticleSet(mlp_forward(result.generator, snapshot_noise))
    run.particles(f"{prefix}particles_final.csv", final)
    run.particles(f"{prefix}target_samples.csv", result.eval_targets)
    run.summary[f"{prefix}final"] = dataclasses.asdict(result.history.final)
    return result


def _landscape(run: Run, section: LandscapeSection) -> None:
    # The first two streams are those of _train_once.
    data_seed, scan_seed = spawn_seeds(run.config.seed, 4)[2:]
    sampler = get_target(section.train.target)
    for mode in section.loss_modes:
        prefix = f"{mode.replace('-', '_')}_"
        train_section = dataclasses.replace(section.train, loss_mode=mode)
        result = _train_once(run, train_section, KERNEL, prefix)
        config = result.config
        n_eval = min(section.n_eval, len(result.eval_noise))
        scan = landscape_scan(
            result.generator,
            result.gradient_snapshots,
            result.eval_noise[:n_eval],
            sampler(n_eval, data_seed),
            result.eval_targets.points[:n_eval],
            config.kernels_at(config.steps),
            eta=config.eta,
            grid_half_width=section.grid_half_width,
            grid_n=section.grid_n,
            n_proj=section.n_proj,
            seed=scan_seed,
        )
        run.table(f"{prefix}landscape.csv", scan.columns, scan.rows())
        run.json(f"{prefix}landscape.json", scan.to_json())
        i, j = scan.argmin_loss()
        distances = scan.sliced_wasserstein
        run.summary[f"{prefix}argmin_sw_quantile"] = float(
            np.mean(distances <= distances[i, j])
        )


def _particle_flow(run: Run, section: ParticleFlowSection) -> None:
    initial_seed, data_seed, flow_seed = spawn_seeds(run.config.seed, 3)
    sampler = get_target(section.target)
    p_samples = sampler(section.n_particles, data_seed)
    start = IsotropicGaussian.standard(section.initial_std, p_samples.dim)
    initial = start.sample(section.n_particles, initial_seed)
    history = particle_flow(
        initial,
        p_samples,
        section.kernel,
        section.step,
        section.n_steps,
        schedule=section.schedule,
        extra_kernels=section.extra_kernels,
        record_every=section.record_every,
        n_proj=section.n_proj,
        seed=flow_seed,
    )
    run.table(
        "flow_history.csv",
        ["step", "time", "bandwidth", "mean_drift_norm", "sliced_wasserstein"],
        [dataclasses.astuple(record) for record in history.records],
    )
    every = section.snapshot_every
    for record, snapshot in zip(history.records, history.snapshots):
        if every and record.step % every == 0:
            run.particles(f"flow_particles_step_{record.step}.csv", snapshot)
        run.metric(
            MetricReport(
                "sliced_wasserstein",
                record.sliced_wasserstein,
                section.n_particles,
                section.n_proj,
                step=record.step,
            )
        )
    run.particles("flow_particles_final.csv", history.final)
    run.particles("target_samples.csv", p_samples)
    run.summary["final"] = dataclasses.asdict(history.records[-1])


def _runner(config: ExperimentConfig) -> Callable[[Run], None]:
    section: Any = config.section
    kind = config.experiment
    if kind is ExperimentKind.VERIFY_SCORE:
        return lambda run: _verify_score(run, section)
    elif kind is ExperimentKind.SPECTRAL:
        return lambda run: _spectral(run, section)
    elif kind is ExperimentKind.SCHEDULE_ABLATION:
        return lambda run: _schedule_ablation(run, section)
    elif kind is ExperimentKind.TRAIN:
        return lambda run: _train_once(run, section, KERNEL)
    elif kind is ExperimentKind.SINKHORN_TRAIN:
        return lambda run: _train_once(run, section, SINKHORN)
    elif kind is ExperimentKind.LANDSCAPE:
        return lambda run: _landscape(run, section)
    elif kind is ExperimentKind.PARTICLE_FLOW:
        return lambda run: _particle_flow(run, section)
    else:  # pragma: no cover
        raise AssertionError(f"unexpected experiment: {kind}")


def run(config: ExperimentConfig) -> pathlib.Path:
    """
    Run an experiment and write its outputs.

    Returns:
        Path of the manifest.

    Raises:
        NonFiniteLoss: If training diverges. A snapshot of the generator is
            saved under the output directory first.

    """
    start = time.perf_counter()
    logger.info(
        "running %s with seed %d into %s",
        config.experiment.value,
        config.seed,
        config.out,
    )
    output = Run(config)
    _runner(config)(output)
    wall_time = time.perf_counter() - start
    path = output.manifest(wall_time)
    logger.info(
        "%s done in %.1f s; %d outputs",
        config.experiment.value,
        wall_time,
        len(output.outputs),
    )
    return path
