"""Ensemble simulation of the pulsed-interferometry experiment.

Each experimental cycle draws one quasi-static noise realization: a
light-shift detuning sample (inhomogeneous broadening across the atom
ensemble) and one vector of per-interval detuning jumps (homogeneous noise
within a sequence).  The Bloch vector is evolved through the pulse train at
the effective detuning

    delta_eff = delta_set - zeeman_shift - delta_lightshift,

the readout fraction is (1 - contrast*w)/2, and finite measurement
statistics are emulated by drawing successes from a binomial with
``cycles_per_point`` trials.

The per-draw evolution exists in two forms: ``simulate_point`` goes through
the bloch module one draw at a time, and the vectorized kernel used by
``ensemble_probability`` applies the same pulse maps to whole batches.  Tests
pin the two routes together.

Reproducibility contract: every time-grid point derives its own random
substream from ``(rng_seed, point index)``, so datasets are bit-identical
across runs and across worker counts.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import fraction_from_w
from .bloch import SegmentDetunings, SequenceSpec, evolve_cpmg_perturbed, free_precession, rotate_pi_half
from .bloch import INITIAL_STATE
from .errors import DataFormatError, DomainError, FitError
from .fit import fit_fringe, points_from_counts
from .noise import (
    T2_STAR_PER_ETA,
    HomogeneousNoiseSpec,
    LightShiftDistribution,
    lightshift_sample,
    sample_detuning_differences,
)

__all__ = [
    "ExperimentConfig",
    "FringeDataset",
    "VisibilityPoint",
    "simulate_point",
    "ensemble_probability",
    "simulate_dataset",
    "binomial_dataset",
    "scan_visibility",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to synthesize one dataset.

    Parameters
    ----------
    sequence : SequenceSpec
        Pulse geometry and set detuning (rad/s).
    inhomogeneous : LightShiftDistribution, optional
        Per-cycle light-shift draw; None disables inhomogeneous broadening.
    homogeneous : HomogeneousNoiseSpec, optional
        Per-cycle detuning-jump draw; None disables homogeneous noise.
    cycles_per_point : int
        Binomial trials per time-grid point (measurement statistics).
    noise_draws : int
        Noise realizations averaged per probability estimate; controls
        oracle accuracy, independent of cycles_per_point.
    time_grid : tuple of float
        Readout times in seconds, strictly increasing.
    rng_seed : int
        Master seed; all randomness derives from it.
    zeeman_shift : float
        Constant quadratic Zeeman detuning (rad/s) subtracted from the set
        detuning.
    contrast : float
        Phenomenological fringe contrast in [0, 1] (imperfect pulses and
        state preparation); scales w before the fraction map.
    invert_fraction : bool
        Use the flipped readout convention (1 + w)/2.
    metadata : dict
        Informational trap parameters (depth, wavelength, temperature, bias
        field); never interpreted.
    """

    sequence: SequenceSpec
    inhomogeneous: LightShiftDistribution | None = None
    homogeneous: HomogeneousNoiseSpec | None = None
    cycles_per_point: int = 100
    noise_draws: int = 4096
    time_grid: tuple[float, ...] = ()
    rng_seed: int = 0
    zeeman_shift: float = 0.0
    contrast: float = 1.0
    invert_fraction: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.cycles_per_point < 1:
            raise DomainError(f"cycles_per_point must be >= 1, got {self.cycles_per_point}")
        if self.noise_draws < 1:
            raise DomainError(f"noise_draws must be >= 1, got {self.noise_draws}")
        if not 0.0 <= self.contrast <= 1.0:
            raise DomainError(f"contrast must lie in [0, 1], got {self.contrast}")
        grid = tuple(float(t) for t in self.time_grid)
        if grid and np.any(np.diff(grid) <= 0.0):
            raise DomainError("time grid must be strictly increasing")
        object.__setattr__(self, "time_grid", grid)
        if self.homogeneous is not None and self.sequence.n >= 1:
            if self.homogeneous.sigmas.shape[0] != self.sequence.n:
                raise DomainError(
                    f"homogeneous noise describes {self.homogeneous.sigmas.shape[0]} "
                    f"intervals but the sequence has n = {self.sequence.n}"
                )


@dataclass(frozen=True)
class FringeDataset:
    """Rows of (time, successes, trials) emulating a measured fringe."""

    times: np.ndarray
    successes: np.ndarray
    trials: np.ndarray

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        successes = np.atleast_1d(np.asarray(self.successes, dtype=np.int64))
        trials = np.atleast_1d(np.asarray(self.trials, dtype=np.int64))
        if not times.shape == successes.shape == trials.shape:
            raise DataFormatError("times, successes and trials must have equal length")
        if np.any(successes < 0) or np.any(successes > trials):
            raise DataFormatError("successes must satisfy 0 <= successes <= trials")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "successes", successes)
        object.__setattr__(self, "trials", trials)

    @property
    def fractions(self) -> np.ndarray:
        return self.successes / self.trials

    def points(self):
        """WeightedPoints with inverse binomial-variance weights, for fitting."""
        return points_from_counts(self.times, self.successes, self.trials)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["time_s", "fraction", "trials", "successes"])
            for t, frac, trials, successes in zip(
                self.times, self.fractions, self.trials, self.successes
            ):
                writer.writerow([repr(float(t)), repr(float(frac)), int(trials), int(successes)])

    @staticmethod
    def read_csv(path) -> "FringeDataset":
        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise DataFormatError("empty dataset file") from None
            if header != ["time_s", "fraction", "trials", "successes"]:
                raise DataFormatError(f"unexpected header {header!r}")
            times, successes, trials = [], [], []
            for index, row in enumerate(reader, start=1):
                if len(row) != 4:
                    raise DataFormatError(f"expected 4 columns, got {len(row)}", row=index)
                try:
                    t, frac = float(row[0]), float(row[1])
                    n_trials, n_succ = int(row[2]), int(row[3])
                except ValueError as exc:
                    raise DataFormatError(str(exc), row=index) from None
                if not 0 <= n_succ <= n_trials:
                    raise DataFormatError(
                        f"successes {n_succ} outside [0, trials = {n_trials}]", row=index
                    )
                if abs(frac - n_succ / n_trials) > 1e-9:
                    raise DataFormatError(
                        f"fraction {frac} does not equal successes/trials", row=index
                    )
                times.append(t)
                successes.append(n_succ)
                trials.append(n_trials)
        return FringeDataset(np.array(times), np.array(successes), np.array(trials))

    def to_json(self) -> str:
        rows = [
            {"time_s": float(t), "fraction": float(f), "trials": int(n), "successes": int(k)}
            for t, f, n, k in zip(self.times, self.fractions, self.trials, self.successes)
        ]
        return json.dumps({"rows": rows}, indent=2)

    @staticmethod
    def from_json(text: str) -> "FringeDataset":
        try:
            rows = json.loads(text)["rows"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DataFormatError(f"not a dataset JSON document: {exc}") from None
        return FringeDataset(
            np.array([r["time_s"] for r in rows]),
            np.array([r["successes"] for r in rows]),
            np.array([r["trials"] for r in rows]),
        )


# ------------------------------------------------------- per-draw evolution


def _effective_sequence(config: ExperimentConfig, t: float, delta_eff: float) -> SequenceSpec:
    seq = config.sequence
    return replace(seq, t=float(t), delta=float(delta_eff))


def simulate_point(config: ExperimentConfig, t: float, rng) -> float:
    """Success probability of a single experimental cycle (one noise draw).

    Draws one light-shift value and one detuning-jump vector (when the
    corresponding noise source is configured), evolves the Bloch vector
    through the sequence, and maps the readout w to a fraction.  Averaging
    many calls estimates the ensemble mean; with no noise configured the
    value is deterministic.
    """
    delta_eff = config.sequence.delta - config.zeeman_shift
    if config.inhomogeneous is not None:
        delta_eff -= lightshift_sample(config.inhomogeneous, rng)
    seq = _effective_sequence(config, t, delta_eff)
    if seq.n == 0:
        state = rotate_pi_half(INITIAL_STATE)
        state = free_precession(state, seq.delta, seq.t)
        state = rotate_pi_half(state)
    else:
        jumps = (
            sample_detuning_differences(config.homogeneous, rng)
            if config.homogeneous is not None
            else np.zeros(seq.n)
        )
        base = np.full(seq.n, seq.delta)
        state = evolve_cpmg_perturbed(seq.tau, seq.n, SegmentDetunings(base, jumps), t=seq.t)
    return fraction_from_w(config.contrast * state.w, invert=config.invert_fraction)


# ---------------------------------------------------- vectorized ensemble


def _pulse_pi_half_batch(u, v, w):
    return u, -w, v


def _pulse_pi_batch(u, v, w):
    return u, -v, -w


def _precess_batch(u, v, w, delta, duration):
    angle = delta * duration
    c, s = np.cos(angle), np.sin(angle)
    return u * c + v * s, -u * s + v * c, w


def _batch_w(n: int, tau: float, t: float, delta_eff: np.ndarray, jumps) -> np.ndarray:
    """Readout w for a batch of draws; mirrors the scalar pulse maps exactly."""
    u = np.zeros_like(delta_eff)
    v = np.zeros_like(delta_eff)
    w = np.full_like(delta_eff, -1.0)
    u, v, w = _pulse_pi_half_batch(u, v, w)
    if n == 0:
        u, v, w = _precess_batch(u, v, w, delta_eff, t)
    else:
        last_pulse = (2 * n - 1) * tau
        for i in range(n):
            u, v, w = _precess_batch(u, v, w, delta_eff, tau)
            u, v, w = _pulse_pi_batch(u, v, w)
            duration = tau if i < n - 1 else t - last_pulse
            perturbed = delta_eff if jumps is None else delta_eff + jumps[:, i]
            u, v, w = _precess_batch(u, v, w, perturbed, duration)
    u, v, w = _pulse_pi_half_batch(u, v, w)
    return w


def ensemble_probability(config: ExperimentConfig, t: float, rng, draws: int | None = None) -> float:
    """Ensemble-averaged success probability at readout time t.

    Vectorizes ``draws`` independent noise realizations (default
    ``config.noise_draws``); with no noise configured a single deterministic
    evaluation is taken.
    """
    seq = config.sequence
    earliest = seq.earliest_readout
    if t < earliest:
        raise DomainError(f"readout time t = {t} violates t >= (2n-1)*tau = {earliest}")
    if config.inhomogeneous is None and config.homogeneous is None:
        draws = 1
    elif draws is None:
        draws = config.noise_draws
    delta_eff = np.full(draws, seq.delta - config.zeeman_shift)
    if config.inhomogeneous is not None:
        delta_eff = delta_eff - lightshift_sample(config.inhomogeneous, rng, size=draws)
    jumps = None
    if config.homogeneous is not None and seq.n >= 1:
        jumps = sample_detuning_differences(config.homogeneous, rng, size=draws)
    w = _batch_w(seq.n, seq.tau, t, delta_eff, jumps)
    fraction = (1.0 + config.contrast * w) / 2.0 if config.invert_fraction \
        else (1.0 - config.contrast * w) / 2.0
    return float(np.clip(np.mean(fraction), 0.0, 1.0))


# ------------------------------------------------------------- datasets


def _point_rng(seed: int, kind: int, index: int):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(kind, index)))


def _simulate_one(config: ExperimentConfig, index: int, t: float) -> tuple[float, int]:
    noise_rng = _point_rng(config.rng_seed, 0, index)
    p_hat = ensemble_probability(config, t, noise_rng)
    shot_rng = _point_rng(config.rng_seed, 1, index)
    return p_hat, int(shot_rng.binomial(config.cycles_per_point, p_hat))


def simulate_dataset(config: ExperimentConfig, workers: int = 1) -> FringeDataset:
    """Synthesize a binomially sampled dataset over the config's time grid.

    Each grid point owns an RNG substream keyed by its index, so the output
    is bit-identical for a given (config, seed) regardless of ``workers``.
    """
    if not config.time_grid:
        raise DomainError("config has an empty time grid")
    times = np.asarray(config.time_grid, dtype=float)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(
                lambda pair: _simulate_one(config, pair[0], pair[1]),
                enumerate(times),
            ))
    else:
        rows = [_simulate_one(config, i, t) for i, t in enumerate(times)]
    successes = np.array([row[1] for row in rows], dtype=np.int64)
    trials = np.full(times.shape, config.cycles_per_point, dtype=np.int64)
    return FringeDataset(times, successes, trials)


def binomial_dataset(times, probabilities, cycles: int, rng) -> FringeDataset:
    """Binomially sample known probabilities: the measurement-emulation step alone."""
    times = np.asarray(times, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise DomainError("probabilities must lie in [0, 1]")
    successes = rng.binomial(int(cycles), p)
    return FringeDataset(times, successes, np.full(times.shape, int(cycles), dtype=np.int64))


# ------------------------------------------------------------- visibility


@dataclass(frozen=True)
class VisibilityPoint:
    """One fitted fringe of a visibility scan (total time = 2*n*tau)."""

    total_time: float
    visibility: float
    error: float
    ok: bool
    message: str = ""


def scan_visibility(
    config: ExperimentConfig,
    tau_grid,
    points_per_fringe: int = 31,
    carrier_periods: float = 3.0,
    workers: int = 1,
) -> list[VisibilityPoint]:
    """Two-stage visibility extraction over a grid of pulse spacings.

    For each tau, the readout pulse time is scanned symmetrically around the
    echo time 2*n*tau (covering ``carrier_periods`` fringe periods), a
    dataset is simulated, and its fitted visibility recorded.  Fit failures
    are reported per point (``ok = False``), never raised.
    """
    seq = config.sequence
    if seq.n < 1:
        raise DomainError("visibility scans need at least one refocusing pulse")
    carrier = seq.delta - config.zeeman_shift
    t2_star = math.inf
    if config.inhomogeneous is not None:
        carrier -= config.inhomogeneous.delta0
        t2_star = T2_STAR_PER_ETA * config.inhomogeneous.eta
    if abs(carrier) < 1e-9:
        raise DomainError(
            "visibility scan needs a nonzero effective carrier detuning to produce fringes"
        )
    points = []
    for j, tau in enumerate(tau_grid):
        tau = float(tau)
        half_span = min(carrier_periods * math.pi / abs(carrier), 0.95 * tau)
        echo_time = 2 * seq.n * tau
        grid = echo_time + np.linspace(-half_span, half_span, points_per_fringe)
        sub_seed = int(np.random.SeedSequence(
            entropy=config.rng_seed, spawn_key=(2, j)
        ).generate_state(1)[0])
        sub_config = replace(
            config,
            sequence=replace(seq, tau=tau, t=None),
            time_grid=tuple(grid),
            rng_seed=sub_seed,
        )
        dataset = simulate_dataset(sub_config, workers=workers)
        try:
            fit = fit_fringe(dataset.points(), n=seq.n, tau=tau, t2_star=t2_star)
            points.append(VisibilityPoint(
                total_time=echo_time,
                visibility=fit.params["visibility"],
                error=fit.errors["visibility"],
                ok=fit.converged,
                message="" if fit.converged else "iteration cap reached",
            ))
        except FitError as exc:
            points.append(VisibilityPoint(
                total_time=echo_time, visibility=math.nan, error=math.nan,
                ok=False, message=str(exc),
            ))
    return points
