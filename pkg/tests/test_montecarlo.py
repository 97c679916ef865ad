"""Ensemble simulation: kernel equivalence, convergence to closed forms,
measurement emulation, determinism, and the two-stage visibility pipeline."""

import math
from dataclasses import replace

import numpy as np
import pytest

from dephasim.analytic import (
    envelope_alpha_exact,
    envelope_kappa_exact,
    fraction_from_w,
    homogeneous_factor,
    t2_prime,
)
from dephasim.bloch import SegmentDetunings, SequenceSpec, evolve_cpmg, evolve_cpmg_perturbed, w_cpmg
from dephasim.errors import DataFormatError, DomainError
from dephasim.fit import fit_fringe, fit_visibility_decay, weighted_points
from dephasim.montecarlo import (
    ExperimentConfig,
    FringeDataset,
    VisibilityPoint,
    binomial_dataset,
    ensemble_probability,
    scan_visibility,
    simulate_dataset,
    simulate_point,
    _batch_w,
)
from dephasim.noise import HomogeneousNoiseSpec, LightShiftDistribution

ETA = 1.4e-3 / 0.97      # light-shift rate giving the measured 1.4 ms envelope time


def echo_config(**overrides):
    seq = SequenceSpec("spin_echo", 1, tau=5e-3, delta=2 * math.pi * 300.0)
    base = dict(sequence=seq, time_grid=(0.0103,), rng_seed=0)
    base.update(overrides)
    return ExperimentConfig(**base)


# ------------------------------------------------------------ single draws


def test_no_noise_is_deterministic_and_exact():
    rng = np.random.default_rng(0)
    # Ramsey at zero detuning: perfect refocusing regardless of t
    cfg = ExperimentConfig(sequence=SequenceSpec("ramsey", 0, delta=0.0), time_grid=(1.0,))
    for t in (1e-4, 3.7e-3, 2.0):
        assert simulate_point(cfg, t, rng) == fraction_from_w(1.0)
    # CPMG against the closed form
    seq = SequenceSpec("cpmg", 3, tau=2e-3, delta=2 * math.pi * 400.0)
    cfg = ExperimentConfig(sequence=seq, time_grid=(0.0123,))
    t = 0.0123
    expected = fraction_from_w(w_cpmg(seq.delta, seq.tau, seq.n, t))
    assert simulate_point(cfg, t, rng) == pytest.approx(expected, abs=1e-12)
    assert ensemble_probability(cfg, t, rng) == pytest.approx(expected, abs=1e-12)
    # identical on repeated calls: no randomness consumed
    assert simulate_point(cfg, t, rng) == simulate_point(cfg, t, rng)


def test_invalid_readout_time_rejected():
    cfg = echo_config()
    rng = np.random.default_rng(1)
    with pytest.raises(DomainError):
        simulate_point(cfg, 2e-3, rng)      # before the refocusing pulse
    with pytest.raises(DomainError):
        ensemble_probability(cfg, 2e-3, rng)


def test_batch_kernel_matches_per_draw_evolution():
    rng = np.random.default_rng(2)
    for n, tau, t in ((1, 4e-3, 9e-3), (2, 3e-3, 0.0125), (5, 1e-3, 0.0102)):
        delta_eff = rng.uniform(-3e3, 3e3, size=200)
        jumps = rng.normal(0.0, 40.0, size=(200, n))
        batch = _batch_w(n, tau, t, delta_eff, jumps)
        for k in range(0, 200, 17):
            seg = SegmentDetunings(np.full(n, delta_eff[k]), jumps[k])
            scalar = evolve_cpmg_perturbed(tau, n, seg, t=t).w
            assert batch[k] == pytest.approx(scalar, abs=1e-12)
    # Ramsey branch
    delta_eff = rng.uniform(-3e3, 3e3, size=50)
    batch = _batch_w(0, 0.0, 1.3e-3, delta_eff, None)
    for k in range(0, 50, 7):
        seq = SequenceSpec("ramsey", 0, t=1.3e-3, delta=float(delta_eff[k]))
        assert batch[k] == pytest.approx(evolve_cpmg(seq).w, abs=1e-12)


def test_contrast_and_inversion_flow_through():
    seq = SequenceSpec("ramsey", 0, delta=2 * math.pi * 500.0)
    rng = np.random.default_rng(3)
    t = 4e-4
    w = math.cos(seq.delta * t)
    cfg = ExperimentConfig(sequence=seq, time_grid=(t,), contrast=0.6)
    assert simulate_point(cfg, t, rng) == pytest.approx((1 - 0.6 * w) / 2, abs=1e-12)
    cfg = ExperimentConfig(sequence=seq, time_grid=(t,), contrast=0.6, invert_fraction=True)
    assert simulate_point(cfg, t, rng) == pytest.approx((1 + 0.6 * w) / 2, abs=1e-12)


def test_zeeman_shift_offsets_the_carrier():
    shift = 2 * math.pi * 200.0
    seq = SequenceSpec("ramsey", 0, delta=2 * math.pi * 1200.0)
    cfg = ExperimentConfig(sequence=seq, time_grid=(1e-3,), zeeman_shift=shift)
    rng = np.random.default_rng(4)
    t = 7e-4
    expected = (1 - math.cos((seq.delta - shift) * t)) / 2
    assert simulate_point(cfg, t, rng) == pytest.approx(expected, abs=1e-12)


# ------------------------------------------------------ ensemble averages


def test_ramsey_ensemble_matches_characteristic_function():
    # inhomogeneous only: 1e5 draws against the exact Gamma characteristic
    # function envelope, within 1% everywhere
    delta = 2 * math.pi * 8.6e3
    cfg = ExperimentConfig(
        sequence=SequenceSpec("ramsey", 0, delta=delta),
        inhomogeneous=LightShiftDistribution(0.0, ETA),
        time_grid=(1e-3,), noise_draws=100_000,
    )
    rng = np.random.default_rng(3)
    for t in np.linspace(0.05e-3, 3e-3, 12):
        p = ensemble_probability(cfg, float(t), rng)
        w = envelope_alpha_exact(t, ETA) * math.cos(delta * t + envelope_kappa_exact(t, ETA))
        assert p == pytest.approx((1 - w) / 2, abs=0.01)


def test_lightshift_onset_shifts_the_fringe_phase():
    # a nonzero distribution onset delta0 acts as a carrier offset
    delta0 = 2 * math.pi * 300.0
    delta = 2 * math.pi * 2e3
    cfg = ExperimentConfig(
        sequence=SequenceSpec("ramsey", 0, delta=delta),
        inhomogeneous=LightShiftDistribution(delta0, ETA),
        time_grid=(1e-3,), noise_draws=200_000,
    )
    rng = np.random.default_rng(9)
    t = 0.8e-3
    w = envelope_alpha_exact(t, ETA) * math.cos((delta - delta0) * t + envelope_kappa_exact(t, ETA))
    assert ensemble_probability(cfg, t, rng) == pytest.approx((1 - w) / 2, abs=0.01)


@pytest.mark.parametrize("n", [1, 3])
def test_homogeneous_echo_matches_closed_form(n):
    tau, sigma_i = 5e-3, 30.0
    seq = SequenceSpec("spin_echo" if n == 1 else "cpmg", n, tau=tau, delta=0.0)
    cfg = ExperimentConfig(
        sequence=seq,
        homogeneous=HomogeneousNoiseSpec(np.full(n, sigma_i)),
        time_grid=(2 * n * tau,), noise_draws=200_000,
    )
    rng = np.random.default_rng(4)
    p = ensemble_probability(cfg, 2 * n * tau, rng)
    w = (-1.0) ** n * homogeneous_factor(tau, np.full(n, sigma_i))
    assert p == pytest.approx((1 - w) / 2, abs=0.002)


# ----------------------------------------------------------- datasets


def test_dataset_deterministic_across_runs_and_workers():
    cfg = echo_config(
        inhomogeneous=LightShiftDistribution(0.0, ETA),
        time_grid=tuple(0.01 + np.linspace(-1e-3, 1e-3, 15)),
        rng_seed=99, noise_draws=2000,
    )
    first = simulate_dataset(cfg, workers=1)
    again = simulate_dataset(cfg, workers=1)
    threaded = simulate_dataset(cfg, workers=4)
    assert np.array_equal(first.successes, again.successes)
    assert np.array_equal(first.successes, threaded.successes)
    other = simulate_dataset(replace(cfg, rng_seed=100))
    assert not np.array_equal(first.successes, other.successes)


def test_binomial_variance_calibration():
    # 1000 seeded repetitions of one deterministic-probability point:
    # empirical fraction variance equals p(1-p)/trials within 10%
    seq = SequenceSpec("spin_echo", 1, tau=5e-3, delta=2 * math.pi * 300.0)
    t = 0.0103
    p_true = fraction_from_w(w_cpmg(seq.delta, seq.tau, seq.n, t))
    fractions = []
    for seed in range(1000):
        cfg = ExperimentConfig(sequence=seq, time_grid=(t,), cycles_per_point=100, rng_seed=seed)
        fractions.append(simulate_dataset(cfg).fractions[0])
    empirical = np.var(fractions, ddof=1)
    assert empirical == pytest.approx(p_true * (1 - p_true) / 100, rel=0.10)


def test_large_trials_converge_to_analytic_curve():
    seq = SequenceSpec("spin_echo", 1, tau=5e-3, delta=2 * math.pi * 300.0)
    grid = tuple(0.01 + np.linspace(-1.5e-3, 1.5e-3, 21))
    cfg = ExperimentConfig(sequence=seq, time_grid=grid, cycles_per_point=10**6, rng_seed=5)
    dataset = simulate_dataset(cfg)
    exact = (1 - w_cpmg(seq.delta, seq.tau, seq.n, np.array(grid))) / 2
    assert np.max(np.abs(dataset.fractions - exact)) < 0.003


def test_zero_noise_echo_fringe_fits_to_unit_visibility():
    delta = 2 * math.pi * 1.5e3
    seq = SequenceSpec("spin_echo", 1, tau=5e-3, delta=delta)
    grid = tuple(0.01 + np.linspace(-1e-3, 1e-3, 31))
    cfg = ExperimentConfig(sequence=seq, time_grid=grid, cycles_per_point=100, rng_seed=12)
    dataset = simulate_dataset(cfg)
    fit = fit_fringe(dataset.points(), n=1, tau=5e-3, t2_star=math.inf)
    v, se = fit.params["visibility"], fit.errors["visibility"]
    assert abs(v - 1.0) <= 3 * se
    assert 0.0 <= v <= 1.0 + 3 * se


def test_dataset_validation_and_config_invariants():
    with pytest.raises(DataFormatError):
        FringeDataset(np.array([0.0]), np.array([5]), np.array([3]))   # successes > trials
    with pytest.raises(DataFormatError):
        FringeDataset(np.array([0.0, 1.0]), np.array([1]), np.array([3]))
    seq = SequenceSpec("spin_echo", 1, tau=1e-3)
    with pytest.raises(DomainError):
        ExperimentConfig(sequence=seq, cycles_per_point=0)
    with pytest.raises(DomainError):
        ExperimentConfig(sequence=seq, noise_draws=0)
    with pytest.raises(DomainError):
        ExperimentConfig(sequence=seq, contrast=1.2)
    with pytest.raises(DomainError):
        ExperimentConfig(sequence=seq, time_grid=(2.0, 1.0))
    with pytest.raises(DomainError):
        ExperimentConfig(sequence=seq, homogeneous=HomogeneousNoiseSpec([1.0, 2.0]))
    with pytest.raises(DomainError):
        simulate_dataset(ExperimentConfig(sequence=seq))   # empty grid


def test_binomial_dataset_rejects_bad_probabilities():
    rng = np.random.default_rng(0)
    with pytest.raises(DomainError):
        binomial_dataset([0.0], [1.2], 100, rng)
    ds = binomial_dataset([0.0, 1.0], [0.2, 0.8], 100, rng)
    assert np.all(ds.trials == 100)


def test_csv_round_trip_and_malformed_rows(tmp_path):
    rng = np.random.default_rng(6)
    ds = binomial_dataset(np.linspace(0, 1e-3, 7), np.full(7, 0.4), 100, rng)
    path = tmp_path / "fringe.csv"
    ds.write_csv(path)
    back = FringeDataset.read_csv(path)
    assert np.array_equal(back.times, ds.times)
    assert np.array_equal(back.successes, ds.successes)
    assert np.array_equal(back.trials, ds.trials)

    bad = tmp_path / "bad.csv"
    bad.write_text("time_s,fraction,trials,successes\n0.0,0.5,100,200\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="row 1"):
        FringeDataset.read_csv(bad)
    bad.write_text("time_s,fraction,trials,successes\n0.0,0.9,100,50\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="fraction"):
        FringeDataset.read_csv(bad)
    bad.write_text("wrong,header\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="header"):
        FringeDataset.read_csv(bad)
    bad.write_text("time_s,fraction,trials,successes\nx,0.5,100,50\n", encoding="utf-8")
    with pytest.raises(DataFormatError, match="row 1"):
        FringeDataset.read_csv(bad)


def test_json_round_trip():
    rng = np.random.default_rng(7)
    ds = binomial_dataset(np.linspace(0, 1e-3, 5), np.full(5, 0.3), 80, rng)
    back = FringeDataset.from_json(ds.to_json())
    assert np.array_equal(back.times, ds.times)
    assert np.array_equal(back.successes, ds.successes)
    with pytest.raises(DataFormatError):
        FringeDataset.from_json("[1, 2, 3]")


# ------------------------------------------------------- visibility scans


def pipeline_config(n, sigma_sig, contrast, seed):
    kind = "spin_echo" if n == 1 else "cpmg"
    seq = SequenceSpec(kind, n, tau=1e-3, delta=2 * math.pi * 1.5e3)
    return ExperimentConfig(
        sequence=seq,
        homogeneous=HomogeneousNoiseSpec.from_sigma_sig(sigma_sig, n),
        cycles_per_point=200, noise_draws=4000, rng_seed=seed, contrast=contrast,
    )


def run_pipeline(n, sigma_sig, contrast, seed):
    cfg = pipeline_config(n, sigma_sig, contrast, seed)
    taus = t2_prime(n, sigma_sig) * np.linspace(0.15, 1.1, 10) / (2 * n)
    points = scan_visibility(cfg, taus)
    usable = [p for p in points if p.ok]
    assert len(usable) >= 8
    fit = fit_visibility_decay(
        weighted_points([p.total_time for p in usable],
                        [p.visibility for p in usable],
                        yerr=[p.error for p in usable]), n=n)
    return points, fit


def test_scan_recovers_sigma_through_full_pipeline():
    points, fit = run_pipeline(1, 27.6, 0.687, seed=7)
    assert abs(fit.params["sigma_sig"] - 27.6) / 27.6 < 0.10
    for p in points:
        assert 0.0 <= p.visibility <= 1.0 + 3 * p.error   # fringe visibility sanity


def test_scan_t2_prime_scales_linearly_in_n_at_fixed_sigma():
    _, fit1 = run_pipeline(1, 27.6, 0.7, seed=7)
    _, fit6 = run_pipeline(6, 27.6, 0.7, seed=7)
    ratio = fit6.params["t2_prime"] / fit1.params["t2_prime"]
    assert ratio == pytest.approx(6.0, abs=0.5)


def test_scan_flat_at_contrast_without_homogeneous_noise():
    seq = SequenceSpec("spin_echo", 1, tau=1e-3, delta=2 * math.pi * 1.5e3)
    cfg = ExperimentConfig(sequence=seq, cycles_per_point=400, rng_seed=11, contrast=0.7)
    points = scan_visibility(cfg, np.linspace(5e-3, 30e-3, 6))
    assert all(p.ok for p in points)
    for p in points:
        assert abs(p.visibility - 0.7) <= 4 * p.error
    mean_v = np.mean([p.visibility for p in points])
    assert mean_v == pytest.approx(0.7, abs=0.015)


def test_scan_reports_fit_failures_per_point():
    cfg = pipeline_config(1, 27.6, 0.687, seed=7)
    points = scan_visibility(cfg, [5e-3, 10e-3], points_per_fringe=2)
    assert len(points) == 2
    assert all(isinstance(p, VisibilityPoint) and not p.ok for p in points)
    assert all(math.isnan(p.visibility) and p.message for p in points)


def test_scan_preconditions():
    seq = SequenceSpec("ramsey", 0, delta=2 * math.pi * 1e3)
    cfg = ExperimentConfig(sequence=seq)
    with pytest.raises(DomainError):
        scan_visibility(cfg, [1e-3])      # no refocusing pulse
    seq = SequenceSpec("spin_echo", 1, tau=1e-3, delta=0.0)
    cfg = ExperimentConfig(sequence=seq)
    with pytest.raises(DomainError):
        scan_visibility(cfg, [1e-3])      # zero carrier, no fringe to fit
