import math

import numpy as np
import pytest

from twoway_cvqkd.attacks import AttackParams, CorrelatedAttackParams, \
    correlated_two_mode_channels
from twoway_cvqkd.tomography import (DEFAULT_PROBE_DISPLACEMENTS,
                                     GaussianChannel, ProbeRecord,
                                     TomographyDataset, channel_distance,
                                     check_reducibility, compose,
                                     dataset_from_csv, dataset_to_csv,
                                     estimate_channel, simulate_probe_dataset)

I2 = np.eye(2)


def cloner_channel(T, W):
    return GaussianChannel(math.sqrt(T) * I2, (1 - T) * W * I2)


def test_identity_channel_recovery():
    data = simulate_probe_dataset(GaussianChannel.identity(), 100000, 1)
    fit = estimate_channel(data)
    assert np.allclose(fit.gain, I2, atol=0.02)
    assert np.allclose(fit.noise, np.zeros((2, 2)), atol=0.05)


def test_cloner_channel_recovery():
    data = simulate_probe_dataset(cloner_channel(0.7, 2.0), 100000, 2)
    fit = estimate_channel(data)
    assert np.allclose(fit.gain, math.sqrt(0.7) * I2, atol=0.02)
    assert np.allclose(fit.noise, 0.6 * I2, atol=0.05)


def test_pure_loss_noise_is_vacuum_contribution():
    data = simulate_probe_dataset(cloner_channel(0.5, 1.0), 100000, 3)
    fit = estimate_channel(data)
    assert np.allclose(fit.noise, 0.5 * I2, atol=0.05)


def test_estimation_error_shrinks_with_samples():
    target = cloner_channel(0.7, 2.0)

    def err(n):
        fits = [estimate_channel(simulate_probe_dataset(target, n, 40 + s))
                for s in range(4)]
        return np.mean([channel_distance(f, target) for f in fits])

    errors = [err(n) for n in (1000, 10000, 100000)]
    assert errors[0] > errors[1] > errors[2]
    assert errors[0] > 3 * errors[2]


def test_compose():
    ident = GaussianChannel.identity()
    assert channel_distance(compose(ident, ident, ident), ident) < 1e-15
    # two equal cloners in sequence
    T, W = 0.7, 1.5
    leg = cloner_channel(T, W)
    both = compose(leg, ident, leg)
    assert np.allclose(both.gain, T * I2, atol=1e-12)
    assert np.allclose(both.noise, ((1 - T) * W * T + (1 - T) * W) * I2, atol=1e-12)


def test_compose_associativity():
    rng = np.random.default_rng(8)
    chans = []
    for _ in range(3):
        t = rng.uniform(0.2, 0.9)
        w = rng.uniform(1.0, 3.0)
        d = rng.standard_normal(2)
        chans.append(GaussianChannel(math.sqrt(t) * I2, (1 - t) * w * I2, d))
    a, b, c = chans
    ident = GaussianChannel.identity()
    left = compose(compose(a, ident, b), ident, c)
    right = compose(a, ident, compose(b, ident, c))
    assert channel_distance(left, right) < 1e-12


def test_displacement_map_bookkeeping():
    alice = GaussianChannel.displacement_map([1.5, -0.5])
    leg = cloner_channel(0.64, 1.0)
    total = compose(leg, alice, leg)
    # the displacement applied between the legs is scaled by the second gain
    assert np.allclose(total.displacement, 0.8 * np.array([1.5, -0.5]))


def test_cp_check():
    assert GaussianChannel.identity().is_cp()
    assert cloner_channel(0.7, 1.5).is_cp()
    # attenuation without the mandatory vacuum noise is not a channel
    bad = GaussianChannel(math.sqrt(0.5) * I2, np.zeros((2, 2)))
    assert not bad.is_cp()


def test_dataset_validation():
    good = simulate_probe_dataset(GaussianChannel.identity(), 2000, 5)
    good.validate()
    with pytest.raises(ValueError):
        TomographyDataset(good.probes[:2]).validate()
    with pytest.raises(ValueError):
        # collinear displacements are rank deficient
        collinear = simulate_probe_dataset(
            GaussianChannel.identity(), 2000, 5,
            displacements=np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
        collinear.validate()
    short = ProbeRecord(np.zeros(2), I2.copy(), np.zeros(2), I2.copy(), 10)
    with pytest.raises(ValueError):
        TomographyDataset([short] * 6).validate()


def test_check_reducibility_verdicts():
    base = AttackParams(0.7, 1.5)
    tol = 0.05
    fwd, bwd, rt = correlated_two_mode_channels(
        CorrelatedAttackParams(base, base, 0.0))
    assert check_reducibility(fwd, bwd, rt, tol).kind == "reducible"
    fwd, bwd, rt = correlated_two_mode_channels(
        CorrelatedAttackParams(base, base, 0.9))
    verdict = check_reducibility(fwd, bwd, rt, tol)
    assert verdict.kind == "irreducible"
    assert verdict.composition_deviation > 10 * tol
    fwd, bwd, rt = correlated_two_mode_channels(
        CorrelatedAttackParams(AttackParams(0.7, 1.5), AttackParams(0.5, 1.5), 0.0))
    assert check_reducibility(fwd, bwd, rt, tol).kind == "asymmetric"
    with pytest.raises(ValueError):
        check_reducibility(fwd, bwd, rt, 0.0)


def test_verdict_invariant_under_probe_choice():
    base = AttackParams(0.7, 1.5)
    other_probes = np.array([[0.0, 0.0], [2.0, 1.0], [-1.0, 2.0],
                             [1.0, -2.0], [-2.0, -2.0], [3.0, 0.5]])
    for c, expect in ((0.0, "reducible"), (0.9, "irreducible")):
        fwd, bwd, rt = correlated_two_mode_channels(
            CorrelatedAttackParams(base, base, c))
        for probes in (DEFAULT_PROBE_DISPLACEMENTS, other_probes):
            e1 = estimate_channel(simulate_probe_dataset(fwd, 10000, 60,
                                                         displacements=probes))
            e2 = estimate_channel(simulate_probe_dataset(bwd, 10000, 61,
                                                         displacements=probes))
            ert = estimate_channel(simulate_probe_dataset(rt, 10000, 62,
                                                          displacements=probes))
            assert check_reducibility(e1, e2, ert, 0.1).kind == expect


def test_uncorrelated_deviation_below_noise_floor():
    base = AttackParams(0.7, 1.5)
    fwd, bwd, rt = correlated_two_mode_channels(
        CorrelatedAttackParams(base, base, 0.0))
    datasets = [simulate_probe_dataset(ch, 10000, 70 + k)
                for k, ch in enumerate((fwd, bwd, rt))]
    fits = [estimate_channel(d) for d in datasets]
    verdict = check_reducibility(*fits, tol=0.1)
    floor = sum(d.statistical_sigma() for d in datasets)
    assert verdict.composition_deviation < 3 * floor


def test_dataset_csv_roundtrip(tmp_path):
    data = simulate_probe_dataset(cloner_channel(0.6, 1.8), 5000, 90)
    path = tmp_path / "probes.csv"
    dataset_to_csv(data, path)
    back = dataset_from_csv(path)
    fit_a, fit_b = estimate_channel(data), estimate_channel(back)
    assert channel_distance(fit_a, fit_b) < 1e-9
