import math

import numpy as np
import pytest
from scipy.optimize import brentq

from twoway_cvqkd import gaussian
from twoway_cvqkd.attacks import AttackParams
from twoway_cvqkd.gaussian import g_entropy
from twoway_cvqkd.key_rates import asymptotic_rate
from twoway_cvqkd.thresholds import (Grid, crossover, solve_threshold,
                                     superadditivity_report, sweep_curve)


def test_threshold_zero_at_3db_boundary():
    assert solve_threshold("coll_het", "dr", 0.5) == 0.0


def test_threshold_zero_at_two_way_pure_loss_root():
    assert solve_threshold("coll_hom2", "dr", (3 - math.sqrt(5)) / 2) == 0.0


def test_threshold_hom_rr_against_scalar_root():
    # independent oracle: root of (1/2) log2(W/(0.5 b1)) - g(W) in W
    def rate(w):
        b1 = 0.5 * w + 0.5
        return 0.5 * math.log2(w / (0.5 * b1)) - g_entropy(w)

    w_root = brentq(rate, 1.0 + 1e-9, 100.0, xtol=1e-12)
    expect = (w_root - 1.0) * 0.5 / 0.5
    assert solve_threshold("hom", "rr", 0.5) == pytest.approx(expect, abs=1e-8)


def test_rate_vanishes_at_threshold():
    for proto, recon, T in (("hom", "dr", 0.7), ("het", "rr", 0.4),
                            ("hom2", "rr", 0.6), ("het2", "dr", 0.8)):
        n = solve_threshold(proto, recon, T)
        params = AttackParams.from_excess(T, n)
        assert abs(asymptotic_rate(proto, recon, params).rate) <= 1e-8


def test_threshold_log_base_invariant():
    ref = solve_threshold("het", "dr", 0.8)
    try:
        gaussian.set_log_units("nats")
        in_nats = solve_threshold("het", "dr", 0.8)
    finally:
        gaussian.set_log_units("bits")
    assert in_nats == pytest.approx(ref, abs=1e-9)


def test_threshold_solver_stability():
    a = solve_threshold("coll_het", "dr", 0.75, w_tol=1e-10)
    b = solve_threshold("coll_het", "dr", 0.75, w_tol=2e-10)
    assert abs(a - b) <= 1e-8


def test_divergent_pair_rejected():
    with pytest.raises(ValueError):
        solve_threshold("coll_hom", "rr", 0.5)


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(0.0, 0.9, 10)
    with pytest.raises(ValueError):
        Grid(0.5, 0.4, 10)
    assert len(Grid(0.1, 0.9, 17).points()) == 17


def test_rr_curves_strictly_positive():
    grid = Grid(0.05, 0.95, 19)
    for proto in ("hom", "het", "coll_het", "hom2", "het2"):
        curve = sweep_curve(proto, "rr", grid)
        assert not curve.errors
        assert np.all(curve.N > 0), proto


def test_sweep_deterministic_across_thread_counts():
    grid = Grid(0.2, 0.8, 13)
    serial = sweep_curve("het", "dr", grid, threads=1)
    parallel = sweep_curve("het", "dr", grid, threads=8)
    assert np.array_equal(serial.N, parallel.N)


def test_crossover_hom2_vs_hom_dr():
    grid = Grid(0.7, 0.95, 26)
    hom2 = sweep_curve("hom2", "dr", grid)
    hom = sweep_curve("hom", "dr", grid)
    points = crossover(hom2, hom)
    assert len(points) == 1
    assert points[0] == pytest.approx(0.86, abs=0.01)


def test_crossover_self_is_empty():
    grid = Grid(0.3, 0.7, 9)
    curve = sweep_curve("het", "dr", grid)
    assert crossover(curve, curve) == []


def test_no_crossover_het2_vs_het_dr():
    grid = Grid(0.05, 0.95, 31)
    het2 = sweep_curve("het2", "dr", grid)
    het = sweep_curve("het", "dr", grid)
    assert crossover(het2, het) == []


def test_crossover_rejects_grid_mismatch():
    a = sweep_curve("het", "dr", Grid(0.3, 0.7, 9))
    b = sweep_curve("het2", "dr", Grid(0.3, 0.7, 10))
    with pytest.raises(ValueError):
        crossover(a, b)


def test_superadditivity_het_rr():
    grid = Grid(0.1, 0.9, 17)
    report = superadditivity_report(sweep_curve("het", "rr", grid),
                                    sweep_curve("het2", "rr", grid))
    assert report.improved_everywhere
    assert report.crossovers == []


def test_superadditivity_hom_dr_reverses_above_crossover():
    grid = Grid(0.7, 0.95, 26)
    report = superadditivity_report(sweep_curve("hom", "dr", grid),
                                    sweep_curve("hom2", "dr", grid))
    t = grid.points()
    assert np.all(report.sign[t < 0.85] > 0)
    assert np.any(report.sign[t > 0.87] < 0)
    assert len(report.crossovers) == 1


def test_superadditivity_identical_curves():
    grid = Grid(0.3, 0.7, 9)
    curve = sweep_curve("hom", "dr", grid)
    report = superadditivity_report(curve, curve)
    assert report.no_improvement
