import math

import numpy as np
import pytest

from twoway_cvqkd import gaussian
from twoway_cvqkd.attacks import AttackParams
from twoway_cvqkd.gaussian import (CovarianceMatrix, apply_transform,
                                   beam_splitter, cm_from_csv, cm_to_csv,
                                   condition_on_heterodyne,
                                   condition_on_homodyne, direct_sum, epr_cm,
                                   g_entropy, is_symplectic,
                                   log_negativity_epr, omega,
                                   random_symplectic, symplectic_eigenvalues,
                                   von_neumann_entropy)
from twoway_cvqkd.key_rates import one_way_cm


def test_omega_one_mode():
    assert np.array_equal(omega(1), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_omega_two_modes_is_direct_sum():
    assert np.array_equal(omega(2), direct_sum(omega(1), omega(1)))


def test_omega_squares_to_minus_identity():
    for n in (1, 2, 3, 4):
        assert np.allclose(omega(n) @ omega(n), -np.eye(2 * n))


def test_epr_cm_vacuum_limit():
    assert np.allclose(epr_cm(1.0).mat, np.eye(4))


def test_epr_cm_off_diagonal():
    mat = epr_cm(2.0).mat
    assert mat[0, 2] == pytest.approx(math.sqrt(3.0))
    assert mat[1, 3] == pytest.approx(-math.sqrt(3.0))


def test_epr_cm_is_pure():
    for V in (1.0, 2.0, 10.0, 1e4):
        assert np.allclose(epr_cm(V).spectrum(), [1.0, 1.0], atol=1e-8)


def test_epr_cm_rejects_small_variance():
    with pytest.raises(ValueError):
        epr_cm(0.5)


def test_symplectic_eigenvalues_thermal():
    assert np.allclose(symplectic_eigenvalues(3.0 * np.eye(2)), [3.0])


def test_symplectic_eigenvalues_one_way_eve_cm():
    # unconditional Eve state: large eigenvalue (1-T)V, small one W
    params = AttackParams(0.7, 2.0)
    V = 1e6
    nus = symplectic_eigenvalues(one_way_cm("E", V, V, params))
    assert abs(nus[0] - 0.3 * V) < 1e-3 * 0.3 * V
    assert abs(nus[1] - 2.0) < 1e-3 * 2.0


def test_symplectic_eigenvalues_rejects_asymmetric():
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_g_entropy_values():
    assert g_entropy(1.0) == 0.0
    assert g_entropy(3.0) == pytest.approx(2.0, abs=1e-12)
    nu = 1e6
    assert g_entropy(nu) == pytest.approx(math.log2(math.e * nu / 2), rel=1e-5)


def test_g_entropy_rejects_unphysical():
    with pytest.raises(ValueError):
        g_entropy(0.9)


def test_g_entropy_strictly_increasing():
    grid = np.linspace(1.0 + 1e-6, 50.0, 200)
    vals = [g_entropy(nu) for nu in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_von_neumann_entropy():
    assert von_neumann_entropy(np.eye(2)) == 0.0
    assert von_neumann_entropy(3.0 * np.eye(2)) == pytest.approx(2.0, abs=1e-12)
    assert von_neumann_entropy(epr_cm(7.0)) == pytest.approx(0.0, abs=1e-6)


def test_log_negativity():
    assert log_negativity_epr(1.0) == 0.0
    V = 1e4
    assert log_negativity_epr(V) == pytest.approx(math.log2(2 * V), rel=1e-6)
    grid = np.linspace(1.0, 20.0, 50)
    vals = [log_negativity_epr(v) for v in grid]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_beam_splitter_limits():
    assert np.allclose(beam_splitter(1.0), np.eye(4))
    swap = beam_splitter(0.0)
    # T=0 swaps the modes, with a sign on the reflected arm
    assert np.allclose(swap[:2, 2:], np.eye(2))
    assert np.allclose(swap[2:, :2], -np.eye(2))


def test_beam_splitter_symplectic():
    for T in (0.0, 0.3, 0.5, 0.9, 1.0):
        assert is_symplectic(beam_splitter(T))


def test_apply_transform():
    cm = epr_cm(3.0)
    assert np.allclose(apply_transform(cm, np.eye(4)).mat, cm.mat)
    # beam splitter leaves two vacua invariant
    out = apply_transform(np.eye(4), beam_splitter(0.37))
    assert np.allclose(out.mat, np.eye(4))


def test_spectrum_invariant_under_symplectics():
    rng = np.random.default_rng(3)
    cm = direct_sum(1.5 * np.eye(2), epr_cm(4.0).mat)
    ref = symplectic_eigenvalues(cm)
    for _ in range(5):
        s = random_symplectic(3, rng)
        assert np.allclose(symplectic_eigenvalues(s @ cm @ s.T), ref, atol=1e-8)


def test_condition_on_homodyne_epr():
    V = 5.0
    out = condition_on_homodyne(epr_cm(V), 1, "Q")
    assert np.allclose(out.mat, np.diag([1.0 / V, V]), atol=1e-12)


def test_condition_on_homodyne_product_state():
    cm = direct_sum(2.0 * np.eye(2), 3.0 * np.eye(2))
    out = condition_on_homodyne(cm, 1, "P")
    assert np.allclose(out.mat, 2.0 * np.eye(2))


def test_condition_on_heterodyne_epr_gives_coherent_state():
    for V in (1.0, 2.0, 10.0, 1e3):
        out = condition_on_heterodyne(epr_cm(V), 0)
        assert np.allclose(out.mat, np.eye(2), atol=1e-9)


def test_conditioning_preserves_physicality():
    rng = np.random.default_rng(11)
    for _ in range(10):
        base = direct_sum(epr_cm(3.0).mat, 2.5 * np.eye(2))
        s = random_symplectic(3, rng)
        cm = CovarianceMatrix(s @ base @ s.T, validate=False)
        for reduced in (condition_on_homodyne(cm, 2, "Q"),
                        condition_on_heterodyne(cm, 2)):
            assert symplectic_eigenvalues(reduced.mat).min() >= 1.0 - 1e-8


def test_covariance_matrix_validation():
    with pytest.raises(ValueError):
        CovarianceMatrix(0.5 * np.eye(2))  # below vacuum
    with pytest.raises(ValueError):
        CovarianceMatrix(np.eye(3))  # odd dimension
    cm = CovarianceMatrix(np.eye(4))
    assert cm.n_modes == 2


def test_log_units_switch():
    try:
        gaussian.set_log_units("nats")
        assert g_entropy(3.0) == pytest.approx(2.0 * math.log(2.0), abs=1e-12)
    finally:
        gaussian.set_log_units("bits")
    with pytest.raises(ValueError):
        gaussian.set_log_units("dits")


def test_cm_csv_roundtrip(tmp_path):
    cm = epr_cm(2.5)
    path = tmp_path / "cm.csv"
    cm_to_csv(cm, path)
    back = cm_from_csv(path)
    assert np.allclose(back.mat, cm.mat, atol=1e-15)
