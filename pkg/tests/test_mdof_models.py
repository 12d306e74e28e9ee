"""Unit tests for distributions, builders and corrosion scaling."""

import numpy as np
import pytest

from hysterid.mdof_models import (
    BUILDING_UNCERTAIN,
    CAR_DEFAULTS,
    CAR_UNCERTAIN,
    CarConstants,
    CorrosionModel,
    FOURDOF_UNCERTAIN,
    GRAVITY,
    Lognormal,
    TruncatedGaussian,
    Uniform,
    build_4dof,
    build_half_car,
    build_quarter_car,
    build_shear_building,
    corrosion_loss,
    rayleigh_coefficients,
    sample_uncertain,
    stiffness_retention,
)

FOURDOF_MEANS = {"k_post": 4.0e6, "c_b": 20.0e6, "r_k": 0.16, "q_y_pct": 5.0}
CAR_MEANS = {"k_bf": 66824.0, "k_br": 18615.0, "k_wf": 101115.0,
             "k_wr": 10111.5, "r_k": 0.1875}


# ---------------------------------------------------------------------------
# distributions
# ---------------------------------------------------------------------------

def test_uniform_moments():
    q = Uniform(4.0, 6.0)
    assert q.mean_value == pytest.approx(5.0)
    assert q.sd_value == pytest.approx(0.57735, rel=1e-4)
    r = Uniform(0.125, 0.250)
    assert r.sd_value == pytest.approx(0.0361, rel=1e-2)


def test_lognormal_moment_matching():
    rng = np.random.default_rng(42)
    for dist in (Lognormal(4.0e6, 0.25e6), Lognormal(66824.0, 6682.4),
                 Lognormal(10111.5, 1011.15), Lognormal(750.0e3, 20.0e3),
                 Lognormal(20.0e6, 4.0e6)):
        draws = dist.sample(rng, 100_000)
        assert np.mean(draws) == pytest.approx(dist.mean, rel=0.02)
        assert np.std(draws) == pytest.approx(dist.sd, rel=0.02)
        assert np.all(draws > 0)


def test_truncated_gaussian():
    dist = TruncatedGaussian(35.0e3, 2.5e3)
    rng = np.random.default_rng(1)
    draws = dist.sample(rng, 50_000)
    assert np.all(draws >= 0)
    assert np.mean(draws) == pytest.approx(35.0e3, rel=0.01)
    tight = TruncatedGaussian(1.0, 2.0, lower=0.0)
    d2 = tight.sample(np.random.default_rng(2), 20_000)
    assert np.all(d2 >= 0.0)


def test_sample_uncertain_deterministic():
    a = sample_uncertain(FOURDOF_UNCERTAIN, 123, 10)
    b = sample_uncertain(FOURDOF_UNCERTAIN, 123, 10)
    assert set(a) == {"k_post", "c_b", "r_k", "q_y_pct"}
    for name in a:
        np.testing.assert_array_equal(a[name], b[name])
    c = sample_uncertain(FOURDOF_UNCERTAIN, 124, 10)
    assert not np.array_equal(a["k_post"], c["k_post"])


def test_sample_uncertain_supports():
    draws = sample_uncertain(BUILDING_UNCERTAIN, 5, 2000)
    assert np.all(draws["r_k"] >= 0.125) and np.all(draws["r_k"] <= 0.250)
    assert np.all(draws["c_b"] >= 0.0)
    assert np.all(draws["k_post"] > 0.0)


# ---------------------------------------------------------------------------
# Rayleigh damping
# ---------------------------------------------------------------------------

def test_rayleigh_reproduces_anchor_ratios():
    M = np.diag([300e3, 300e3, 300e3])
    K = np.array([[80e6, -40e6, 0.0],
                  [-40e6, 80e6, -40e6],
                  [0.0, -40e6, 40e6]])
    ray = rayleigh_coefficients(M, K, mode_indices=(1, 2), damping_ratio=0.03)
    import scipy.linalg
    omega = np.sqrt(scipy.linalg.eigh(K, M, eigvals_only=True))
    for w in (omega[0], omega[1]):
        ratio = ray.beta1 / (2 * w) + ray.beta2 * w / 2
        assert ratio == pytest.approx(0.03, abs=1e-10)
    assert ray.beta1 >= 0 and ray.beta2 >= 0


# ---------------------------------------------------------------------------
# 4-DOF builder
# ---------------------------------------------------------------------------

def test_build_4dof_matrices():
    sys4 = build_4dof(FOURDOF_MEANS)
    assert sys4.n_dof == 4
    np.testing.assert_allclose(np.diag(sys4.M),
                               [500e3, 300e3, 300e3, 300e3])
    # base row of K: k_post + k_1 on the diagonal, -k_1 coupling to story 1
    assert sys4.K[0, 0] == pytest.approx(4.0e6 + 40.0e6)
    assert sys4.K[0, 1] == pytest.approx(-40.0e6)
    assert sys4.K[0, 2] == pytest.approx(0.0)
    np.testing.assert_allclose(sys4.K, sys4.K.T)
    np.testing.assert_allclose(sys4.C, sys4.C.T)
    # ground-acceleration map is -M 1
    np.testing.assert_allclose(sys4.excitation_map[:, 0],
                               [-500e3, -300e3, -300e3, -300e3])


def test_build_4dof_yield_decomposition():
    sys4 = build_4dof(FOURDOF_MEANS)
    el = sys4.elements[0]
    k_pre = 4.0e6 / 0.16
    q_yield = 0.05 * 1400e3 * GRAVITY
    assert sys4.meta["k_pre"] == pytest.approx(25.0e6)
    assert sys4.meta["q_yield"] == pytest.approx(686.7e3, rel=1e-3)
    assert el.params.A == pytest.approx(k_pre / q_yield)
    assert el.params.beta == pytest.approx(el.params.A / 2)
    assert el.scale == pytest.approx(q_yield * (1 - 0.16))
    # initial tangent of the isolator force k_post*u + scale*z(u) equals k_pre
    tangent0 = sys4.K[0, 0] - 40.0e6 + el.scale * el.params.A
    assert tangent0 == pytest.approx(k_pre, rel=1e-12)
    np.testing.assert_allclose(el.incidence, [1.0, 0.0, 0.0, 0.0])


def test_build_4dof_zeta_s_override():
    sys_default = build_4dof(FOURDOF_MEANS)
    sys_low = build_4dof(FOURDOF_MEANS, zeta_s=0.25)
    assert sys_default.elements[0].params.zeta_s == pytest.approx(0.5)
    assert sys_low.elements[0].params.zeta_s == pytest.approx(0.25)
    assert sys_low.elements[0].params.delta_A == pytest.approx(0.6)


def test_build_4dof_invalid_rk():
    bad = dict(FOURDOF_MEANS, r_k=1.5)
    with pytest.raises(ValueError):
        build_4dof(bad)
    with pytest.raises(ValueError):
        build_4dof({"k_post": 4e6})


# ---------------------------------------------------------------------------
# car builders
# ---------------------------------------------------------------------------

def test_build_half_car_matrices():
    sysc = build_half_car(CAR_MEANS)
    assert sysc.n_dof == 4
    np.testing.assert_allclose(np.diag(sysc.M),
                               [1794.40, 34430.50, 87.15, 140.14])
    assert sysc.C[0, 0] == pytest.approx(2190.0)
    k11 = 66824.0 * 1.27**2 + 18615.0 * 1.72**2
    assert sysc.K[1, 1] == pytest.approx(k11)
    assert k11 == pytest.approx(162856.0, rel=1e-3)
    assert CAR_DEFAULTS.wheelbase == pytest.approx(2.99)
    np.testing.assert_allclose(sysc.K, sysc.K.T)
    np.testing.assert_allclose(sysc.C, sysc.C.T)
    # road channels forced through the tyre stiffnesses on the wheel DOFs
    np.testing.assert_allclose(sysc.excitation_map,
                               [[0, 0], [0, 0], [101115.0, 0], [0, 10111.5]])


def test_build_half_car_elements():
    sysc = build_half_car(CAR_MEANS)
    front, rear = sysc.elements
    q_y_f = 0.015 * (1794.40 + 87.15) * GRAVITY
    q_y_r = 0.015 * (1794.40 + 140.14) * GRAVITY
    assert front.scale == pytest.approx(q_y_f * (1 - 0.1875))
    assert rear.scale == pytest.approx(q_y_r * (1 - 0.1875))
    assert front.params.n_pow == 2.0
    assert front.params.delta_A == pytest.approx(0.02)
    assert front.params.A == pytest.approx(0.1875 * 66824.0 / q_y_f)
    np.testing.assert_allclose(front.incidence, [1.0, 1.27, -1.0, 0.0])
    np.testing.assert_allclose(rear.incidence, [1.0, -1.72, 0.0, -1.0])
    # influence columns are scale * incidence
    L = sysc.hysteretic_influence()
    np.testing.assert_allclose(L[:, 0], front.scale * front.incidence)


def test_build_quarter_car():
    sysq = build_quarter_car(CAR_MEANS)
    np.testing.assert_allclose(sysq.M, np.diag([1794.40, 87.15]))
    np.testing.assert_allclose(
        sysq.K, [[66824.0, -66824.0], [-66824.0, 66824.0 + 101115.0]])
    np.testing.assert_allclose(
        sysq.C, [[1190.0, -1190.0], [-1190.0, 1190.0]])
    assert np.linalg.det(sysq.M) > 0
    # front element identical to the half car's for the same draw
    sysh = build_half_car(CAR_MEANS)
    assert sysq.elements[0].scale == pytest.approx(sysh.elements[0].scale)
    assert sysq.elements[0].params.A == pytest.approx(sysh.elements[0].params.A)
    np.testing.assert_allclose(sysq.excitation_map, [[0.0], [101115.0]])


def test_quarter_car_frequencies_match_closed_form():
    # 2-DOF undamped eigenvalues from the quadratic characteristic polynomial
    sysq = build_quarter_car(CAR_MEANS)
    m1, m2 = np.diag(sysq.M)
    k11, k12 = sysq.K[0]
    k22 = sysq.K[1, 1]
    # det(K - w^2 M) = 0 -> m1 m2 w^4 - (m1 k22 + m2 k11) w^2 + k11 k22 - k12^2
    a = m1 * m2
    b = -(m1 * k22 + m2 * k11)
    c = k11 * k22 - k12**2
    roots = np.sort(np.roots([a, b, c]))
    import scipy.linalg
    eigs = np.sort(scipy.linalg.eigh(sysq.K, sysq.M, eigvals_only=True))
    np.testing.assert_allclose(eigs, roots, rtol=1e-10)


# ---------------------------------------------------------------------------
# shear building and corrosion
# ---------------------------------------------------------------------------

BUILDING_MEANS = {"k_post": 750.0e3, "c_b": 35.0e3, "r_k": 0.1875,
                  "q_y_pct": 5.0}


def test_corrosion_loss_values():
    assert corrosion_loss(CorrosionModel(t_years=0.0)) == 0.0
    assert corrosion_loss(CorrosionModel(t_years=1.0)) == pytest.approx(80.2)
    d50 = corrosion_loss(CorrosionModel(t_years=50.0))
    assert d50 == pytest.approx(80.2 * 50**0.59)
    assert d50 == pytest.approx(806.0, rel=1e-3)


def test_stiffness_retention():
    assert stiffness_retention(0.0) == pytest.approx(1.0)
    # 1 mm loss on a 10 mm section keeps (0.9)^3 of the bending stiffness
    assert stiffness_retention(1000.0, t_ref_mm=10.0) == pytest.approx(0.729)
    with pytest.raises(ValueError):
        stiffness_retention(11_000.0, t_ref_mm=10.0)


def test_build_shear_building_matches_4dof_superstructure():
    sysb = build_shear_building(3, 300e3, 40e6, {"m_b": 500e3},
                                dict(BUILDING_MEANS, k_post=4.0e6,
                                     c_b=20.0e6, r_k=0.16))
    sys4 = build_4dof({"k_post": 4.0e6, "c_b": 20.0e6, "r_k": 0.16,
                       "q_y_pct": 5.0})
    np.testing.assert_allclose(sysb.M, sys4.M)
    np.testing.assert_allclose(sysb.K, sys4.K)


def test_build_shear_building_corrosion_scaling():
    base = {"m_b": 60e3}
    pristine = build_shear_building(11, 40e3, 8.48e7, base, BUILDING_MEANS)
    rusted = build_shear_building(11, 40e3, 8.48e7, base, BUILDING_MEANS,
                                  corrosion=CorrosionModel(t_years=50.0))
    d = corrosion_loss(CorrosionModel(t_years=50.0))
    k_fac = stiffness_retention(d)
    a_fac = 1.0 - d / 10_000.0
    # superstructure blocks scale; the isolator row keeps its xi-driven terms
    np.testing.assert_allclose(rusted.K[1:, 1:], k_fac * pristine.K[1:, 1:],
                               rtol=1e-12)
    np.testing.assert_allclose(np.diag(rusted.M)[1:],
                               a_fac * np.diag(pristine.M)[1:], rtol=1e-12)
    assert rusted.M[0, 0] == pristine.M[0, 0]
    # isolator yield force referenced to the pristine weight in both
    assert rusted.meta["q_yield"] == pytest.approx(pristine.meta["q_yield"])
    assert pristine.meta["q_yield"] == pytest.approx(
        0.05 * (60e3 + 11 * 40e3) * GRAVITY)


def test_build_shear_building_damping_anchors():
    sysb = build_shear_building(11, 40e3, 8.48e7, {"m_b": 60e3},
                                BUILDING_MEANS)
    ray = sysb.meta["rayleigh"]
    assert ray.mode_indices == (1, 10)
    assert ray.damping_ratio == 0.03


def test_build_shear_building_validation():
    with pytest.raises(ValueError):
        build_shear_building(0, 40e3, 8.48e7, {"m_b": 60e3}, BUILDING_MEANS)
    with pytest.raises(ValueError):
        build_shear_building(3, 40e3, 8.48e7, {"m_b": -1.0}, BUILDING_MEANS)


def test_custom_car_constants():
    sym = CarConstants(m_wr=87.15, c_br=1190.0, L_r=1.27)
    xi = dict(CAR_MEANS, k_br=CAR_MEANS["k_bf"], k_wr=CAR_MEANS["k_wf"])
    sysc = build_half_car(xi, car=sym)
    # symmetric geometry kills the heave/pitch coupling entries
    assert sysc.C[0, 1] == pytest.approx(0.0)
    assert sysc.K[0, 1] == pytest.approx(0.0)
    front, rear = sysc.elements
    assert front.scale == pytest.approx(rear.scale)
