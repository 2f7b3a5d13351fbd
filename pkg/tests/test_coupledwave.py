"""Closed-form probe-pair solution, limit formulas and threshold finder."""

import cmath

import numpy as np
import pytest

from lcq import coupledwave as cw


def ode_oracle(c, b, L, steps=20000):
    """RK4 integration of the reduced two-field equations."""
    y = np.array([complex(b.e40), np.conj(complex(b.e20))])
    h = L / steps
    g2c = np.conj(c.gamma2)

    def f(z, y):
        return np.array([
            -0.5 * c.alpha4 * y[0] + 1j * c.gamma4 * np.exp(1j * c.delta_k * z) * y[1],
            -0.5 * c.alpha2 * y[1] - 1j * g2c * np.exp(-1j * c.delta_k * z) * y[0],
        ])

    z = 0.0
    for _ in range(steps):
        k1 = f(z, y)
        k2 = f(z + h / 2, y + h / 2 * k1)
        k3 = f(z + h / 2, y + h / 2 * k2)
        k4 = f(z + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        z += h
    return y


def random_coefficients(rng, delta_k=None, scale=1.0):
    return cw.OpaCoefficients(
        alpha4=rng.uniform(-1, 1) * scale,
        alpha2=rng.uniform(-1, 1) * scale,
        delta_k=rng.uniform(-1, 1) * scale if delta_k is None else delta_k,
        gamma4=complex(rng.normal(), rng.normal()) * 0.5 * scale,
        gamma2=complex(rng.normal(), rng.normal()) * 0.5 * scale,
    )


def test_boundary_identity():
    rng = np.random.default_rng(1)
    for _ in range(5):
        c = random_coefficients(rng)
        b = cw.BoundaryAmplitudes(complex(rng.normal(), rng.normal()),
                                  complex(rng.normal(), rng.normal()))
        e4, e2c = cw.opa_solution(c, b, 0.0)
        assert e4 == complex(b.e40)
        assert e2c == np.conj(complex(b.e20))


def test_beer_lambert_without_coupling():
    c = cw.OpaCoefficients(alpha4=0.7, alpha2=0.25, delta_k=0.4, gamma4=0.0, gamma2=0.0)
    b = cw.BoundaryAmplitudes(1.3 - 0.2j, 0.5 + 0.1j)
    for z in (0.5, 3.0, 12.0):
        e4, e2c = cw.opa_solution(c, b, z)
        assert abs(e4) ** 2 / abs(b.e40) ** 2 == pytest.approx(np.exp(-0.7 * z), rel=1e-12)
        assert abs(e2c) ** 2 / abs(b.e20) ** 2 == pytest.approx(np.exp(-0.25 * z), rel=1e-12)


def test_matches_ode_oracle():
    rng = np.random.default_rng(42)
    for _ in range(12):
        c = random_coefficients(rng)
        b = cw.BoundaryAmplitudes(complex(rng.normal(), rng.normal()),
                                  complex(rng.normal(), rng.normal()))
        e4, e2c = cw.opa_solution(c, b, 7.0)
        ref = ode_oracle(c, b, 7.0)
        assert abs(e4 - ref[0]) / max(abs(ref[0]), 1e-12) < 1e-8
        assert abs(e2c - ref[1]) / max(abs(ref[1]), 1e-12) < 1e-8


def test_ode_residual():
    # the closed form satisfies the reduced equations pointwise (central
    # differences against the analytic right-hand side)
    rng = np.random.default_rng(9)
    for _ in range(100):
        c = random_coefficients(rng)
        b = cw.BoundaryAmplitudes(complex(rng.normal(), rng.normal()),
                                  complex(rng.normal(), rng.normal()))
        z = rng.uniform(0.3, 8.0)
        h = 1e-5
        e4m, e2m = cw.opa_solution(c, b, z - h)
        e4p, e2p = cw.opa_solution(c, b, z + h)
        e4, e2c = cw.opa_solution(c, b, z)
        d4 = (e4p - e4m) / (2 * h)
        d2 = (e2p - e2m) / (2 * h)
        rhs4 = -0.5 * c.alpha4 * e4 + 1j * c.gamma4 * cmath.exp(1j * c.delta_k * z) * e2c
        rhs2 = -0.5 * c.alpha2 * e2c - 1j * np.conj(c.gamma2) * cmath.exp(-1j * c.delta_k * z) * e4
        scale = max(abs(d4), abs(d2), 1e-9)
        assert abs(d4 - rhs4) / scale < 1e-6
        assert abs(d2 - rhs2) / scale < 1e-6


def test_branch_invariance():
    # the solution depends on R only through even combinations; evaluating
    # the split-exponent form with the negated root is bit-identical
    rng = np.random.default_rng(5)
    for _ in range(20):
        c = random_coefficients(rng)
        b = cw.BoundaryAmplitudes(complex(rng.normal(), rng.normal()),
                                  complex(rng.normal(), rng.normal()))
        z = rng.uniform(0.5, 6.0)
        R = c.big_r
        beta = c.beta

        def split_form(Rsign):
            lam_p = -0.5 * c.alpha4 + beta + Rsign
            lam_m = -0.5 * c.alpha4 + beta - Rsign
            bR = beta / Rsign
            e40 = complex(b.e40)
            e20c = np.conj(complex(b.e20))
            return 0.5 * (e40 * (np.exp(lam_p * z) * (1 - bR) + np.exp(lam_m * z) * (1 + bR))
                          + 1j * c.gamma4 * e20c * (np.exp(lam_p * z) - np.exp(lam_m * z)) / Rsign)

        assert split_form(R) == split_form(-R)


def test_degenerate_root_limit():
    # R -> 0: sinh(Rz)/R -> z handled analytically
    c = cw.OpaCoefficients(alpha4=0.3, alpha2=0.3, delta_k=0.0,
                           gamma4=1e-9j, gamma2=1e-9j)
    assert abs(c.big_r) < 1e-8
    b = cw.BoundaryAmplitudes(1.0, 0.7)
    e4, e2c = cw.opa_solution(c, b, 4.0)
    ref = ode_oracle(c, b, 4.0, steps=4000)
    assert abs(e4 - ref[0]) / abs(ref[0]) < 1e-10
    assert abs(e2c - ref[1]) / abs(ref[1]) < 1e-10


def test_overflow_safe_for_large_rz():
    # strong absorption with weak coupling: the naive cosh form overflows at
    # |Rz| ~ 700 while the factored evaluation stays finite
    c = cw.OpaCoefficients(alpha4=3.0, alpha2=3.0, delta_k=0.0, gamma4=1.0, gamma2=1.0)
    b = cw.BoundaryAmplitudes(1.0, 0.0)
    z = 1500.0
    assert abs(c.big_r) * z > 700
    e4, e2c = cw.opa_solution(c, b, z)
    assert np.isfinite(abs(e4)) and np.isfinite(abs(e2c))
    # eigen-exponent of the growing mode: -alpha/2 + R = -0.5
    assert abs(e4) < np.exp(-0.4 * z)


def test_composition_property():
    # with vanishing phase mismatch the solution is a transfer matrix:
    # propagating to z1 and then z2 equals propagating to z1+z2
    rng = np.random.default_rng(31)
    for _ in range(10):
        c = random_coefficients(rng, delta_k=0.0)
        b = cw.BoundaryAmplitudes(complex(rng.normal(), rng.normal()),
                                  complex(rng.normal(), rng.normal()))
        z1, z2 = rng.uniform(0.3, 3.0, 2)
        e4_mid, e2c_mid = cw.opa_solution(c, b, z1)
        direct4, direct2 = cw.opa_solution(c, b, z1 + z2)
        stage = cw.BoundaryAmplitudes(e4_mid, np.conj(e2c_mid))
        again4, again2 = cw.opa_solution(c, stage, z2)
        assert abs(again4 - direct4) <= 1e-10 * max(abs(direct4), 1.0)
        assert abs(again2 - direct2) <= 1e-10 * max(abs(direct2), 1.0)


def test_lossless_conservation():
    # alpha = 0, dk = 0, equal real couplings: |E4|^2 - |E2|^2 is conserved
    c = cw.OpaCoefficients(0.0, 0.0, 0.0, 0.37, 0.37)
    b = cw.BoundaryAmplitudes(1.1 - 0.2j, 0.3 + 0.5j)
    zs = np.linspace(0.0, 10.0, 201)
    e4, e2c = cw.opa_solution(c, b, zs)
    inv = np.abs(e4) ** 2 - np.abs(e2c) ** 2
    assert np.max(np.abs(inv - inv[0])) < 1e-9


def test_gain_limit_formula_no_coupling():
    c = cw.OpaCoefficients(alpha4=0.6, alpha2=0.2, delta_k=0.0, gamma4=0.0, gamma2=0.0)
    val, valid = cw.fwm_gain_limit(c, 5.0)
    assert val == pytest.approx(np.exp(-0.6 * 5.0), rel=1e-12)
    assert valid


def test_gain_limit_matches_full_solution():
    # perturbative coupling, moderate conversion: 1 percent agreement
    c = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.0,
                           gamma4=0.02, gamma2=0.02)
    assert abs(c.gamma_sq) / abs(c.beta) ** 2 <= 1e-2
    for L in (2.0, 5.0, 10.0):
        val, valid = cw.fwm_gain_limit(c, L)
        assert valid
        e4, _ = cw.opa_solution(c, cw.BoundaryAmplitudes(1.0, 0.0), L)
        assert abs(val - abs(e4) ** 2) / abs(e4) ** 2 < 1e-2


def test_gain_limit_dominant_term_growth():
    # with Stokes gain the transmitted intensity grows with the square of
    # the amplified term: log slope approaches g2 = -alpha2
    c = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.0,
                           gamma4=0.01, gamma2=0.01)
    lengths = np.array([60.0, 80.0, 100.0])
    vals = np.array([cw.fwm_gain_limit(c, L)[0] for L in lengths])
    slopes = np.diff(np.log(vals)) / np.diff(lengths)
    assert slopes[-1] == pytest.approx(0.5, rel=1e-2)


def test_gain_limit_validity_flag_and_errors():
    c = cw.OpaCoefficients(alpha4=0.2, alpha2=0.1, delta_k=0.0, gamma4=0.5, gamma2=0.5)
    _, valid = cw.fwm_gain_limit(c, 1.0)
    assert not valid  # strong coupling
    c2 = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.3, gamma4=0.01, gamma2=0.01)
    _, valid2 = cw.fwm_gain_limit(c2, 1.0)
    assert not valid2  # phase mismatched
    degenerate = cw.OpaCoefficients(alpha4=0.5, alpha2=0.5, delta_k=0.0,
                                    gamma4=0.1, gamma2=0.1)
    with pytest.raises(ZeroDivisionError):
        cw.fwm_gain_limit(degenerate, 1.0)
    with pytest.raises(ZeroDivisionError):
        cw.eta4_conversion(degenerate, 1.0)


def test_eta4_limits():
    c = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.0, gamma4=0.0, gamma2=0.02)
    assert cw.eta4_conversion(c, 5.0)[0] == 0.0
    c2 = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.0, gamma4=0.02, gamma2=0.02)
    assert cw.eta4_conversion(c2, 0.0)[0] == 0.0


def test_eta4_matches_full_solution():
    c = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.0,
                           gamma4=0.02, gamma2=0.02)
    for L in (2.0, 5.0, 10.0):
        val, valid = cw.eta4_conversion(c, L)
        assert valid
        e4, _ = cw.opa_solution(c, cw.BoundaryAmplitudes(0.0, 1.0), L)
        assert abs(val - abs(e4) ** 2) / max(abs(e4) ** 2, 1e-12) < 1e-2


def test_threshold_pure_loss_and_pure_gain():
    lossy = cw.OpaCoefficients(0.5, 0.5, 0.0, 0.01, 0.01)
    assert cw.oscillation_threshold(lossy) is None
    lossless = cw.OpaCoefficients(0.0, 0.0, 0.0, 0.5, 0.5)
    assert cw.oscillation_threshold(lossless) == 0.0


def test_threshold_against_dense_scan():
    c = cw.OpaCoefficients(alpha4=0.8, alpha2=-0.5, delta_k=0.0,
                           gamma4=0.25, gamma2=0.25)
    found = cw.oscillation_threshold(c, L_max=60.0, tol=1e-6)
    grid = np.arange(1e-4, 60.0, 1e-4)
    e4, _ = cw.opa_solution(c, cw.BoundaryAmplitudes(1.0, 0.0), grid)
    idx = np.nonzero(np.abs(e4) ** 2 >= 1.0)[0]
    assert idx.size > 0
    assert abs(found - grid[idx[0]]) < 2e-4


def test_from_macroscopic_wiring():
    from lcq.doppler import MacroscopicCoefficients
    mc = MacroscopicCoefficients(
        alpha1=0.1, alpha2=-0.3, alpha3=0.05, alpha4=0.7,
        deltak1=0.01, deltak2=0.02, deltak3=0.03, deltak4=0.04,
        gamma4=0.1 + 0.2j, gamma2=0.05 - 0.1j,
    )
    c = cw.OpaCoefficients.from_macroscopic(mc)
    assert c.alpha4 == 0.7 and c.alpha2 == -0.3
    assert c.delta_k == pytest.approx(0.01 + 0.03 - 0.02 - 0.04)
    assert c.gamma4 == 0.1 + 0.2j and c.gamma2 == 0.05 - 0.1j
    assert abs(c.big_r**2 - c.beta**2 - c.gamma_sq) <= 1e-12 * abs(c.big_r**2)
