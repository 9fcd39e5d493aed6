"""Closed-form electromagnetics against independent oracles.

Frozen expected values come from arbitrary-precision power-series /
finite-difference evaluation (mpmath), computed before the implementation and
pinned here; sweeps re-derive the oracle values on the fly.
"""

import math

import mpmath as mp
import numpy as np
import pytest

from retopt.analytic2d import (bessel_j, bessel_y, hankel, ret_rate_iso_2d,
                               ret_rate_vacuum, vacuum_green_2d)
from retopt.core import DipoleSpec

from oracles import iso_rate_by_quadrature

mp.mp.dps = 30

# power-series oracle values, frozen
J0_AT_1 = 0.7651976865579666
Y0_AT_1 = 0.0882569642156770
# transverse/longitudinal vacuum tensor at zeta = 1, from the finite-difference
# oracle applied to (i/4) H0 (5-point stencils, h = 1e-6, mpmath precision)
G_T_AT_1 = -0.217367446378991419 + 0.0812867752032582589j
G_L_AT_1 = 0.195303205325072179 + 0.110012646436233379j
# fixed-orientation vacuum rate at separation lambda/2 for lambda = pi
GAMMA0_HALF_LAMBDA = 1.2676342091182261


def test_bessel_j_frozen_value():
    assert bessel_j(0, 1.0) == pytest.approx(J0_AT_1, rel=1e-12)


def test_bessel_y_frozen_value():
    assert bessel_y(0, 1.0) == pytest.approx(Y0_AT_1, rel=1e-12)


def test_bessel_j1_vanishes_at_origin():
    assert abs(bessel_j(1, 1e-12)) < 1e-10
    assert bessel_j(1, 1e-6) == pytest.approx(0.5e-6, rel=1e-6)


@pytest.mark.parametrize("fn", [bessel_j, bessel_y])
def test_bessel_domain_errors(fn):
    with pytest.raises(ValueError):
        fn(0, 0.0)
    with pytest.raises(ValueError):
        fn(1, -2.0)
    with pytest.raises(ValueError):
        fn(3, 1.0)


def test_hankel_kinds_and_identities():
    for x in (0.07, 0.9, 4.0, 30.0):
        for n in (0, 1, 2):
            h1, h2 = hankel(n, 1, x), hankel(n, 2, x)
            assert h1 + h2 == 2.0 * bessel_j(n, x)
            assert h1.conjugate() == h2
    with pytest.raises(ValueError):
        hankel(0, 3, 1.0)
    with pytest.raises(ValueError):
        hankel(0, 1, 0.0)


def test_hankel_frozen_value():
    h = hankel(0, 1, 1.0)
    assert h.real == pytest.approx(J0_AT_1, rel=1e-12)
    assert h.imag == pytest.approx(Y0_AT_1, rel=1e-12)


def test_bessel_accuracy_sweep_against_mpmath():
    """1e-10 relative accuracy across [1e-3, 1e3].

    Right at a zero crossing of J or Y the pointwise relative error is
    ill-conditioned for any fixed-precision evaluation, so points within 1%
    of a sign change are judged against the local Hankel amplitude instead;
    |H_n| never vanishes, so that comparison is uniformly meaningful.
    """
    xs = np.logspace(-3, 3, 181)
    for n in (0, 1, 2):
        for x in xs:
            x = float(x)
            exact_j = float(mp.besselj(n, x))
            exact_y = float(mp.bessely(n, x))
            amp = abs(complex(exact_j, exact_y))
            for got, exact in ((bessel_j(n, x), exact_j), (bessel_y(n, x), exact_y)):
                if abs(exact) > 0.01 * amp:
                    assert abs(got - exact) <= 1e-10 * abs(exact), (n, x)
                else:
                    assert abs(got - exact) <= 1e-10 * amp, (n, x)


def test_hankel_wronskian_identity():
    for x in np.linspace(0.1, 100.0, 797):
        x = float(x)
        rhs = -4j / (math.pi * x)
        for n in (0, 1):
            lhs = (hankel(n + 1, 1, x) * hankel(n, 2, x)
                   - hankel(n, 1, x) * hankel(n + 1, 2, x))
            assert abs(lhs - rhs) <= 1e-10 * abs(rhs), (n, x)


def test_vacuum_green_axis_separation_is_diagonal():
    g = vacuum_green_2d((2.0, 0.0), (0.3, 0.0), 1.7)
    assert g[0, 1] == 0.0
    assert g[1, 0] == 0.0


def test_vacuum_green_reciprocity_bitwise():
    r1, r2 = (0.3, -0.9), (1.4, 0.55)
    g12 = vacuum_green_2d(r1, r2, 2.0)
    g21 = vacuum_green_2d(r2, r1, 2.0)
    assert np.array_equal(g12, g21.T)
    assert np.array_equal(g12, g12.T)


def test_vacuum_green_components_at_unit_argument():
    # omega = 1, separation 1 along x: longitudinal = xx, transverse = yy
    g = vacuum_green_2d((1.0, 0.0), (0.0, 0.0), 1.0)
    assert g[0, 0] == pytest.approx(G_L_AT_1, rel=1e-12)
    assert g[1, 1] == pytest.approx(G_T_AT_1, rel=1e-12)


def test_vacuum_green_against_finite_difference_oracle():
    """Re-derive both tensor components by differentiating (i/4)H0 numerically."""
    omega, rho = 1.3, 1.7
    h = 1e-3  # balances stencil truncation (h^4) against roundoff (eps/h^2)

    def g0(r):
        return 0.25j * hankel(0, 1, omega * r)

    gp = (g0(rho - 2 * h) - 8 * g0(rho - h) + 8 * g0(rho + h) - g0(rho + 2 * h)) / (12 * h)
    gpp = (-g0(rho - 2 * h) + 16 * g0(rho - h) - 30 * g0(rho) + 16 * g0(rho + h)
           - g0(rho + 2 * h)) / (12 * h * h)
    g_t_fd = g0(rho) + gp / (omega ** 2 * rho)
    g_l_fd = g0(rho) + gpp / omega ** 2
    g = vacuum_green_2d((rho, 0.0), (0.0, 0.0), omega)
    assert g[0, 0] == pytest.approx(g_l_fd, rel=1e-8)
    assert g[1, 1] == pytest.approx(g_t_fd, rel=1e-8)


def test_vacuum_green_coincidence_error():
    with pytest.raises(ValueError):
        vacuum_green_2d((1.0, 1.0), (1.0, 1.0 + 1e-14), 2.0)


def test_iso_rate_braced_expression_is_real():
    for zeta in np.geomspace(0.1, 50.0, 120):
        z = float(zeta)
        braced = ((2 * z * hankel(0, 1, z) - hankel(1, 1, z)) * hankel(0, 2, z)
                  + hankel(2, 1, z) * hankel(1, 2, z))
        assert abs(braced.imag) <= 1e-12 * abs(braced)


def test_iso_rate_matches_two_angle_quadrature():
    omega = 1.0
    for zeta in (0.1, 0.35, 1.0, 3.7, 11.0, 50.0):
        direct = ret_rate_iso_2d(zeta / omega, omega)
        brute = iso_rate_by_quadrature(zeta / omega, omega)
        assert direct == pytest.approx(brute, rel=1e-8), zeta


def test_iso_rate_frozen_value_and_far_field_decay():
    # frozen from the arbitrary-precision evaluation of the printed formula
    assert ret_rate_iso_2d(1.0, 1.0) == pytest.approx(0.8870888183836670, rel=1e-12)
    assert ret_rate_iso_2d(40.0, 1.0) < ret_rate_iso_2d(4.0, 1.0)
    with pytest.raises(ValueError):
        ret_rate_iso_2d(0.0, 1.0)


def test_ret_rate_vacuum_frozen_value():
    omega = 2.0  # lambda = pi
    d_d = DipoleSpec((0.0, 0.0), (0.0, 1.0), omega)
    d_a = DipoleSpec((math.pi / 2.0, 0.0), (0.0, 1.0), omega)
    assert ret_rate_vacuum(d_a, d_d) == pytest.approx(GAMMA0_HALF_LAMBDA, rel=1e-12)


def test_ret_rate_vacuum_swap_symmetry():
    omega = 2.0
    d_d = DipoleSpec((0.1, -0.4), (0.6, 0.8), omega)
    d_a = DipoleSpec((1.3, 0.7), (-1.0, 0.0), omega)
    assert ret_rate_vacuum(d_a, d_d) == pytest.approx(ret_rate_vacuum(d_d, d_a), rel=1e-14)


def test_ret_rate_vacuum_orthogonal_channel_is_zero():
    omega = 2.0
    d_d = DipoleSpec((0.0, 0.0), (1.0, 0.0), omega)   # along the separation axis
    d_a = DipoleSpec((1.1, 0.0), (0.0, 1.0), omega)   # perpendicular to it
    assert ret_rate_vacuum(d_a, d_d) == 0.0


def test_ret_rate_vacuum_frequency_mismatch():
    d_d = DipoleSpec((0.0, 0.0), (1.0, 0.0), 2.0)
    d_a = DipoleSpec((1.0, 0.0), (1.0, 0.0), 2.1)
    with pytest.raises(ValueError):
        ret_rate_vacuum(d_a, d_d)
