"""Closed-form 2D vacuum electromagnetics.

Bessel and Hankel functions of orders 0..2, the in-plane Green's tensor of a
line dipole in vacuum, and the isotropically averaged two-dimensional energy
transfer rate. Everything here is evaluated analytically and doubles as the
correctness oracle for the numeric field solver, so it deliberately shares no
code with it: Bessel functions are built from their power series for small
argument and from the large-argument (Hankel) expansion beyond, rather than
taken from a library.
"""

from __future__ import annotations

import math

import numpy as np

from .core import HBAR, MU0, DipoleSpec

EULER_GAMMA = 0.5772156649015328606065120900824024

#: Power series below, large-argument expansion at and above this argument.
SERIES_SWITCH = 12.0


def _check_arg(x: float):
    if not x > 0:
        raise ValueError(f"argument must be positive, got {x}")


def _bessel_j_series(n: int, x: float) -> float:
    # J_n(x) = sum_k (-1)^k (x/2)^(2k+n) / (k! (n+k)!)
    q = 0.25 * x * x
    term = (0.5 * x) ** n / math.factorial(n)
    total = term
    for k in range(1, 200):
        term *= -q / (k * (k + n))
        total += term
        if abs(term) < 1e-18 * (abs(total) + 1e-300):
            break
    return total


def _bessel_y_series(n: int, x: float) -> float:
    # Y_n(x) = (2/pi) ln(x/2) J_n(x) - (1/pi) sum_{k<n} (n-1-k)!/k! (x/2)^(2k-n)
    #          - (1/pi) sum_k (-1)^k [psi(k+1)+psi(n+k+1)] (x/2)^(2k+n) / (k!(n+k)!)
    # with psi(1) = -gamma and psi(m+1) = psi(m) + 1/m.
    q = 0.25 * x * x
    total = (2.0 / math.pi) * math.log(0.5 * x) * _bessel_j_series(n, x)
    for k in range(n):
        total -= (math.factorial(n - 1 - k) / math.factorial(k) / math.pi) * (0.5 * x) ** (2 * k - n)
    psi_a = -EULER_GAMMA                                  # psi(k+1) at k=0
    psi_b = -EULER_GAMMA + sum(1.0 / j for j in range(1, n + 1))  # psi(n+k+1) at k=0
    term = (0.5 * x) ** n / math.factorial(n)
    total -= (psi_a + psi_b) * term / math.pi
    sign = 1.0
    for k in range(1, 200):
        term *= q / (k * (k + n))
        sign = -sign
        psi_a += 1.0 / k
        psi_b += 1.0 / (n + k)
        piece = sign * (psi_a + psi_b) * term / math.pi
        total -= piece
        if abs(term) * (psi_a + psi_b) < 1e-18 * (abs(total) + 1e-300):
            break
    return total


def _jy_asymptotic(n: int, x: float) -> tuple[float, float]:
    """(J_n, Y_n) from the large-argument expansion, truncated at its smallest term."""
    mu = 4.0 * n * n
    p, q = 1.0, 0.0
    term = 1.0
    prev = math.inf
    for k in range(1, 60):
        term *= (mu - (2 * k - 1) ** 2) / (8.0 * k * x)
        if abs(term) >= prev:
            break
        prev = abs(term)
        r = k % 4
        if r == 0:
            p += term
        elif r == 1:
            q += term
        elif r == 2:
            p -= term
        else:
            q -= term
        if abs(term) < 1e-18:
            break
    chi = x - (0.5 * n + 0.25) * math.pi
    amp = math.sqrt(2.0 / (math.pi * x))
    return (amp * (p * math.cos(chi) - q * math.sin(chi)),
            amp * (p * math.sin(chi) + q * math.cos(chi)))


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind, n in {0, 1, 2}, x > 0."""
    if n not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {n}")
    _check_arg(x)
    if x < SERIES_SWITCH:
        return _bessel_j_series(n, x)
    j0, _ = _jy_asymptotic(0, x)
    if n == 0:
        return j0
    j1, _ = _jy_asymptotic(1, x)
    if n == 1:
        return j1
    return (2.0 / x) * j1 - j0  # upward recurrence, stable for x >> n


def bessel_y(n: int, x: float) -> float:
    """Bessel function of the second kind, n in {0, 1, 2}, x > 0."""
    if n not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {n}")
    _check_arg(x)
    if x < SERIES_SWITCH:
        if n < 2:
            return _bessel_y_series(n, x)
        # upward recurrence: Y_n grows with n, so this direction is stable
        return (2.0 / x) * _bessel_y_series(1, x) - _bessel_y_series(0, x)
    y0 = _jy_asymptotic(0, x)[1]
    if n == 0:
        return y0
    y1 = _jy_asymptotic(1, x)[1]
    if n == 1:
        return y1
    return (2.0 / x) * y1 - y0


def hankel(n: int, kind: int, x: float) -> complex:
    """Hankel function H_n^(kind)(x) = J_n(x) +/- i Y_n(x), kind 1 or 2."""
    if kind not in (1, 2):
        raise ValueError(f"kind must be 1 or 2, got {kind}")
    j, y = bessel_j(n, x), bessel_y(n, x)
    return complex(j, y) if kind == 1 else complex(j, -y)


def vacuum_green_2d(r, r_src, omega: float) -> np.ndarray:
    """In-plane 2x2 vacuum Green's tensor of a line dipole.

    G(r, r_src, omega) = (i/4) [H0(k rho) I + grad grad H0(k rho) / k^2]
    decomposed into the longitudinal part (i/4) H1(z)/z along the separation
    direction and the transverse part (i/4) [H0(z) - H1(z)/z], z = k rho.
    Symmetric in its arguments, hence reciprocal by construction.
    """
    dvec = np.asarray(r, dtype=float) - np.asarray(r_src, dtype=float)
    rho = math.hypot(dvec[0], dvec[1])
    if rho < 1e-12:
        raise ValueError("coincident source and observation points")
    z = omega * rho / 1.0  # k = omega / c, c = 1
    h0 = hankel(0, 1, z)
    h1 = hankel(1, 1, z)
    g_long = 0.25j * h1 / z
    g_trans = 0.25j * (h0 - h1 / z)
    u = dvec / rho
    proj = np.outer(u, u)
    return g_long * proj + g_trans * (np.eye(2) - proj)


def vacuum_green_2d_zz(rho: float, omega: float) -> complex:
    """Out-of-plane (scalar) component of the full line-dipole tensor,
    (i/4) H0(k rho); needed only to cross-check the isotropic rate formula."""
    if rho <= 0:
        raise ValueError(f"separation must be positive, got {rho}")
    return 0.25j * hankel(0, 1, omega * rho)


def ret_rate_iso_2d(rho: float, omega: float) -> float:
    """Orientation-averaged 2D energy-transfer rate at separation rho.

    Evaluates (2 pi mu0^2 w^4 / hbar) * (1/16z) * {[2z H0(1) - H1(1)] H0(2)
    + H2(1) H1(2)} with z = w rho / c. The braced combination is real for
    real z; the tiny imaginary round-off residue is dropped.
    """
    if rho <= 0:
        raise ValueError(f"separation must be positive, got {rho}")
    z = omega * rho
    h0_1, h1_1, h2_1 = hankel(0, 1, z), hankel(1, 1, z), hankel(2, 1, z)
    h0_2, h1_2 = hankel(0, 2, z), hankel(1, 2, z)
    braced = (2.0 * z * h0_1 - h1_1) * h0_2 + h2_1 * h1_2
    pref = 2.0 * math.pi * MU0 ** 2 * omega ** 4 / HBAR
    return pref * braced.real / (16.0 * z)


def ret_rate_vacuum(d_a: DipoleSpec, d_d: DipoleSpec) -> float:
    """Fixed-orientation energy-transfer rate between two unit dipoles in vacuum,
    (2 pi mu0^2 w^4 / hbar) |d_A . G(r_A, r_D, w) . d_D|^2. This is the Gamma_0
    used to normalize Purcell factors of fixed-orientation runs."""
    if abs(d_a.omega - d_d.omega) > 1e-12 * d_a.omega:
        raise ValueError(f"donor and acceptor frequencies differ: {d_d.omega} vs {d_a.omega}")
    g = vacuum_green_2d(d_a.pos, d_d.pos, d_d.omega)
    amp = d_a.ori @ g @ d_d.ori
    return 2.0 * math.pi * MU0 ** 2 * d_d.omega ** 4 / HBAR * abs(amp) ** 2
