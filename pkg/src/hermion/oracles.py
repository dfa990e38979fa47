"""Independent numerical references used by the verification suite."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import jv

MOLLIFIER_WIDTHS = (4e-3, 2e-3, 1e-3)


def mollified_radial_transform(gamma: float, d: int, rho: float, eps: float) -> float:
    """Unitary Fourier transform of |x|^-gamma exp(-eps |x|^2) at |xi| = rho.

    Radial reduction: rho^(1 - d/2) int_0^inf f(r) J_{d/2-1}(rho r) r^(d/2) dr,
    integrated piecewise over half-periods of the Bessel oscillation.
    """
    nu = d / 2 - 1
    r_max = math.sqrt(45.0 / eps)

    def integrand(r):
        return r ** (d / 2 - gamma) * math.exp(-eps * r * r) * jv(nu, rho * r)

    step = math.pi / rho
    edges = np.arange(0.0, r_max + step, step)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += integrate.quad(integrand, a, b, epsabs=0.0, epsrel=1e-11, limit=200)[0]
    return rho ** (1 - d / 2) * total


def mollified_kernel_constant(gamma: float, d: int, rho: float,
                              widths: tuple = MOLLIFIER_WIDTHS) -> tuple[float, float]:
    """Estimate C(d, gamma) = rho^(d - gamma) FT(|x|^-gamma)(rho) via eps -> 0.

    The mollified transform is a power series in eps at fixed rho != 0, so
    three widths in ratio 2 allow quadratic Richardson extrapolation.
    Returns (estimate, |estimate - linear extrapolation|) as an error bar.
    """
    e1, e2, e3 = widths
    if not (math.isclose(e1, 2 * e2) and math.isclose(e2, 2 * e3)):
        raise ValueError("widths must halve successively")
    f1, f2, f3 = (mollified_radial_transform(gamma, d, rho, e) for e in widths)
    lin_a, lin_b = 2 * f2 - f1, 2 * f3 - f2
    quad = (4 * lin_b - lin_a) / 3
    scale = rho ** (d - gamma)
    return quad * scale, abs(quad - lin_b) * scale


def gaussian_moment(j: int) -> float:
    """int x^j exp(-x^2) dx."""
    if j % 2:
        return 0.0
    return math.gamma((j + 1) / 2)
