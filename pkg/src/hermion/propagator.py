"""Bounded functions of the harmonic oscillator H = -Delta + |x|^2, applied in Hermite coordinates."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .hermite_basis import HermiteField, level_array

# e^{SIGN i t H} solves the linear part of i u_t - H u = 0 when SIGN = -1.
DEFAULT_SIGN = -1


@dataclass(frozen=True)
class SpectralMultiplier:
    """m evaluated on the eigenvalues n = 2k + d of H.

    ``rule`` must accept an integer array of eigenvalues and return an array
    of the same shape. ``bound`` is sup |m|; it is used for the operator norm
    guarantee and checked against the evaluated levels.
    """

    rule: Callable[[np.ndarray], np.ndarray]
    bound: float = float("inf")

    def level_values(self, cutoff: int, dim: int) -> np.ndarray:
        """m(2k+d) for every level k that occurs below the cutoff."""
        eig = 2 * np.arange(dim * (cutoff - 1) + 1) + dim
        vals = np.asarray(self.rule(eig), dtype=complex)
        if np.any(np.abs(vals) > self.bound * (1 + 1e-12)):
            raise ValueError("multiplier exceeds its declared bound")
        return vals


def propagator_multiplier(t: float, sign: int = DEFAULT_SIGN) -> SpectralMultiplier:
    """m(n) = e^{sign i t n}; unimodular."""
    return SpectralMultiplier(lambda n: np.exp(sign * 1j * t * n), bound=1.0)


def apply_multiplier(m: SpectralMultiplier, f: HermiteField) -> HermiteField:
    # only d(N-1)+1 distinct levels exist, so evaluate m once per level
    vals = m.level_values(f.cutoff, f.dim)
    return HermiteField(vals[level_array(f.cutoff, f.dim)] * f.coeffs)


def evolve_linear(f: HermiteField, t: float, sign: int = DEFAULT_SIGN) -> HermiteField:
    """Exact linear flow e^{sign i t H} f."""
    return apply_multiplier(propagator_multiplier(t, sign), f)


def projection(f: HermiteField, k: int) -> HermiteField:
    """P_k f: keep only coefficients with |alpha| = k."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return HermiteField(np.where(f.levels() == k, f.coeffs, 0.0))


def energy_proxy(f: HermiteField) -> float:
    """<Hf, f> = sum (2|alpha|+d) |c_alpha|^2."""
    return float(np.sum((2 * f.levels() + f.dim) * np.abs(f.coeffs) ** 2))
