"""Nonlinear terms: Hartree convolutions, power laws, real-entire series, plus estimate diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.polynomial import polyval2d
from scipy import integrate
from scipy.signal import fftconvolve
from scipy.special import gammainc, gammaln

from .hermite_basis import GridField, HermiteField, QuadratureRule, synthesize, uniform_grid, uniform_rule
from .tf_analysis import TFLattice, modulation_norm

BOUNDARY_TOL = 1e-10


class BoundaryDecayError(ValueError):
    """The field has not decayed at the edge of the convolution box."""


class ExponentRangeError(ValueError):
    """Exponents fall outside the range where the estimate is asserted."""


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hartree:
    """K(x) = lam / |x|^gamma."""

    lam: float
    gamma: float

    def check(self, d: int, global_range: bool = False) -> None:
        if not 0 < self.gamma < d:
            raise ValueError(f"Hartree exponent needs 0 < gamma < d, got gamma={self.gamma}, d={d}")
        if global_range and not self.gamma < min(2.0, d / 2):
            raise ValueError(f"global theory needs gamma < min(2, d/2), got gamma={self.gamma}, d={d}")


@dataclass(frozen=True)
class FourierMultiplier:
    """K given through its unitary Fourier transform; ``func`` maps xi of shape (..., d) to K-hat."""

    func: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"


@dataclass(frozen=True, eq=False)
class GridKernel:
    """K sampled on the box x_j = -L + j h, h = 2L/n, and taken as zero outside it."""

    samples: np.ndarray
    half_width: float

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if not np.all(np.isfinite(s)):
            raise ValueError("grid kernel samples must be finite")
        object.__setattr__(self, "samples", s)


KernelSpec = Hartree | FourierMultiplier | GridKernel


def gaussian_multiplier(width: float, dim: int = 1) -> FourierMultiplier:
    """Unit-mass Gaussian of standard deviation ``width``; tends to a Dirac mass as width -> 0."""
    def func(xi):
        return (2 * math.pi) ** (-dim / 2) * np.exp(-0.5 * width ** 2 * np.sum(xi ** 2, axis=-1))
    return FourierMultiplier(func, name=f"gaussian(width={width})")


def hartree_constant(d: int, gamma: float) -> float:
    """C(d, gamma) with FT(|x|^-gamma) = C |xi|^(gamma - d) for the unitary transform."""
    if not 0 < gamma < d:
        raise ValueError("need 0 < gamma < d")
    return math.exp((d / 2 - gamma) * math.log(2.0) + gammaln((d - gamma) / 2) - gammaln(gamma / 2))


def hartree_kernel_fourier(spec: Hartree, xi) -> float:
    """lam C(d, gamma) |xi|^-(d - gamma) at a nonzero frequency vector (d = len(xi))."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = xi.shape[-1]
    spec.check(d)
    r = float(np.sqrt(np.sum(xi * xi)))
    if r == 0.0:
        raise ZeroDivisionError("the Hartree multiplier is singular at xi = 0")
    return spec.lam * hartree_constant(d, spec.gamma) * r ** (spec.gamma - d)


def _frequency_grid(rules) -> tuple[list, np.ndarray]:
    ks = [2 * math.pi * np.fft.fftfreq(r.size, d=r.dx_weights[0]) for r in rules]
    mesh = np.meshgrid(*ks, indexing="ij")
    return ks, np.stack(mesh, axis=-1)


def pad_factor(d: int) -> int:
    """Padding so that kernel images of the periodic FFT never reach the original box."""
    return 3 if d <= 2 else 4


def padded_rule(rule: QuadratureRule, d: int) -> QuadratureRule:
    """Same step, factor times the width; the original nodes sit in the middle third (or half)."""
    m = pad_factor(d)
    return uniform_rule(m * rule.half_width, m * rule.size)


def _smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    a = np.exp(-1.0 / np.maximum(1.0 - t, 1e-300))
    b = np.exp(-1.0 / np.maximum(t, 1e-300))
    return a / (a + b)


def _radius(axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.sqrt(sum(m * m for m in mesh))


def _hartree_multiplier(spec: Hartree, box: QuadratureRule, pad: QuadratureRule, d: int) -> np.ndarray:
    # |x|^-g = |x|^-g Q(g/2, s0 |x|^2) + |x|^-g P(g/2, s0 |x|^2): the first piece is short range
    # with a closed-form transform, the second is smooth and goes through the FFT of its samples
    g, h = spec.gamma, pad.dx_weights[0]
    a = (d - g) / 2
    c = hartree_constant(d, g)
    s0 = (math.pi / h) ** 2 / 160  # long-range transform ~ e^-40 at the Nyquist frequency
    _, xi = _frequency_grid((pad,) * d)
    r = np.sqrt(np.sum(xi ** 2, axis=-1))
    with np.errstate(divide="ignore"):
        short = np.where(r > 0, c * np.where(r > 0, r, 1.0) ** (g - d) * gammainc(a, r * r / (4 * s0)),
                         c * (4 * s0) ** -a / math.gamma(a + 1))
    x = pad.nodes
    rx = _radius([x] * d)
    with np.errstate(divide="ignore"):
        far = np.where(rx > 0, np.where(rx > 0, rx, 1.0) ** -g * gammainc(g / 2, s0 * rx * rx),
                       s0 ** (g / 2) / math.gamma(g / 2 + 1))
    # keep the kernel exactly on |x| <= box diameter, vanish before images wrap onto the box
    inner = 2 * box.half_width * math.sqrt(d)
    outer = 2 * pad.half_width - 2 * box.half_width
    far = far * _smooth_step((rx - inner) / (outer - inner))
    far_hat = h ** d * np.fft.fftn(np.fft.ifftshift(far))
    return spec.lam * ((2 * math.pi) ** (d / 2) * short + far_hat)


@lru_cache(maxsize=32)
def _cached_multiplier(kernel: KernelSpec, half_width: float, points: int, d: int) -> np.ndarray:
    if points % 2:
        raise ValueError("convolution box needs an even number of points")
    box = uniform_rule(half_width, points)
    pad = padded_rule(box, d)
    if isinstance(kernel, GridKernel):
        if kernel.samples.shape != (points,) * d or not math.isclose(kernel.half_width, half_width):
            raise ValueError("grid kernel must be sampled on the same box as the field")
        off = (pad.size - points) // 2
        wide = np.zeros((pad.size,) * d, dtype=complex)
        wide[(slice(off, off + points),) * d] = kernel.samples
        return box.dx_weights[0] ** d * np.fft.fftn(np.fft.ifftshift(wide))
    if isinstance(kernel, FourierMultiplier):
        _, xi = _frequency_grid((pad,) * d)
        return (2 * math.pi) ** (d / 2) * np.asarray(kernel.func(xi), dtype=complex)
    kernel.check(d)
    return _hartree_multiplier(kernel, box, pad, d)


def convolution_multiplier(kernel: KernelSpec, rules) -> np.ndarray:
    """Array M on the padded box with K * rho = crop(ifftn(M fftn(pad(rho))))."""
    r = rules[0]
    if r.kind != "uniform":
        raise ValueError("convolution needs a uniform box grid")
    return _cached_multiplier(kernel, float(r.half_width), int(r.size), len(rules))


def pad_box(rho: np.ndarray, rules) -> np.ndarray:
    n = rules[0].size
    m = padded_rule(rules[0], len(rules)).size
    off = (m - n) // 2
    out = np.zeros((m,) * rho.ndim, dtype=complex)
    out[(slice(off, off + n),) * rho.ndim] = rho
    return out


def crop_box(values: np.ndarray, rules) -> np.ndarray:
    n = rules[0].size
    off = (values.shape[0] - n) // 2
    return values[(slice(off, off + n),) * values.ndim]


def convolution_spectrum(rho: np.ndarray, kernel: KernelSpec, rules) -> np.ndarray:
    """DFT of K * rho on the padded box."""
    return convolution_multiplier(kernel, rules) * np.fft.fftn(pad_box(rho, rules))


# the cubic term spreads roughly three times wider in frequency than f
TRILINEAR_LATTICE = TFLattice(x_extent=20.0, y_extent=20.0)


def _check_box(u: GridField) -> None:
    if u.kind != "uniform":
        raise ValueError("convolution needs a uniform box grid")
    a = np.abs(u.values)
    peak = a.max(initial=0.0)
    if peak == 0.0:
        return
    edge = max(max(np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max()) for ax in range(a.ndim))
    if edge > BOUNDARY_TOL * peak:
        raise BoundaryDecayError(f"field is {edge / peak:.1e} of its peak at the box edge")


def convolve(rho: np.ndarray, kernel: KernelSpec, rules) -> np.ndarray:
    """Aperiodic K * rho on the box: rho is taken as zero outside it."""
    return crop_box(np.fft.ifftn(convolution_spectrum(rho, kernel, rules)), rules)


def hartree_term(u: GridField, kernel: KernelSpec, k: int = 1) -> GridField:
    """(K * |u|^{2k}) u on the uniform box."""
    _check_box(u)
    if k < 1:
        raise ValueError("k must be a positive integer")
    pot = convolve(np.abs(u.values) ** (2 * k), kernel, u.rules)
    return u.with_values(pot * u.values)


def power_nonlinearity(u, k: int = 1, sign: int = 1):
    """sign |u|^{2k} u pointwise; accepts a GridField or an array."""
    if isinstance(u, GridField):
        return u.with_values(power_nonlinearity(u.values, k, sign))
    u = np.asarray(u)
    return sign * np.abs(u) ** (2 * k) * u


@dataclass(frozen=True)
class KernelSplit:
    low: FourierMultiplier
    high: FourierMultiplier
    low_l1: float
    high_lr: float
    r: float


def kernel_split(spec: Hartree, d: int = 1, r: float | None = None) -> KernelSplit:
    """K-hat = k1 + k2 with k1 = chi_{|xi|<=1} K-hat and k2 = chi_{|xi|>1} K-hat.

    Also reports ||k1||_{L^1} and ||k2||_{L^r} by radial quadrature; r
    defaults to 2 d/(d - gamma), which lies above the threshold d/(d - gamma).
    """
    spec.check(d)
    thresh = d / (d - spec.gamma)
    r = 2 * thresh if r is None else r
    if r <= thresh:
        raise ExponentRangeError(f"||k2||_L^r is infinite unless r > d/(d-gamma) = {thresh:.4g}")
    amp = abs(spec.lam) * hartree_constant(d, spec.gamma)
    sphere = 2 * math.pi ** (d / 2) / math.exp(gammaln(d / 2))

    def khat(xi):
        rad = np.sqrt(np.sum(np.asarray(xi) ** 2, axis=-1))
        with np.errstate(divide="ignore"):
            return spec.lam * hartree_constant(d, spec.gamma) * np.where(rad > 0, rad, np.inf) ** (spec.gamma - d)

    def low(xi):
        rad = np.sqrt(np.sum(np.asarray(xi) ** 2, axis=-1))
        return np.where(rad <= 1.0, khat(xi), 0.0)

    def high(xi):
        rad = np.sqrt(np.sum(np.asarray(xi) ** 2, axis=-1))
        return np.where(rad > 1.0, khat(xi), 0.0)

    a = spec.gamma - d
    low_l1 = sphere * amp * integrate.quad(lambda s: s ** (a + d - 1), 0.0, 1.0)[0]
    high_lr = (sphere * amp ** r * integrate.quad(lambda s: s ** (r * a + d - 1), 1.0, np.inf)[0]) ** (1 / r)
    return KernelSplit(FourierMultiplier(low, "k1"), FourierMultiplier(high, "k2"), low_l1, high_lr, r)


def split_by_level(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """g = f chi_{|f|>1}, h = f chi_{|f|<=1}; g carries the peaks, h the tails."""
    f = np.asarray(f)
    big = np.abs(f) > 1.0
    return np.where(big, f, 0), np.where(big, 0, f)


# ---------------------------------------------------------------------------
# Real-entire nonlinearities
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RealEntireSeries:
    """F(s, t) = sum a_mn s^m t^n applied as F(Re u, Im u); a_00 must vanish.

    ``source`` optionally keeps the full coefficient rule a(m, n) so the
    truncation can be compared with the majorant tail.
    """

    coeffs: np.ndarray
    source: Callable[[int, int], complex] | None = field(default=None, repr=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.coeffs, dtype=complex))
        if a[0, 0] != 0:
            raise ValueError("real-entire nonlinearities must satisfy F(0) = 0")
        object.__setattr__(self, "coeffs", a)

    @property
    def degree(self) -> int:
        nz = np.argwhere(self.coeffs != 0)
        return int(nz.sum(axis=1).max()) if len(nz) else 0

    def __call__(self, u):
        if isinstance(u, GridField):
            return u.with_values(self(u.values))
        u = np.asarray(u, dtype=complex)
        return polyval2d(u.real, u.imag, self.coeffs)

    def majorant(self, s, t):
        """F-tilde: the same series with |a_mn|."""
        return polyval2d(np.asarray(s, float), np.asarray(t, float), np.abs(self.coeffs))

    def derivative_majorant(self, s, t):
        """(d_s F)~ + (d_t F)~, the factor in the Lipschitz estimate."""
        a = np.abs(self.coeffs)
        m = np.arange(a.shape[0])[:, None]
        n = np.arange(a.shape[1])[None, :]
        ds = (m * a)[1:, :]
        dt = (n * a)[:, 1:]
        return polyval2d(np.asarray(s, float), np.asarray(t, float), ds) + \
            polyval2d(np.asarray(s, float), np.asarray(t, float), dt)

    def tail_bound(self, s: float, t: float, extra: int = 12) -> float:
        """Majorant of the discarded terms of total degree deg+1 .. deg+extra."""
        if self.source is None:
            return 0.0
        # every rule term of total degree <= self.degree is kept, so the tail starts right after it
        deg = self.degree
        total = 0.0
        for tot in range(deg + 1, deg + extra + 1):
            for m in range(tot + 1):
                total += abs(self.source(m, tot - m)) * s ** m * t ** (tot - m)
        return total

    @classmethod
    def from_callable(cls, rule: Callable[[int, int], complex], degree: int = 12) -> "RealEntireSeries":
        a = np.zeros((degree + 1, degree + 1), dtype=complex)
        for m in range(degree + 1):
            for n in range(degree + 1 - m):
                if m or n:
                    a[m, n] = rule(m, n)
        return cls(a, source=rule)

    @classmethod
    def from_power(cls, k: int = 1, sign: int = 1, coupling: float = 1.0) -> "RealEntireSeries":
        """sign |u|^{2k} u = sign (s^2 + t^2)^k (s + i t)."""
        a = np.zeros((2 * k + 2, 2 * k + 2), dtype=complex)
        for j in range(k + 1):
            c = sign * coupling * math.comb(k, j)
            a[2 * j + 1, 2 * (k - j)] += c
            a[2 * j, 2 * (k - j) + 1] += 1j * c
        return cls(a)


def real_entire_apply(series: RealEntireSeries, u):
    return series(u)


# ---------------------------------------------------------------------------
# Estimate diagnostics
# ---------------------------------------------------------------------------

def _riesz_weights_1d(gamma: float, h: float, m: int) -> np.ndarray:
    """w_j = int |y|^-gamma hat_j(y) dy for j = -m..m (hat functions of width h)."""
    j = np.arange(m + 1, dtype=float)
    w = np.empty(m + 1)
    g = gamma
    w[0] = 2.0 * (1 / (1 - g) - 1 / (2 - g))

    def p1(s):
        return s ** (1 - g) / (1 - g)

    def p2(s):
        return s ** (2 - g) / (2 - g)

    exact = j[1:min(m, 64) + 1]
    left = p2(exact) - p2(exact - 1) - (exact - 1) * (p1(exact) - p1(exact - 1))
    right = (exact + 1) * (p1(exact + 1) - p1(exact)) - (p2(exact + 1) - p2(exact))
    w[1:len(exact) + 1] = left + right
    far = j[len(exact) + 1:]
    # hat second moment is 1/6, so the midpoint value gets a curvature correction
    w[len(exact) + 1:] = far ** -g * (1 + g * (g + 1) / (12 * far * far))
    w *= h ** (1 - g)
    return np.concatenate([w[:0:-1], w])


def riesz_potential(f: GridField, gamma: float, outer_radius: float | None = None) -> tuple[np.ndarray, float, complex]:
    """|x|^-gamma * f on a zero-padded 1D grid by product integration.

    Returns (values on [-R, R], step, total mass of f) where the mass drives
    the far-field asymptote |x|^-gamma * int f.
    """
    if f.dim != 1 or f.kind != "uniform":
        raise ValueError("riesz_potential works on 1D uniform grids")
    r = f.rules[0]
    h = r.dx_weights[0]
    radius = outer_radius or max(8 * r.half_width, 200.0)
    n_out = int(round(radius / h))
    x_out = h * np.arange(-n_out, n_out + 1)
    # embed f's samples into the wide grid (both share the step h)
    offset = int(round((r.nodes[0] - x_out[0]) / h))
    wide = np.zeros(len(x_out), dtype=complex)
    wide[offset:offset + r.size] = f.values
    weights = _riesz_weights_1d(gamma, h, 2 * n_out)
    full = fftconvolve(wide, weights)
    pot = full[2 * n_out:2 * n_out + len(x_out)]
    return pot, h, complex(np.sum(f.values) * h)


def hls_ratio(f: GridField, gamma: float, p: float, outer_radius: float | None = None) -> float:
    """|| |x|^-gamma * f ||_{L^q} / ||f||_{L^p} with 1/q = 1/p + gamma/d - 1.

    The far field beyond the padded box is added analytically from the
    asymptote |x|^-gamma int f.
    """
    d = f.dim
    if not 0 < gamma < d:
        raise ExponentRangeError("need 0 < gamma < d")
    inv_q = 1 / p + gamma / d - 1
    if not (p > 1 and 0 < inv_q < 1 / p):
        raise ExponentRangeError(f"no admissible q for p={p}, gamma={gamma}, d={d}")
    q = 1 / inv_q
    pot, h, mass = riesz_potential(f, gamma, outer_radius)
    radius = h * (len(pot) // 2)
    body = np.sum(np.abs(pot) ** q) * h
    tail = 2 * abs(mass) ** q * radius ** (1 - gamma * q) / (gamma * q - 1)
    return float((body + tail) ** (1 / q)) / f.lp_norm(p)


def _check_trilinear_range(kernel: KernelSpec, p: float, q: float, k: int, d: int) -> None:
    if isinstance(kernel, Hartree):
        kernel.check(d)
        if k != 1:
            raise ExponentRangeError("the Hartree estimate is cubic (k = 1)")
        if not (1 <= p <= 2 and 1 <= q < 2 * d / (d + kernel.gamma)):
            raise ExponentRangeError(
                f"Hartree estimate needs 1 <= p <= 2 and 1 <= q < {2 * d / (d + kernel.gamma):.4g}")
    elif not (q == 1 and p >= 1) and not (k == 1 and 1 <= p <= 2 and 1 <= q < 2):
        raise ExponentRangeError("kernel estimate needs q = 1, or k = 1 with 1 <= p <= 2, 1 <= q < 2")


@dataclass(frozen=True)
class BoxSpec:
    half_width: float = 14.0
    points: int = 256

    def rules(self, d: int):
        return uniform_grid(self.half_width, self.points, d)


def nonlinear_grid(f: HermiteField, kernel: KernelSpec, k: int, box: BoxSpec) -> GridField:
    u = synthesize(f, box.rules(f.dim))
    return hartree_term(u, kernel, k)


def trilinear_ratio(f: HermiteField, p: float, q: float, kernel: KernelSpec, k: int = 1,
                    lat: TFLattice | None = None, box: BoxSpec = BoxSpec()) -> float:
    """||(K * |f|^{2k}) f||_{M^{p,q}} / ||f||_{M^{p,q}}^{2k+1}."""
    _check_trilinear_range(kernel, p, q, k, f.dim)
    lat = lat or (TRILINEAR_LATTICE if f.dim == 1 else TFLattice(dim=f.dim))
    if f.l2_norm() == 0.0:
        raise ValueError("ratio undefined for the zero field")
    num = modulation_norm(nonlinear_grid(f, kernel, k, box), p, q, lat)
    return num / modulation_norm(f, p, q, lat) ** (2 * k + 1)


def lipschitz_ratio(f: HermiteField, g: HermiteField, p: float, q: float, kernel: KernelSpec, k: int = 1,
                    lat: TFLattice | None = None, box: BoxSpec = BoxSpec()) -> float:
    """||N(f) - N(g)|| / ((sum_j ||f||^{2k-j} ||g||^j) ||f - g||) in M^{p,q}, N(u) = (K * |u|^{2k}) u."""
    _check_trilinear_range(kernel, p, q, k, f.dim)
    lat = lat or (TRILINEAR_LATTICE if f.dim == 1 else TFLattice(dim=f.dim))
    nf = nonlinear_grid(f, kernel, k, box)
    ng = nonlinear_grid(g, kernel, k, box)
    num = modulation_norm(nf.with_values(nf.values - ng.values), p, q, lat)
    a, b = modulation_norm(f, p, q, lat), modulation_norm(g, p, q, lat)
    poly = sum(a ** (2 * k - j) * b ** j for j in range(2 * k + 1))
    return num / (poly * modulation_norm(f - g, p, q, lat))
