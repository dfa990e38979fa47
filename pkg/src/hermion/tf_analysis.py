"""Short-time Fourier transform, Fourier-Wigner transform and discrete modulation-space norms.

Conventions: V_g f(x, y) = (2 pi)^{-d/2} int f(t) conj(g(t - x)) e^{-i y.t} dt
with x the space variable and y the frequency variable; the Gaussian window
g(t) = (pi s^2)^{-d/4} e^{-|t|^2 / (2 s^2)} has unit L2 norm. Mixed norms take
L^p in x first and then L^q in y, with plain Riemann weights on the lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .hermite_basis import GridField, HermiteField, hermite_functions, synthesize, uniform_grid

DECAY_TOL = 1e-10


class LatticeExtentError(ValueError):
    """The STFT has not decayed at the lattice boundary."""


class UnderResolvedQuadrature(ValueError):
    """The spatial grid is too coarse for the lattice's frequency range."""


@dataclass(frozen=True)
class TFLattice:
    dim: int = 1
    x_step: float = 0.25
    y_step: float = 0.25
    x_extent: float = 12.0
    y_extent: float = 12.0
    window_width: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        for step, ext in ((self.x_step, self.x_extent), (self.y_step, self.y_extent)):
            if not 0 < step < ext:
                raise ValueError("lattice steps must be positive and smaller than the extents")
            if 2 * round(ext / step) + 1 < 8:
                raise ValueError("lattice needs at least 8 points per axis")
        if self.window_width <= 0:
            raise ValueError("window width must be positive")

    @property
    def x_axis(self) -> np.ndarray:
        n = round(self.x_extent / self.x_step)
        return self.x_step * np.arange(-n, n + 1)

    @property
    def y_axis(self) -> np.ndarray:
        n = round(self.y_extent / self.y_step)
        return self.y_step * np.arange(-n, n + 1)

    def swapped(self) -> "TFLattice":
        """Exchange the roles of the space and frequency axes."""
        return TFLattice(self.dim, self.y_step, self.x_step, self.y_extent, self.x_extent, self.window_width)

    def refined(self, factor: int = 2) -> "TFLattice":
        return TFLattice(self.dim, self.x_step / factor, self.y_step / factor,
                         self.x_extent, self.y_extent, self.window_width)

    def window(self, t) -> np.ndarray:
        s = self.window_width
        t = np.asarray(t, dtype=float)
        return (math.pi * s * s) ** -0.25 * np.exp(-0.5 * (t / s) ** 2)


def lattice_for_cutoff(cutoff: int, dim: int = 1, step: float = 0.25) -> TFLattice:
    """Lattice reaching far enough past the turning point sqrt(2N+1) for |V_g f| to fall below DECAY_TOL."""
    extent = max(12.0, math.ceil(math.sqrt(2 * cutoff + 1)) + 10.0)
    return TFLattice(dim=dim, x_step=step, y_step=step, x_extent=extent, y_extent=extent)


@dataclass(frozen=True, eq=False)
class STFTTable:
    """Complex table over the lattice; axes are (x_1..x_d, y_1..y_d)."""

    values: np.ndarray
    lattice: TFLattice

    def boundary_ratio(self) -> float:
        """max |V| on the lattice boundary relative to max |V| overall."""
        a = np.abs(self.values)
        peak = a.max(initial=0.0)
        if peak == 0.0:
            return 0.0
        edge = 0.0
        for ax in range(a.ndim):
            edge = max(edge, np.take(a, 0, axis=ax).max(), np.take(a, -1, axis=ax).max())
        return float(edge / peak)

    def to_csv(self, path) -> None:
        from .io import write_stft_csv
        write_stft_csv(path, self)

    def to_dump(self, path) -> None:
        from .io import write_stft_dump
        write_stft_dump(path, self)


# ---------------------------------------------------------------------------
# STFT
# ---------------------------------------------------------------------------

def _spatial_grid(cutoff: int, lat: TFLattice) -> np.ndarray:
    """Uniform quadrature points for integrating f(t) g(t - x) e^{-iyt}."""
    turning = math.sqrt(2 * cutoff + 1)
    reach = min(turning + 8.0, lat.x_extent + 9.0 * lat.window_width)
    band = lat.y_extent + turning + 6.0 + 9.0 / lat.window_width
    step = min(0.25, 2 * math.pi / band / 1.25)
    n = math.ceil(reach / step)
    return step * np.arange(-n, n + 1)


@lru_cache(maxsize=16)
def stft_mode_tables(cutoff: int, lat: TFLattice) -> np.ndarray:
    """V_g h_k on the 1D lattice for k < cutoff, shape (cutoff, nx, ny)."""
    t = _spatial_grid(cutoff, lat)
    tau = t[1] - t[0]
    x, y = lat.x_axis, lat.y_axis
    gw = lat.window(t[None, :] - x[:, None]) * (tau / math.sqrt(2 * math.pi))
    e = np.exp(-1j * np.outer(t, y))
    h = hermite_functions(cutoff, t)
    out = np.empty((cutoff, len(x), len(y)), dtype=complex)
    chunk = max(1, 4_000_000 // (len(x) * len(t)))
    for k0 in range(0, cutoff, chunk):
        hk = h[k0:k0 + chunk]
        a = (hk[:, None, :] * gw[None, :, :]).reshape(-1, len(t))
        out[k0:k0 + chunk] = (a @ e).reshape(len(hk), len(x), len(y))
    out.setflags(write=False)
    return out


def _contract_modes(c: np.ndarray, tables: np.ndarray) -> np.ndarray:
    """sum_alpha c_alpha prod_j T[alpha_j, x_j, y_j] with output axes (x..., y...)."""
    d = c.ndim
    out = c
    for _ in range(d):
        out = np.tensordot(out, tables, axes=([0], [0]))
    # axes are now (x1, y1, x2, y2, ...)
    order = [2 * j for j in range(d)] + [2 * j + 1 for j in range(d)]
    return np.transpose(out, order)


def _stft_grid(u: GridField, lat: TFLattice) -> np.ndarray:
    x, y = lat.x_axis, lat.y_axis
    for r in u.rules:
        if r.kind == "uniform":
            h = r.dx_weights[0]
            if 2 * math.pi / h < lat.y_extent + 9.0 / lat.window_width:
                raise UnderResolvedQuadrature(
                    f"grid step {h:.3g} cannot resolve frequencies up to {lat.y_extent}")
    norm = (2 * math.pi) ** -0.5
    if u.dim == 1:
        r = u.rules[0]
        t = r.nodes
        a = lat.window(t[None, :] - x[:, None]) * (r.dx_weights * u.values * norm)[None, :]
        return a @ np.exp(-1j * np.outer(t, y))
    out = u.values
    for r in u.rules:
        t = r.nodes
        kern = (lat.window(t[None, :] - x[:, None]) * r.dx_weights * norm)[:, None, :] \
            * np.exp(-1j * np.outer(y, t))[None, :, :]
        out = np.tensordot(out, kern, axes=([0], [2]))
    d = u.dim
    order = [2 * j for j in range(d)] + [2 * j + 1 for j in range(d)]
    return np.transpose(out, order)


def stft(f: HermiteField | GridField, lat: TFLattice, check_decay: bool = True) -> STFTTable:
    """Tabulate V_g f on the lattice by quadrature."""
    if f.dim != lat.dim:
        raise ValueError(f"field dimension {f.dim} does not match lattice dimension {lat.dim}")
    if isinstance(f, HermiteField):
        vals = _contract_modes(f.coeffs, stft_mode_tables(f.cutoff, lat))
    else:
        vals = _stft_grid(f, lat)
    table = STFTTable(vals, lat)
    if check_decay:
        ratio = table.boundary_ratio()
        if ratio > DECAY_TOL:
            raise LatticeExtentError(
                f"|V_g f| at the lattice boundary is {ratio:.2e} of its peak; enlarge the extents")
    return table


def mixed_norm(a: np.ndarray, p: float, q: float, dx: float, dy: float, d: int) -> float:
    """|| || a(x, y) ||_{L^p_x} ||_{L^q_y} for a table with axes (x..., y...)."""
    a = np.abs(a)
    xaxes = tuple(range(d))
    if math.isinf(p):
        inner = a.max(axis=xaxes)
    else:
        inner = (np.sum(a ** p, axis=xaxes) * dx ** d) ** (1.0 / p)
    if math.isinf(q):
        return float(inner.max(initial=0.0))
    return float((np.sum(inner ** q) * dy ** d) ** (1.0 / q))


def modulation_norm(f, p: float, q: float, lat: TFLattice | None = None, check_decay: bool = True) -> float:
    """Discrete M^{p,q} norm. ``f`` may be a field or a precomputed STFTTable."""
    if p < 1 or q < 1:
        raise ValueError("modulation norms need p, q >= 1")
    table = f if isinstance(f, STFTTable) else stft(f, lat, check_decay=check_decay)
    lat = table.lattice
    return mixed_norm(table.values, p, q, lat.x_step, lat.y_step, lat.dim)


# ---------------------------------------------------------------------------
# Fourier-Wigner transform and special Hermite functions
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def wigner_mode_tables(cutoff: int, lat: TFLattice) -> np.ndarray:
    """<pi(x + iy) h_k, h_0> on the 1D lattice, shape (cutoff, nx, ny)."""
    x, y = lat.x_axis, lat.y_axis
    turning = math.sqrt(2 * cutoff + 1)
    band = lat.x_extent + turning + 6.0 + 9.0
    step = min(0.2, 2 * math.pi / band / 1.25)
    n = math.ceil(9.5 / step)
    xi = step * np.arange(-n, n + 1)
    g0 = hermite_functions(1, xi)[0]
    e = step * np.exp(1j * np.outer(x, xi))                 # (nx, nxi)
    phase = np.exp(0.5j * np.outer(x, y))                   # (nx, ny)
    hk = hermite_functions(cutoff, xi[None, :] + y[:, None]) * g0  # (cutoff, ny, nxi)
    out = np.einsum("xs,kys->kxy", e, hk) * phase[None]
    out.setflags(write=False)
    return out


def fourier_wigner(f: HermiteField, lat: TFLattice) -> STFTTable:
    """F(x, y) = <pi(x + iy) f, Phi_0> = int e^{i(x.xi + x.y/2)} f(xi + y) Phi_0(xi) dxi."""
    if f.dim != lat.dim:
        raise ValueError("field and lattice dimensions differ")
    return STFTTable(_contract_modes(f.coeffs, wigner_mode_tables(f.cutoff, lat)), lat)


def mpp_norm_via_wigner(f: HermiteField, p: float, q: float, lat: TFLattice) -> float:
    """M^{p,q} norm read off the Fourier-Wigner table.

    |F(x, y)| = (2 pi)^{d/2} |V_{Phi_0} f(y, -x)|, so the space variable of the
    STFT is the y axis of F: take L^p over y first, then L^q over x.
    """
    table = fourier_wigner(f, lat)
    d = lat.dim
    a = np.abs(table.values)
    order = list(range(d, 2 * d)) + list(range(d))
    return (2 * math.pi) ** (-d / 2) * mixed_norm(np.transpose(a, order), p, q, lat.y_step, lat.x_step, d)


def special_hermite(alpha: Sequence[int], z) -> np.ndarray:
    """Phi_{alpha,0}(z) = (2pi)^{-d/2} (alpha!)^{-1/2} (i/sqrt2)^{|alpha|} conj(z)^alpha e^{-|z|^2/4}.

    ``z`` has shape (..., d). The modulus is assembled in log space so large
    |alpha| does not overflow alpha!.
    """
    alpha = np.asarray(alpha, dtype=int)
    z = np.asarray(z, dtype=complex)
    if z.ndim == 0:
        z = z[None]
    if z.shape[-1] != len(alpha):
        raise ValueError("z must have one complex coordinate per multi-index entry")
    d = len(alpha)
    total = int(alpha.sum())
    r = np.abs(z)
    logr = alpha * np.log(np.where(r > 0, r, 1.0))
    logr = np.where((r == 0) & (alpha > 0), -np.inf, logr)
    logmag = (-0.5 * d * math.log(2 * math.pi) - 0.5 * float(gammaln(alpha + 1).sum())
              - 0.5 * total * math.log(2.0) + logr.sum(axis=-1) - 0.25 * (r * r).sum(axis=-1))
    phase = 0.5 * math.pi * total - (alpha * np.angle(z)).sum(axis=-1)
    return np.exp(logmag + 1j * phase)


def stft_closed_form(f: HermiteField, lat: TFLattice) -> STFTTable:
    """V_{Phi_0} f from the special Hermite closed form (window width 1 only).

    V_{Phi_0} Phi_alpha(a, b) = e^{-i a.b/2} Phi_{alpha,0}(-b + i a).
    """
    if lat.window_width != 1.0:
        raise ValueError("closed form needs the Phi_0 window")
    x, y = lat.x_axis, lat.y_axis
    z = (-y[None, :] + 1j * x[:, None])[..., None]
    phase = np.exp(-0.5j * np.outer(x, y))
    tables = np.stack([phase * special_hermite([k], z) for k in range(f.cutoff)])
    return STFTTable(_contract_modes(f.coeffs, tables), lat)


def ui_identity_deviation(f: HermiteField, lat: TFLattice) -> float:
    """max |(2pi)^{-d/2} <pi(x,y) f, g> - e^{-i x.y/2} V_g f(y, -x)| over the lattice, g = Phi_0."""
    if lat.window_width != 1.0:
        raise ValueError("the identity is stated for the Phi_0 window")
    d = lat.dim
    fw = fourier_wigner(f, lat).values * (2 * math.pi) ** (-d / 2)
    v = stft(f, lat.swapped(), check_decay=False).values   # axes (a = y values..., b = x values...)
    v = np.flip(v, axis=tuple(range(d, 2 * d)))            # b -> -b
    order = list(range(d, 2 * d)) + list(range(d))
    v = np.transpose(v, order)                              # axes (x..., y...) holding V(y, -x)
    x, y = lat.x_axis, lat.y_axis
    ph1 = np.exp(-0.5j * np.outer(x, y))
    phase = ph1
    for _ in range(d - 1):
        phase = np.multiply.outer(phase, ph1)
    if d > 1:
        phase = np.transpose(phase, [2 * j for j in range(d)] + [2 * j + 1 for j in range(d)])
    return float(np.max(np.abs(fw - phase * v)))


# ---------------------------------------------------------------------------
# Norm diagnostics
# ---------------------------------------------------------------------------

def lebesgue_norm(f: HermiteField | GridField, p: float, half_width: float = 20.0, n: int = 1024) -> float:
    """Quadrature L^p norm; Hermite fields are sampled on a uniform box first."""
    if isinstance(f, HermiteField):
        f = synthesize(f, uniform_grid(half_width, n, f.dim))
    return f.lp_norm(p)


def field_norm(f, space: tuple, lat: TFLattice) -> float:
    """space = ("L", p) or ("M", p, q)."""
    kind = space[0].upper()
    if kind == "L":
        return lebesgue_norm(f, space[1])
    if kind == "M":
        return modulation_norm(f, space[1], space[2], lat)
    raise ValueError(f"unknown space {space!r}")


def embedding_ratio_report(family: Sequence, spaces: Iterable[tuple], lat: TFLattice) -> list[dict]:
    """sup over the family of ||f||_target / ||f||_source for each (source, target) pair.

    Purely diagnostic: embedding constants are not known, so nothing is judged.
    """
    if not family:
        raise ValueError("family must be nonempty")
    rows = []
    for source, target in spaces:
        ratios = [field_norm(f, target, lat) / field_norm(f, source, lat) for f in family]
        rows.append({"source": tuple(source), "target": tuple(target),
                     "sup_ratio": max(ratios), "ratios": ratios})
    return rows
