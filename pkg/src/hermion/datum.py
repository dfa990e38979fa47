"""Initial data: explicit coefficients, Gaussians, the lattice-sum rough datum, files, random families."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .hermite_basis import GridField, HermiteField, analyze, gauss_hermite_grid, level_array
from .io import read_field_dump

ALIAS_TOL = 1e-10


class DatumError(ValueError):
    pass


class AliasingError(DatumError):
    """The datum carries energy beyond the Hermite cutoff."""


@dataclass(frozen=True)
class HermiteCoeffs:
    coeffs: tuple


@dataclass(frozen=True)
class Gaussian:
    """(pi w^2)^{-d/4} exp(-|x - center|^2 / (2 w^2) + i momentum . x); w = 1, center 0 is Phi_0."""

    center: tuple = (0.0,)
    width: float = 1.0
    momentum: tuple = (0.0,)


@dataclass(frozen=True)
class RoughExample:
    """sum over 0 < |k|_inf <= kmax of |k|^{-d/q - eps} e^{i k.x} e^{-|x|^2}."""

    q: float = 2.0
    epsilon: float = 0.1
    kmax: int = 8

    def __post_init__(self):
        if not (self.q >= 1 and self.epsilon > 0 and self.kmax >= 1):
            raise DatumError("rough example needs q >= 1, epsilon > 0, kmax >= 1")


@dataclass(frozen=True)
class FileDatum:
    path: str


DatumSpec = HermiteCoeffs | Gaussian | RoughExample | FileDatum


@dataclass(frozen=True)
class ProjectionReport:
    field: HermiteField
    tail_energy: float
    info: dict = field(default_factory=dict)


def project(fn: Callable[[list], np.ndarray], cutoff: int, dim: int, nodes: int | None = None,
            tol: float = ALIAS_TOL) -> ProjectionReport:
    """Hermite coefficients of fn by Gauss-Hermite quadrature, with an aliasing guard.

    tail_energy = 1 - ||c||^2 / ||fn||^2, both sides by the same rule; it
    must stay below ``tol`` or the cutoff is too small for the datum.
    """
    m = nodes or max(2 * cutoff, cutoff + 64)
    rules = gauss_hermite_grid(m, dim)
    pts = np.meshgrid(*[r.nodes for r in rules], indexing="ij")
    u = GridField(fn(pts), rules)
    c = analyze(u, cutoff)
    total = u.l2_norm() ** 2
    tail = 0.0 if total == 0 else max(0.0, 1.0 - c.l2_norm() ** 2 / total)
    if tail > tol:
        raise AliasingError(f"{tail:.2e} of the datum's energy lies beyond cutoff {cutoff}")
    return ProjectionReport(c, tail)


def _vec(v, dim: int) -> np.ndarray:
    a = np.atleast_1d(np.asarray(v, dtype=float))
    if a.size == 1:
        return np.full(dim, float(a[0]))
    if a.size != dim:
        raise DatumError(f"expected {dim} components, got {a.size}")
    return a


def gaussian_fn(spec: Gaussian, dim: int):
    c, p, w = _vec(spec.center, dim), _vec(spec.momentum, dim), spec.width
    if w <= 0:
        raise DatumError("width must be positive")

    def fn(pts):
        r2 = sum((x - cj) ** 2 for x, cj in zip(pts, c))
        phase = sum(pj * x for x, pj in zip(pts, p))
        return (math.pi * w * w) ** (-dim / 4) * np.exp(-r2 / (2 * w * w) + 1j * phase)
    return fn


def rough_lattice(spec: RoughExample, dim: int) -> list[tuple[tuple, float]]:
    out = []
    for k in itertools.product(range(-spec.kmax, spec.kmax + 1), repeat=dim):
        if any(k):
            out.append((k, math.hypot(*k) ** (-dim / spec.q - spec.epsilon)))
    return out


def rough_fn(spec: RoughExample, dim: int):
    terms = rough_lattice(spec, dim)

    def fn(pts):
        env = np.exp(-sum(x * x for x in pts))
        acc = np.zeros(np.shape(pts[0]), dtype=complex)
        for k, a in terms:
            acc += a * np.exp(1j * sum(kj * x for kj, x in zip(k, pts)))
        return acc * env
    return fn


def rough_tail_bound(spec: RoughExample, dim: int) -> float:
    """Integral bound on the l^q tail (sum over |k| > kmax of |k|^{-(d/q + eps) q})^{1/q}.

    Shells of radius s hold at most c_d s^{d-1} lattice points, with
    c_d the surface area of the unit sphere times 2^d as a crude packing factor.
    """
    s = spec.q * (dim / spec.q + spec.epsilon)
    surf = 2 * math.pi ** (dim / 2) / math.gamma(dim / 2)
    shell = surf * 2 ** dim
    return (shell * spec.kmax ** (dim - s) / (s - dim)) ** (1 / spec.q)


def make_datum(spec: DatumSpec, cutoff: int, dim: int = 1) -> HermiteField:
    return make_datum_report(spec, cutoff, dim).field


def make_datum_report(spec: DatumSpec, cutoff: int, dim: int = 1) -> ProjectionReport:
    if isinstance(spec, HermiteCoeffs):
        a = np.asarray(spec.coeffs, dtype=complex)
        if dim > 1:
            n = round(a.size ** (1 / dim))
            if n ** dim != a.size:
                raise DatumError(f"{a.size} coefficients do not form an N^{dim} block")
            a = a.reshape((n,) * dim)
        if a.shape[0] > cutoff:
            raise AliasingError(f"datum has {a.shape[0]} modes per axis but the cutoff is {cutoff}")
        return ProjectionReport(HermiteField(a).resized(cutoff), 0.0)
    if isinstance(spec, Gaussian):
        return project(gaussian_fn(spec, dim), cutoff, dim)
    if isinstance(spec, RoughExample):
        rep = project(rough_fn(spec, dim), cutoff, dim)
        return ProjectionReport(rep.field, rep.tail_energy, {"lattice_tail_bound": rough_tail_bound(spec, dim)})
    if isinstance(spec, FileDatum):
        # a missing or unreadable file is an I/O failure, not a bad spec, so OSError propagates
        f = read_field_dump(spec.path)
        if f.dim != dim:
            raise DatumError(f"datum file has dimension {f.dim}, config says {dim}")
        if f.cutoff > cutoff:
            raise AliasingError(f"datum file has cutoff {f.cutoff} above the configured {cutoff}")
        return ProjectionReport(f.resized(cutoff), 0.0)
    raise DatumError(f"unknown datum spec {spec!r}")


def field_family(count: int = 20, cutoff: int = 8, dim: int = 1, seed: int = 0,
                 norm: float = 1.0, decay: float = 1.0) -> list[HermiteField]:
    """Reproducible random fields with prescribed L^2 norm.

    Coefficients are complex Gaussians times decay^|alpha|; decay = 1 gives a
    flat spectrum, decay < 1 the smooth data typical of Hermite expansions.
    """
    rng = np.random.default_rng(seed)
    weight = decay ** level_array(cutoff, dim)
    out = []
    for _ in range(count):
        f = HermiteField.random(cutoff, dim, rng, norm=None)
        f = HermiteField(f.coeffs * weight)
        out.append(f * (norm / f.l2_norm()))
    return out
