"""Normalized Hermite functions, Gauss-Hermite quadrature and grid <-> coefficient transforms.

Multi-dimensional transforms are tensorized: every axis is contracted with the
same 1D matrix, so the cost is O(d N^(d+1)) rather than O(N^(2d)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

PI_QUARTER = math.pi ** -0.25


class UnderResolvedGrid(ValueError):
    """The quadrature grid cannot resolve the requested Hermite cutoff."""


class QuadratureDivergence(RuntimeError):
    """Newton iteration for Gauss-Hermite nodes failed to converge."""


# ---------------------------------------------------------------------------
# Hermite functions
# ---------------------------------------------------------------------------

def hermite_functions(n: int, x) -> np.ndarray:
    """Return h_0..h_{n-1} evaluated at ``x``, shape ``(n,) + x.shape``.

    Uses the normalized three-term recurrence
    h_{k+1} = sqrt(2/(k+1)) x h_k - sqrt(k/(k+1)) h_{k-1}, which never forms
    factorials and stays finite well past k = 150.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n,) + x.shape)
    if n == 0:
        return out
    out[0] = PI_QUARTER * np.exp(-0.5 * x * x)
    if n > 1:
        out[1] = math.sqrt(2.0) * x * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * x * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def hermite_1d(k: int, x):
    """Normalized Hermite function h_k at ``x`` (scalar or array)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    val = hermite_functions(k + 1, x)[k]
    return float(val) if val.ndim == 0 else val


def hermite_nd(alpha: Sequence[int], x: Sequence[float]) -> float:
    """Phi_alpha(x) = prod_j h_{alpha_j}(x_j)."""
    if len(alpha) != len(x):
        raise ValueError(f"multi-index has length {len(alpha)} but point has length {len(x)}")
    return float(np.prod([hermite_1d(a, xi) for a, xi in zip(alpha, x)]))


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """A 1D rule.

    ``weights`` integrate against e^{-x^2} for Gauss-Hermite rules and against
    dx for uniform box rules. ``dx_weights`` always integrate against dx; for
    Gauss-Hermite they are w_i e^{x_i^2}, computed without overflow as
    1 / sum_k h_k(x_i)^2.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    dx_weights: np.ndarray
    half_width: float | None = None

    @property
    def size(self) -> int:
        return len(self.nodes)


def _orthonormal_hermite_poly(m: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """p_m(x) and p_{m-1}(x) for the polynomials orthonormal under e^{-x^2}."""
    p_prev = np.zeros_like(x)
    p = np.full_like(x, PI_QUARTER)
    for k in range(m):
        p_prev, p = p, math.sqrt(2.0 / (k + 1)) * x * p - math.sqrt(k / (k + 1)) * p_prev
    return p, p_prev


@lru_cache(maxsize=64)
def gauss_hermite_rule(m: int, tol: float = 1e-14, maxiter: int = 100) -> QuadratureRule:
    """M-point Gauss-Hermite rule for the weight e^{-x^2}.

    Starting values are eigenvalues of the symmetric Jacobi matrix; they are
    then polished by Newton's method on the normalized recurrence, using
    p_m' = sqrt(2m) p_{m-1}.
    """
    if m < 1:
        raise ValueError("M must be positive")
    off = np.sqrt(np.arange(1, m) / 2.0)
    x = np.linalg.eigvalsh(np.diag(off, 1) + np.diag(off, -1)) if m > 1 else np.zeros(1)
    x = 0.5 * (x - x[::-1])  # exact symmetry about 0
    for _ in range(maxiter):
        p, p_prev = _orthonormal_hermite_poly(m, x)
        step = p / (math.sqrt(2.0 * m) * p_prev)
        x = x - step
        if np.max(np.abs(step)) < tol * max(1.0, float(np.max(np.abs(x)))):
            break
    else:
        raise QuadratureDivergence(f"Gauss-Hermite Newton iteration did not converge for M={m}")
    x = np.sort(0.5 * (x - x[::-1]))
    h = hermite_functions(m, x)
    dx_w = 1.0 / np.sum(h * h, axis=0)
    w = dx_w * np.exp(-x * x)
    for arr in (x, w, dx_w):
        arr.setflags(write=False)
    return QuadratureRule(nodes=x, weights=w, kind="gauss_hermite", dx_weights=dx_w)


def uniform_rule(half_width: float, n: int) -> QuadratureRule:
    """Periodic box grid x_j = -L + j h, h = 2L/n (FFT friendly)."""
    if n < 2 or half_width <= 0:
        raise ValueError("uniform rule needs n >= 2 and L > 0")
    h = 2.0 * half_width / n
    x = -half_width + h * np.arange(n)
    w = np.full(n, h)
    return QuadratureRule(nodes=x, weights=w, kind="uniform", dx_weights=w, half_width=half_width)


# ---------------------------------------------------------------------------
# Fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HermiteField:
    """Coefficients c_alpha of u = sum c_alpha Phi_alpha, alpha in {0..N-1}^d."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim < 1 or len(set(c.shape)) != 1:
            raise ValueError(f"coefficient array must be a hypercube, got shape {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def cutoff(self) -> int:
        return self.coeffs.shape[0]

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def levels(self) -> np.ndarray:
        """|alpha| for every coefficient slot."""
        return level_array(self.cutoff, self.dim)

    def resized(self, cutoff: int) -> "HermiteField":
        """Zero-pad or truncate to a new cutoff."""
        out = np.zeros((cutoff,) * self.dim, dtype=complex)
        n = min(cutoff, self.cutoff)
        sl = (slice(0, n),) * self.dim
        out[sl] = self.coeffs[sl]
        return HermiteField(out)

    def conj(self) -> "HermiteField":
        # Hermite functions are real, so conjugating u conjugates its coefficients.
        return HermiteField(np.conj(self.coeffs))

    def __add__(self, other: "HermiteField") -> "HermiteField":
        return HermiteField(self.coeffs + other.coeffs)

    def __sub__(self, other: "HermiteField") -> "HermiteField":
        return HermiteField(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "HermiteField":
        return HermiteField(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "HermiteField":
        return HermiteField(-self.coeffs)

    @classmethod
    def zeros(cls, cutoff: int, dim: int = 1) -> "HermiteField":
        return cls(np.zeros((cutoff,) * dim, dtype=complex))

    @classmethod
    def basis(cls, alpha: Sequence[int] | int, cutoff: int, dim: int | None = None) -> "HermiteField":
        """The field Phi_alpha."""
        if isinstance(alpha, (int, np.integer)):
            alpha = (int(alpha),) + (0,) * ((dim or 1) - 1)
        alpha = tuple(alpha)
        c = np.zeros((cutoff,) * len(alpha), dtype=complex)
        c[alpha] = 1.0
        return cls(c)

    @classmethod
    def random(cls, cutoff: int, dim: int = 1, rng=None, norm: float | None = 1.0) -> "HermiteField":
        """Complex Gaussian coefficients, optionally rescaled to a given l2 norm."""
        rng = np.random.default_rng(rng)
        shape = (cutoff,) * dim
        c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        f = cls(c)
        if norm is not None:
            f = f * (norm / f.l2_norm())
        return f


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of u on a tensor grid; ``rules`` holds one QuadratureRule per axis."""

    values: np.ndarray
    rules: tuple = field(default_factory=tuple)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        rules = tuple(self.rules)
        if v.ndim != len(rules) or any(v.shape[i] != r.size for i, r in enumerate(rules)):
            raise ValueError("grid values do not match the per-axis rules")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "rules", rules)

    @property
    def dim(self) -> int:
        return self.values.ndim

    @property
    def kind(self) -> str:
        kinds = {r.kind for r in self.rules}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    @property
    def axes(self) -> tuple:
        return tuple(r.nodes for r in self.rules)

    def dx_weights(self) -> np.ndarray:
        """Tensor product of per-axis dx weights, same shape as ``values``."""
        w = np.ones(())
        for r in self.rules:
            w = np.multiply.outer(w, r.dx_weights)
        return w

    def integrate(self, values=None) -> complex:
        v = self.values if values is None else values
        return complex(np.sum(self.dx_weights() * v))

    def lp_norm(self, p: float) -> float:
        """Quadrature L^p norm (p = inf gives the grid maximum)."""
        a = np.abs(self.values)
        if math.isinf(p):
            return float(a.max(initial=0.0))
        return float(np.sum(self.dx_weights() * a ** p) ** (1.0 / p))

    def l2_norm(self) -> float:
        return self.lp_norm(2.0)

    def with_values(self, values) -> "GridField":
        return GridField(values, self.rules)


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def level_array(cutoff: int, dim: int) -> np.ndarray:
    idx = np.indices((cutoff,) * dim).sum(axis=0) if dim > 1 else np.arange(cutoff)
    idx.setflags(write=False)
    return idx


def _apply_axes(arr: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract axis j of ``arr`` with mats[j] (shape out_j x in_j)."""
    out = arr
    for j, m in enumerate(mats):
        out = np.moveaxis(np.tensordot(m, out, axes=([1], [j])), 0, j)
    return out


def gauss_hermite_grid(m: int, dim: int = 1) -> tuple:
    return (gauss_hermite_rule(m),) * dim


def uniform_grid(half_width: float, n: int, dim: int = 1) -> tuple:
    return (uniform_rule(half_width, n),) * dim


def synthesize(c: HermiteField, grid: Sequence[QuadratureRule]) -> GridField:
    """Evaluate sum_alpha c_alpha Phi_alpha at the grid nodes."""
    grid = tuple(grid)
    if len(grid) != c.dim:
        raise ValueError(f"field has dimension {c.dim} but grid has {len(grid)} axes")
    mats = [hermite_functions(c.cutoff, r.nodes).T for r in grid]
    return GridField(_apply_axes(c.coeffs, mats), grid)


def evaluate(c: HermiteField, points: Sequence[np.ndarray]) -> np.ndarray:
    """Evaluate a field on a tensor product of arbitrary per-axis point arrays."""
    if len(points) != c.dim:
        raise ValueError("one point array per dimension is required")
    mats = [hermite_functions(c.cutoff, np.asarray(p)).T for p in points]
    return _apply_axes(c.coeffs, mats)


def _check_resolution(rule: QuadratureRule, n: int) -> None:
    if rule.kind == "gauss_hermite":
        if rule.size < n + 1:
            raise UnderResolvedGrid(f"Gauss-Hermite grid with M={rule.size} cannot analyze cutoff N={n} (need M >= N+1)")
    else:
        turning = math.sqrt(2 * n + 1)
        h = rule.dx_weights[0]
        if math.pi / h < turning + 3.0 or rule.half_width < turning + 5.0:
            raise UnderResolvedGrid(f"uniform grid (L={rule.half_width}, h={h:.3g}) cannot resolve cutoff N={n}")


def analyze(u: GridField, n: int) -> HermiteField:
    """Project grid samples onto Phi_alpha, |alpha|_inf < n, by quadrature."""
    for r in u.rules:
        _check_resolution(r, n)
    mats = [hermite_functions(n, r.nodes) * r.dx_weights for r in u.rules]
    return HermiteField(_apply_axes(u.values, mats))


@lru_cache(maxsize=32)
def collocation_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(S, A) with S[i,k] = h_k(x_i) on the n-point Gauss-Hermite grid and A = S^T diag(W).

    With as many nodes as modes the scaled matrix diag(sqrt W) S is orthogonal,
    so grid <-> coefficient round trips in either order are exact and the
    discrete l2 mass equals the coefficient norm.
    """
    rule = gauss_hermite_rule(n)
    s = hermite_functions(n, rule.nodes).T
    a = (s * rule.dx_weights[:, None]).T
    s.setflags(write=False)
    a.setflags(write=False)
    return s, a


def to_collocation(c: np.ndarray) -> np.ndarray:
    """Coefficients -> values on the N^d Gauss-Hermite collocation grid."""
    s, _ = collocation_matrices(c.shape[0])
    return _apply_axes(c, [s] * c.ndim)


def from_collocation(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_collocation`."""
    _, a = collocation_matrices(v.shape[0])
    return _apply_axes(v, [a] * v.ndim)
