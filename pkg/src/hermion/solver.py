"""Time stepping for i u_t - H u = F(u) in Hermite coordinates.

Every scheme discretizes the same semi-discrete system: coefficients c evolve
by the exact linear group, and F is evaluated pointwise on the N^d
Gauss-Hermite collocation grid, c' = sign i (Lambda c + A F(S c)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.interpolate import BarycentricInterpolator

from .hermite_basis import (HermiteField, _apply_axes, from_collocation, hermite_functions, level_array,
                            synthesize, to_collocation)
from .nonlinearity import BoxSpec, KernelSpec, RealEntireSeries, convolution_spectrum, padded_rule, trilinear_ratio
from .propagator import DEFAULT_SIGN, energy_proxy
from .tf_analysis import LatticeExtentError, TFLattice, lattice_for_cutoff, modulation_norm

SCHEMES = ("picard", "lie", "strang")
BLOWUP_FACTOR = 1e6


class MonitorBreach(RuntimeError):
    """A monitored quantity left its allowed band; ``trace`` holds what was recorded."""

    def __init__(self, message: str, trace: "EvolutionTrace"):
        super().__init__(message)
        self.trace = trace


class NonContractionError(RuntimeError):
    def __init__(self, message: str, history: dict):
        super().__init__(message)
        self.history = history


# ---------------------------------------------------------------------------
# Nonlinearity descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerLaw:
    """F(u) = sign coupling |u|^{2k} u."""

    k: int = 1
    sign: int = 1
    coupling: float = 1.0

    gauge = True

    def scaled(self, factor: float) -> "PowerLaw":
        return PowerLaw(self.k, self.sign, self.coupling * factor)


@dataclass(frozen=True)
class HartreeLaw:
    """F(u) = coupling (K * |u|^{2k}) u, convolution on a uniform box."""

    kernel: KernelSpec
    k: int = 1
    coupling: float = 1.0
    box: BoxSpec = BoxSpec()

    gauge = True

    def scaled(self, factor: float) -> "HartreeLaw":
        return HartreeLaw(self.kernel, self.k, self.coupling * factor, self.box)


@dataclass(frozen=True)
class SeriesLaw:
    """General real-entire F(Re u, Im u); advanced by RK4 on the grid."""

    series: RealEntireSeries
    substeps: int = 1

    gauge = False

    def scaled(self, factor: float) -> "SeriesLaw":
        return SeriesLaw(RealEntireSeries(self.series.coeffs * factor), self.substeps)


Nonlinearity = PowerLaw | HartreeLaw | SeriesLaw | None


@lru_cache(maxsize=16)
def _box_operators(cutoff: int, half_width: float, points: int, dim: int):
    """Synthesis onto the box and trigonometric interpolation from the padded box to the Gauss-Hermite nodes."""
    from .hermite_basis import gauss_hermite_rule, uniform_rule
    box = uniform_rule(half_width, points)
    pad = padded_rule(box, dim)
    gh = gauss_hermite_rule(cutoff)
    if gh.nodes[-1] >= half_width:
        raise ValueError("collocation nodes fall outside the convolution box")
    synth = hermite_functions(cutoff, box.nodes).T
    m = pad.size
    xi = 2 * math.pi * np.fft.fftfreq(m, d=pad.dx_weights[0])
    shift = gh.nodes[:, None] - pad.nodes[0]
    interp = np.exp(1j * xi[None, :] * shift) / m
    if m % 2 == 0:
        # Nyquist bin: use the symmetric cosine so real data stay real
        interp[:, m // 2] = np.cos(xi[m // 2] * shift[:, 0]) / m
    return box, synth, interp


def potential(law: HartreeLaw, c: np.ndarray) -> np.ndarray:
    """coupling (K * |u|^{2k}) sampled at the collocation nodes."""
    d = c.ndim
    box, synth, interp = _box_operators(c.shape[0], law.box.half_width, law.box.points, d)
    u_box = _apply_axes(c, [synth] * d)
    peak = np.abs(u_box).max(initial=0.0)
    if peak == 0.0:
        return np.zeros(c.shape)
    rules = (box,) * d
    spec = convolution_spectrum(np.abs(u_box) ** (2 * law.k), law.kernel, rules)
    v = _apply_axes(spec, [interp] * d)
    if np.abs(v.imag).max() <= 1e-12 * np.abs(v).max():
        v = v.real
    return law.coupling * v


def nonlinear_values(law: Nonlinearity, c: np.ndarray, v: np.ndarray) -> np.ndarray:
    """F(u) at the collocation nodes; ``v`` holds u there."""
    if law is None:
        return np.zeros_like(v)
    if isinstance(law, PowerLaw):
        return law.sign * law.coupling * np.abs(v) ** (2 * law.k) * v
    if isinstance(law, HartreeLaw):
        return potential(law, c) * v
    return law.series(v)


def nonlinear_coeffs(law: Nonlinearity, c: np.ndarray) -> np.ndarray:
    return from_collocation(nonlinear_values(law, c, to_collocation(c)))


def nonlinear_step(law: Nonlinearity, c: np.ndarray, dt: float, sign: int) -> np.ndarray:
    """Advance u' = sign i F(u) by dt."""
    if law is None:
        return c
    v = to_collocation(c)
    if isinstance(law, PowerLaw):
        # |u| is invariant along this flow, so the phase rotation is exact
        pot = law.sign * law.coupling * np.abs(v) ** (2 * law.k)
        return from_collocation(np.exp(sign * 1j * dt * pot) * v)
    if isinstance(law, HartreeLaw):
        return from_collocation(np.exp(sign * 1j * dt * potential(law, c)) * v)
    h = dt / law.substeps
    for _ in range(law.substeps):
        k1 = sign * 1j * law.series(v)
        k2 = sign * 1j * law.series(v + 0.5 * h * k1)
        k3 = sign * 1j * law.series(v + 0.5 * h * k2)
        k4 = sign * 1j * law.series(v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return from_collocation(v)


def _phases(cutoff: int, dim: int, t: float, sign: int) -> np.ndarray:
    return np.exp(sign * 1j * t * (2 * level_array(cutoff, dim) + dim))


# ---------------------------------------------------------------------------
# Configuration and traces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    horizon: float
    dt: float
    scheme: str = "strang"
    nonlinearity: Nonlinearity = None
    picard_iters: int = 30
    time_quadrature_nodes: int = 8
    time_samples: int = 16
    fixed_point_tol: float = 1e-12
    conservation_tol: float = 1e-9
    sign: int = DEFAULT_SIGN
    snapshot_interval: float | None = None
    monitor_p: tuple = (1.0, 2.0)
    monitors: bool = True
    lattice: TFLattice | None = None

    def __post_init__(self):
        if not (self.horizon > 0 and self.dt > 0):
            raise ValueError("horizon and dt must be positive")
        if self.dt > self.horizon * (1 + 1e-12):
            raise ValueError("dt must not exceed the horizon")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.picard_iters < 2:
            raise ValueError("picard_iters must be at least 2")
        if not (self.fixed_point_tol > 0 and self.conservation_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")

    @property
    def steps(self) -> int:
        return max(1, int(round(self.horizon / self.dt)))


def monitor_key(p: float) -> str:
    s = f"{p:g}"
    return f"m{s}{s}" if float(p).is_integer() else f"m{s}_{s}"


def monitor_values(f: HermiteField, cfg: SolverConfig) -> tuple[dict, list]:
    rec = {"l2": f.l2_norm(), "energy": energy_proxy(f)}
    flags = []
    if cfg.monitors:
        lat = cfg.lattice or lattice_for_cutoff(f.cutoff, f.dim)
        for p in cfg.monitor_p:
            try:
                rec[monitor_key(p)] = modulation_norm(f, p, p, lat)
            except LatticeExtentError:
                rec[monitor_key(p)] = modulation_norm(f, p, p, lat, check_decay=False)
                flags.append(f"{monitor_key(p)}_truncated")
    return rec, flags


@dataclass
class EvolutionTrace:
    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    monitors: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def append(self, t: float, f: HermiteField, mon: dict, flags: Sequence[str] = ()) -> None:
        if self.times and t <= self.times[-1]:
            raise ValueError("trace times must increase")
        if not all(math.isfinite(v) for v in mon.values()):
            raise ValueError("monitor values must be finite")
        self.times.append(float(t))
        self.snapshots.append(f)
        self.monitors.append(dict(mon))
        self.flags.append(list(flags))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final(self) -> HermiteField:
        return self.snapshots[-1]

    def records(self) -> list[dict]:
        return [{"t": t, **m, "flags": fl} for t, m, fl in zip(self.times, self.monitors, self.flags)]


# ---------------------------------------------------------------------------
# Splitting schemes
# ---------------------------------------------------------------------------

def evolve_nonlinear(u0: HermiteField, cfg: SolverConfig) -> EvolutionTrace:
    """Lie or Strang splitting with monitors at snapshot times."""
    if cfg.scheme == "picard":
        raise ValueError("use picard_solve for the fixed-point scheme")
    n = cfg.steps
    dt = cfg.horizon / n
    stride = n if cfg.snapshot_interval is None else max(1, int(round(cfg.snapshot_interval / dt)))
    law = cfg.nonlinearity
    full = _phases(u0.cutoff, u0.dim, dt, cfg.sign)
    half = _phases(u0.cutoff, u0.dim, dt / 2, cfg.sign)
    trace = EvolutionTrace()
    mon0, fl0 = monitor_values(u0, cfg)
    trace.append(0.0, u0, mon0, fl0)
    mass0 = u0.l2_norm()
    check_mass = law is None or law.gauge
    c = u0.coeffs.copy()
    for step in range(1, n + 1):
        if cfg.scheme == "strang":
            c = half * nonlinear_step(law, half * c, dt, cfg.sign)
        else:
            c = nonlinear_step(law, full * c, dt, cfg.sign)
        mass = float(np.sqrt(np.sum(np.abs(c) ** 2)))
        if not np.all(np.isfinite(c)) or mass > BLOWUP_FACTOR * max(mass0, 1e-300):
            raise MonitorBreach(f"blow-up guard tripped at t={step * dt:.6g}", trace)
        if check_mass and mass0 > 0 and abs(mass - mass0) > cfg.conservation_tol * mass0:
            raise MonitorBreach(
                f"relative L2 drift {abs(mass - mass0) / mass0:.3e} exceeds {cfg.conservation_tol:g} "
                f"at t={step * dt:.6g}", trace)
        if step % stride == 0 or step == n:
            f = HermiteField(c.copy())
            mon, flags = monitor_values(f, cfg)
            for key, val in mon.items():
                base = mon0.get(key, 0.0)
                if base > 0 and val > BLOWUP_FACTOR * base:
                    trace.append(step * dt, f, mon, flags + ["blowup"])
                    raise MonitorBreach(f"{key} grew beyond {BLOWUP_FACTOR:g} times its initial value", trace)
            trace.append(step * dt, f, mon, flags)
    return trace


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------

def _lobatto(n: int, horizon: float) -> np.ndarray:
    return 0.5 * horizon * (1 - np.cos(np.pi * np.arange(n) / (n - 1)))


def picard_solve(u0: HermiteField, cfg: SolverConfig) -> tuple[HermiteField, dict]:
    """Fixed-point iteration of the Duhamel map in the interaction picture.

    w(t) = U(-t) u(t) solves w(t) = u0 + sign i int_0^t U(-tau) F(U(tau) w(tau)) dtau.
    w is stored at Chebyshev-Lobatto times and interpolated barycentrically;
    each panel between consecutive samples is integrated with Gauss-Legendre.
    The difference sequence is measured in sup_t ||w_{n+1}(t) - w_n(t)||_{l2}
    at the samples, which equals the same quantity for u since U is unitary.
    """
    law = cfg.nonlinearity
    T = cfg.horizon
    ts = _lobatto(cfg.time_samples, T)
    gx, gw = np.polynomial.legendre.leggauss(cfg.time_quadrature_nodes)
    shape = u0.coeffs.shape
    lev = 2 * level_array(u0.cutoff, u0.dim) + u0.dim

    def U(tau):
        return np.exp(cfg.sign * 1j * tau * lev)

    taus, weights, panel = [], [], []
    for j in range(1, len(ts)):
        a, b = ts[j - 1], ts[j]
        taus.extend(0.5 * (b - a) * gx + 0.5 * (a + b))
        weights.extend(0.5 * (b - a) * gw)
        panel.extend([j] * len(gx))
    taus, weights, panel = np.array(taus), np.array(weights), np.array(panel)

    # closed-form Chebyshev-Lobatto weights; scipy would otherwise randomize its weight computation
    bary = (-1.0) ** np.arange(len(ts))
    bary[[0, -1]] *= 0.5
    w = np.broadcast_to(u0.coeffs, (len(ts),) + shape).copy()
    history = {"differences": [], "ratios": [], "iterations": 0, "converged": False}
    # differences below this are roundoff; their ratios say nothing about contraction
    noise = 1e-12 * max(u0.l2_norm(), 1e-300)
    strikes = 0
    for it in range(1, cfg.picard_iters + 1):
        interp = BarycentricInterpolator(ts, w.reshape(len(ts), -1), axis=0, wi=bary)
        wq = interp(taus).reshape((len(taus),) + shape)
        g = np.empty_like(wq)
        for i, tau in enumerate(taus):
            g[i] = U(-tau) * nonlinear_coeffs(law, U(tau) * wq[i])
        contrib = (weights.reshape((-1,) + (1,) * len(shape)) * g)
        panel_sums = np.zeros((len(ts),) + shape, dtype=complex)
        np.add.at(panel_sums, panel, contrib)
        new = u0.coeffs + cfg.sign * 1j * np.cumsum(panel_sums, axis=0)
        diff = float(np.max(np.sqrt(np.sum(np.abs(new - w).reshape(len(ts), -1) ** 2, axis=1))))
        history["differences"].append(diff)
        history["iterations"] = it
        w = new
        if len(history["differences"]) > 1:
            prev = history["differences"][-2]
            ratio = diff / prev if prev > 0 else 0.0
            history["ratios"].append(ratio)
            if diff > noise and prev > noise and ratio >= 1.0:
                strikes += 1
                if strikes >= 2:
                    raise NonContractionError(
                        f"Picard differences stopped contracting (ratio {ratio:.3g}); horizon too long", history)
            else:
                strikes = 0
        if diff <= cfg.fixed_point_tol:
            history["converged"] = True
            break
    meaningful = [r for r, a, b in zip(history["ratios"], history["differences"], history["differences"][1:])
                  if a > noise and b > noise]
    history["max_ratio"] = max(meaningful, default=0.0)
    history["times"] = ts.tolist()
    return HermiteField(U(T) * w[-1]), history


def local_existence_time(M: float, c: float, cap: float = math.inf) -> float:
    """T with c T M^2 = 1/2, capped; M = 0 gives the cap."""
    if M < 0 or c <= 0:
        raise ValueError("need M >= 0 and c > 0")
    if M == 0:
        return cap
    return min(cap, 1.0 / (2 * c * M * M))


def measured_trilinear_constant(family: Sequence[HermiteField], kernel: KernelSpec, p: float = 1.0,
                                safety: float = 2.0, k: int = 1) -> float:
    """safety * max over the family of the M^{p,p} trilinear ratio."""
    return safety * max(trilinear_ratio(f, p, p, kernel, k=k) for f in family)


# ---------------------------------------------------------------------------
# Strichartz bookkeeping
# ---------------------------------------------------------------------------

def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x)) if isinstance(x, str) else Fraction(x).limit_denominator(10 ** 9)


def admissible_pair(r, d: int):
    """q with 2/q = d(1/2 - 1/r); r = 2 gives inf, r = inf (d = 1) gives 4."""
    if d < 1:
        raise ValueError("dimension must be positive")
    if r == math.inf:
        if d != 1:
            raise ValueError("r = inf is admissible only for d = 1")
        return Fraction(4)
    r = _as_fraction(r)
    if r < 2:
        raise ValueError("admissible r satisfies r >= 2")
    if d >= 3 and r >= Fraction(2 * d, d - 2):
        raise ValueError(f"r must stay below 2d/(d-2) = {Fraction(2 * d, d - 2)}")
    gap = Fraction(d) * (Fraction(1, 2) - 1 / r)
    if gap == 0:
        return math.inf
    return 2 / gap


def hartree_strichartz_pair(gamma, d: int) -> tuple[Fraction, Fraction]:
    """(q, r) = (8/gamma, 4d/(2d - gamma)) in exact arithmetic."""
    g = _as_fraction(gamma)
    return 8 / g, Fraction(4 * d) / (2 * d - g)


def spacetime_norm(trace: EvolutionTrace, q: float, r: float, box: BoxSpec = BoxSpec()) -> float:
    """|| u ||_{L^q_t L^r_x} from the snapshots: box quadrature in x, trapezoid in t."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    spatial = np.array([synthesize(f, box.rules(f.dim)).lp_norm(r) for f in trace.snapshots])
    t = np.asarray(trace.times)
    if math.isinf(q):
        return float(spatial.max())
    if len(t) == 1:
        return 0.0
    return float(np.trapezoid(spatial ** q, t) ** (1 / q))
