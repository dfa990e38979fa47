"""The invariant suite behind ``hermion verify``: one check per claim, run in a bounded pool."""

from __future__ import annotations

import math
import os
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .datum import field_family
from .hermite_basis import HermiteField, level_array, uniform_grid
from .nonlinearity import Hartree, hartree_constant, hartree_kernel_fourier, hls_ratio, trilinear_ratio
from .oracles import mollified_kernel_constant
from .propagator import DEFAULT_SIGN
from .solver import (HartreeLaw, PowerLaw, SolverConfig, admissible_pair, evolve_nonlinear,
                     local_existence_time, measured_trilinear_constant, picard_solve, hartree_strichartz_pair)
from .tf_analysis import (TFLattice, fourier_wigner, lattice_for_cutoff, modulation_norm, special_hermite,
                          ui_identity_deviation)


@dataclass
class CheckResult:
    id: str
    claim: str
    passed: bool
    measured: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)
    error: str | None = None

    def as_dict(self) -> dict:
        out = {"id": self.id, "claim": self.claim, "passed": self.passed,
               "measured": self.measured, "tolerance": self.tolerance}
        if self.error is not None:
            out["error"] = self.error
        return out


@dataclass(frozen=True)
class VerifySettings:
    seed: int = 0
    family_size: int = 20
    family_cutoff: int = 8
    tamper_mode: int = -1
    seeds: tuple = (0, 1, 2)
    # spectral decay of the family behind the trilinear constant
    family_decay: float = 0.4


def make_propagator(tamper_mode: int = -1):
    """Exact linear flow; tamper_mode >= 0 negates that mode (along the first axis) as a planted fault."""
    def evolve(f: HermiteField, t: float) -> HermiteField:
        lev = 2 * level_array(f.cutoff, f.dim) + f.dim
        c = np.exp(DEFAULT_SIGN * 1j * t * lev) * f.coeffs
        if 0 <= tamper_mode < f.cutoff:
            idx = (tamper_mode,) + (0,) * (f.dim - 1)
            c[idx] = -c[idx]
        return HermiteField(c)
    return evolve


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_isometry(s: VerifySettings) -> CheckResult:
    evolve = make_propagator(s.tamper_mode)
    fam = field_family(s.family_size, 24, 1, seed=s.seed)
    base = TFLattice(x_extent=16.0, y_extent=16.0)

    def worst(lat):
        err = 0.0
        for f in fam:
            for p in (1.0, 2.0, 4.0):
                n0 = modulation_norm(f, p, p, lat)
                for t in (0.3, 1.0, math.pi / 2):
                    err = max(err, _rel(modulation_norm(evolve(f, t), p, p, lat), n0))
        return err

    coarse, fine = worst(base), worst(base.refined(2))
    shrink = coarse / fine if fine > 0 else math.inf
    ok = coarse <= 1e-3 and fine <= 1e-3 and shrink >= 2.0
    return CheckResult("isometry", "the oscillator group preserves every M^{p,p} norm", ok,
                       {"worst_rel_change": coarse, "worst_rel_change_half_step": fine, "shrink": shrink},
                       {"rel_change": 1e-3, "min_shrink": 2.0})


def check_non_preservation(s: VerifySettings) -> CheckResult:
    evolve = make_propagator(s.tamper_mode)
    c = np.zeros(8, dtype=complex)
    c[:2] = 1.0
    f = HermiteField(c)
    ts = np.linspace(0.0, math.pi, 32)

    def scan(lat):
        n0 = modulation_norm(f, 1.0, 2.0, lat)
        return max(_rel(modulation_norm(evolve(f, t), 1.0, 2.0, lat), n0) for t in ts)

    lat = TFLattice()
    change = scan(lat)
    refined = False
    if change < 1e-2:
        change, refined = scan(lat.refined(2)), True
    return CheckResult("non_preservation", "the oscillator group does not preserve M^{1,2}", change >= 1e-2,
                       {"max_rel_change": change, "refined": refined}, {"min_rel_change": 1e-2})


def check_moyal(s: VerifySettings) -> CheckResult:
    fam = field_family(10, 16, 1, seed=s.seed)
    lat = lattice_for_cutoff(16)
    err = max(_rel(modulation_norm(f, 2.0, 2.0, lat), f.l2_norm()) for f in fam)
    return CheckResult("moyal", "M^{2,2} equals L^2 for a unit window", err <= 1e-6,
                       {"worst_rel_error": err}, {"rel_error": 1e-6})


def check_ui_identity(s: VerifySettings) -> CheckResult:
    fields = []
    for coeffs in ([1], [0, 1], [1, 0, 1j]):
        fields.append(HermiteField(np.array(coeffs, dtype=complex)).resized(4))
    lat = TFLattice()
    dev = max(ui_identity_deviation(f, lat) for f in fields)
    return CheckResult("ui_identity", "Fourier-Wigner and STFT agree up to a phase and a coordinate swap",
                       dev <= 1e-8, {"max_abs_deviation": dev}, {"abs_deviation": 1e-8})


def check_special_hermite(s: VerifySettings) -> CheckResult:
    lat = TFLattice()
    x, y = lat.x_axis, lat.y_axis
    z = (x[:, None] + 1j * y[None, :])[..., None]
    funcs = np.stack([special_hermite([a], z) for a in range(5)])
    gram = np.einsum("axy,bxy->ab", funcs, funcs.conj()) * lat.x_step * lat.y_step
    gram_err = float(np.abs(gram - np.eye(5)).max())
    fw_err = 0.0
    for a in range(5):
        table = fourier_wigner(HermiteField.basis(a, 5), lat).values / math.sqrt(2 * math.pi)
        fw_err = max(fw_err, float(np.abs(table - funcs[a]).max()))
    ok = gram_err <= 1e-6 and fw_err <= 1e-8
    return CheckResult("special_hermite", "special Hermite functions are orthonormal and match the Fourier-Wigner "
                       "transform of Hermite functions", ok,
                       {"gram_max_entry_error": gram_err, "closed_form_max_error": fw_err},
                       {"gram": 1e-6, "closed_form": 1e-8})


def check_conservation(s: VerifySettings) -> CheckResult:
    u0 = field_family(1, s.family_cutoff, 1, seed=s.seed)[0].resized(64)
    measured = {}
    for name, law in (("cubic", PowerLaw(1, -1)), ("hartree", HartreeLaw(Hartree(1.0, 0.4)))):
        cfg = SolverConfig(5.0, 1e-3, nonlinearity=law, monitors=False, conservation_tol=1.0,
                           snapshot_interval=0.1)
        tr = evolve_nonlinear(u0, cfg)
        l2 = np.array([m["l2"] for m in tr.monitors])
        measured[f"{name}_max_rel_drift"] = float(np.abs(l2 / l2[0] - 1).max())
    ok = all(v <= 1e-9 for v in measured.values())
    return CheckResult("conservation", "mass is conserved by the nonlinear flow", ok, measured, {"rel_drift": 1e-9})


def check_revival(s: VerifySettings) -> CheckResult:
    evolve = make_propagator(s.tamper_mode)
    measured = {}
    rng = np.random.default_rng(s.seed)
    for d, n in ((1, 64), (2, 32)):
        f = HermiteField.random(n, d, rng)
        err = float(np.abs(evolve(f, math.pi).coeffs - (-1) ** d * f.coeffs).max())
        measured[f"d{d}_max_coeff_error"] = err
    ok = all(v <= 1e-12 for v in measured.values())
    return CheckResult("revival", "the linear flow at time pi equals (-1)^d times the identity", ok,
                       measured, {"coeff_error": 1e-12})


def check_strang_order(s: VerifySettings) -> CheckResult:
    u0 = field_family(1, s.family_cutoff, 1, seed=s.seed)[0].resized(64)
    law = PowerLaw(1, -1)
    finals = [evolve_nonlinear(u0, SolverConfig(0.5, dt, nonlinearity=law, monitors=False)).final.coeffs
              for dt in (4e-3, 2e-3, 1e-3)]
    e1 = float(np.linalg.norm(finals[0] - finals[1]))
    e2 = float(np.linalg.norm(finals[1] - finals[2]))
    order = math.log2(e1 / e2)
    return CheckResult("strang_order", "Strang splitting converges at second order", 1.8 <= order <= 2.2,
                       {"observed_order": order, "diff_coarse": e1, "diff_fine": e2}, {"order_range": [1.8, 2.2]})


def check_picard(s: VerifySettings) -> CheckResult:
    kernel = Hartree(1.0, 0.4)
    fam = field_family(s.family_size, s.family_cutoff, 1, seed=s.seed, norm=0.5, decay=s.family_decay)
    c = measured_trilinear_constant(fam, kernel, p=1.0)
    law = HartreeLaw(kernel)
    lat = lattice_for_cutoff(64)
    contracted = soft = 0
    worst_ratio = worst_gap = 0.0
    for f in fam:
        u0 = f.resized(64)
        M = 2 * modulation_norm(u0, 1.0, 1.0, lat)
        T = local_existence_time(M, c)
        try:
            uP, hist = picard_solve(u0, SolverConfig(T, T, scheme="picard", nonlinearity=law))
        except RuntimeError:
            continue
        r = hist["max_ratio"]
        worst_ratio = max(worst_ratio, r)
        contracted += r < 1.0
        soft += r <= 0.9
        steps = math.ceil(T / 1e-3)
        uS = evolve_nonlinear(u0, SolverConfig(T, T / steps, nonlinearity=law, monitors=False)).final
        worst_gap = max(worst_gap, float(np.linalg.norm(uP.coeffs - uS.coeffs)))
    frac = contracted / len(fam)
    ok = frac >= 0.95 and worst_gap <= 1e-4
    return CheckResult("picard_contraction", "Picard iteration contracts on the local existence interval", ok,
                       {"trilinear_constant": c, "fraction_contracting": frac, "fraction_ratio_le_0.9": soft / len(fam),
                        "max_ratio": worst_ratio, "max_picard_strang_l2_gap": worst_gap},
                       {"min_fraction": 0.95, "l2_gap": 1e-4})


def check_kernel_transform(s: VerifySettings) -> CheckResult:
    worst = bar = 0.0
    hom = 0.0
    rng = np.random.default_rng(s.seed)
    for d, gamma in ((1, 0.4), (2, 0.5), (3, 1.0)):
        exact = hartree_constant(d, gamma)
        for rho in (0.5, 1.0, 2.0):
            est, err = mollified_kernel_constant(gamma, d, rho)
            worst = max(worst, _rel(est, exact))
            bar = max(bar, err / exact)
        spec = Hartree(1.0, gamma)
        for _ in range(5):
            xi = rng.normal(size=d)
            a, b = hartree_kernel_fourier(spec, 2 * xi), hartree_kernel_fourier(spec, xi)
            hom = max(hom, abs(a - 2.0 ** (gamma - d) * b) / abs(b))
    ok = worst <= 1e-3 and hom <= 1e-12
    return CheckResult("kernel_transform", "the Fourier transform of |x|^-gamma is C |xi|^(gamma-d)", ok,
                       {"worst_rel_error": worst, "oracle_error_bar": bar, "homogeneity_error": hom},
                       {"rel_error": 1e-3, "homogeneity": 1e-12})


def check_hls(s: VerifySettings) -> CheckResult:
    rules = uniform_grid(20.0, 512, 1)
    x = rules[0].nodes
    from .hermite_basis import GridField
    ratios = [hls_ratio(GridField(np.exp(-0.5 * (lam * x) ** 2), rules), 0.5, 4 / 3) for lam in (0.5, 1.0, 2.0)]
    spread = max(ratios) / min(ratios) - 1
    ok = spread <= 0.01 and all(math.isfinite(r) and r > 0 for r in ratios)
    return CheckResult("hls", "Riesz potentials map L^p to L^q with a dilation-invariant ratio", ok,
                       {"ratios": ratios, "spread": spread}, {"spread": 0.01})


def check_trilinear(s: VerifySettings) -> CheckResult:
    kernel = Hartree(1.0, 0.4)
    measured, scale_err = {}, 0.0
    ok = True
    for p, q in ((1.0, 1.0), (2.0, 1.2)):
        sups = []
        for seed in s.seeds:
            fam = field_family(s.family_size, s.family_cutoff, 1, seed=seed, decay=s.family_decay)
            vals = [trilinear_ratio(f, p, q, kernel) for f in fam]
            sups.append(max(vals))
            if seed == s.seeds[0]:
                scale_err = max(scale_err, max(abs(trilinear_ratio(3 * f, p, q, kernel) - v) / v
                                               for f, v in zip(fam[:5], vals[:5])))
        spread = max(sups) / min(sups) - 1
        measured[f"sup_p{p:g}_q{q:g}"] = sups
        measured[f"spread_p{p:g}_q{q:g}"] = spread
        ok &= spread <= 0.10 and all(math.isfinite(v) for v in sups)
    measured["scale_error"] = scale_err
    ok &= scale_err <= 1e-10
    return CheckResult("trilinear", "the Hartree term is bounded trilinearly on M^{p,q}", bool(ok), measured,
                       {"seed_spread": 0.10, "scale_error": 1e-10})


def check_admissible(s: VerifySettings) -> CheckResult:
    rows = []
    ok = True
    for gamma in (Fraction("0.3"), Fraction("0.7")):
        for d in (1, 2, 3):
            q, r = hartree_strichartz_pair(gamma, d)
            lhs, rhs = 2 / q, d * (Fraction(1, 2) - 1 / r)
            good = lhs == rhs and admissible_pair(r, d) == q
            ok &= good
            rows.append({"gamma": str(gamma), "d": d, "q": str(q), "r": str(r), "exact": good})
    return CheckResult("admissible_pair", "(8/gamma, 4d/(2d-gamma)) is a Strichartz-admissible pair", bool(ok),
                       {"pairs": rows}, {"exact": True})


CHECKS: dict[str, Callable[[VerifySettings], CheckResult]] = {
    "01_isometry": check_isometry,
    "02_non_preservation": check_non_preservation,
    "03_moyal": check_moyal,
    "04_ui_identity": check_ui_identity,
    "05_special_hermite": check_special_hermite,
    "06_conservation": check_conservation,
    "07_revival": check_revival,
    "08_strang_order": check_strang_order,
    "09_picard_contraction": check_picard,
    "10_kernel_transform": check_kernel_transform,
    "11_hls": check_hls,
    "12_trilinear": check_trilinear,
    "13_admissible_pair": check_admissible,
}


def resolve_ids(only: str | None) -> list[str]:
    if only is None:
        return list(CHECKS)
    hits = [k for k in CHECKS if only in (k, k.split("_", 1)[1], k.split("_", 1)[0])]
    if not hits:
        raise KeyError(only)
    return hits


def thread_count() -> int:
    env = os.environ.get("HERMION_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def _run_one(key: str, settings: VerifySettings) -> tuple[CheckResult, float]:
    start = time.perf_counter()
    try:
        res = CHECKS[key](settings)
        res.id = key
    except Exception as exc:  # a crashing check is a failed check
        res = CheckResult(key, CHECKS[key].__doc__ or key, False,
                          error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")
    return res, time.perf_counter() - start


def run_checks(settings: VerifySettings, ids: list[str] | None = None,
               threads: int | None = None) -> tuple[list[CheckResult], dict]:
    """Results sorted by id plus a separate {id: seconds} map."""
    ids = ids or list(CHECKS)
    with ThreadPoolExecutor(max_workers=threads or thread_count()) as pool:
        done = list(pool.map(lambda k: _run_one(k, settings), ids))
    done.sort(key=lambda pair: pair[0].id)
    return [r for r, _ in done], {r.id: t for r, t in done}
