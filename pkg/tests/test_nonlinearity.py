import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate
from scipy.special import gamma as Gamma

from hermion.datum import field_family
from hermion.hermite_basis import GridField, HermiteField, uniform_grid
from hermion.nonlinearity import (BoundaryDecayError, BoxSpec, ExponentRangeError, GridKernel, Hartree,
                                  RealEntireSeries, convolve, gaussian_multiplier, hartree_constant,
                                  hartree_kernel_fourier, hartree_term, hls_ratio, kernel_split, lipschitz_ratio,
                                  power_nonlinearity, real_entire_apply, riesz_potential, split_by_level,
                                  trilinear_ratio)
from hermion.oracles import mollified_kernel_constant

BOX = BoxSpec().rules(1)
X = BOX[0].nodes


def gaussian_box(shift=0.0, width=1.0, phase=0.0):
    return GridField(np.exp(-(X - shift) ** 2 / (2 * width ** 2) + 1j * phase * X), BOX)


def riesz_quad(gamma, x0, density):
    """int |x0 - y|^-gamma density(y) dy split at the singularity."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return sum(integrate.quad(lambda y: abs(x0 - y) ** -gamma * density(y), a, b, limit=400)[0]
                   for a, b in ((-40.0, x0), (x0, 40.0)))


# kernel transform

def test_homogeneity_and_zero_coupling():
    spec = Hartree(1.3, 0.4)
    for xi in (0.3, 1.0, 7.5):
        assert hartree_kernel_fourier(spec, 2 * xi) == pytest.approx(2 ** -0.6 * hartree_kernel_fourier(spec, xi),
                                                                      rel=1e-14)
    assert hartree_kernel_fourier(Hartree(0.0, 0.4), 1.0) == 0.0


def test_singular_frequency_rejected():
    with pytest.raises(ZeroDivisionError):
        hartree_kernel_fourier(Hartree(1.0, 0.4), 0.0)
    with pytest.raises(ValueError):
        hartree_kernel_fourier(Hartree(1.0, 1.2), 1.0)


def test_constant_against_mollified_oracle():
    est, bar = mollified_kernel_constant(0.4, 1, 1.0)
    assert hartree_kernel_fourier(Hartree(1.0, 0.4), 1.0) == pytest.approx(est, rel=1e-3)
    assert bar / est < 1e-3


@pytest.mark.parametrize("gamma", [0.2, 0.4, 0.7])
def test_constant_against_one_dimensional_cosine_transform(gamma):
    # sqrt(2/pi) int_0^inf x^-g cos x dx = sqrt(2/pi) Gamma(1-g) sin(pi g / 2)
    ref = math.sqrt(2 / math.pi) * Gamma(1 - gamma) * math.sin(math.pi * gamma / 2)
    assert hartree_constant(1, gamma) == pytest.approx(ref, rel=1e-13)


# convolution on the box

@pytest.mark.parametrize("gamma", [0.4, 0.8])
def test_hartree_convolution_matches_direct_quadrature(gamma):
    pot = convolve(np.exp(-X * X), Hartree(1.0, gamma), BOX)
    for i in (128, 140, 165):
        ref = riesz_quad(gamma, X[i], lambda y: math.exp(-y * y))
        assert pot[i].real == pytest.approx(ref, rel=1e-8)


def test_hartree_convolution_two_dimensional_center():
    rules = uniform_grid(10.0, 128, 2)
    x = rules[0].nodes
    rho = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2))
    pot = convolve(rho, Hartree(1.0, 0.5), rules)
    # int |y|^-g e^{-|y|^2} dy over the plane = pi Gamma(1 - g/2)
    assert pot[64, 64].real == pytest.approx(math.pi * Gamma(0.75), rel=1e-10)


def test_zero_field_and_realness():
    assert np.all(hartree_term(GridField(np.zeros_like(X, dtype=complex), BOX), Hartree(1.0, 0.4)).values == 0)
    u = gaussian_box(1.0, 1.3, phase=0.7)
    pot = convolve(np.abs(u.values) ** 2, Hartree(1.0, 0.4), BOX)
    assert np.abs(pot.imag).max() <= 1e-12 * np.abs(pot).max()


def test_dirac_limit():
    u = gaussian_box(0.5, 1.2)
    k = gaussian_multiplier(0.05)
    a = hartree_term(u, k).values
    b = power_nonlinearity(u).values
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 0.02


def test_grid_kernel_matches_fourier_kernel():
    w = 0.5
    samples = np.exp(-X * X / (2 * w * w)) / math.sqrt(2 * math.pi * w * w)
    u = gaussian_box(0.0, 1.0)
    a = hartree_term(u, GridKernel(samples, BOX[0].half_width)).values
    b = hartree_term(u, gaussian_multiplier(w)).values
    assert np.abs(a - b).max() <= 1e-12


def test_boundary_decay_guard():
    with pytest.raises(BoundaryDecayError):
        hartree_term(gaussian_box(0.0, 6.0), Hartree(1.0, 0.4))


@given(st.floats(0, 2 * math.pi), st.floats(0.2, 3.0))
@settings(max_examples=20, deadline=None)
def test_gauge_and_homogeneity(theta, c):
    u = gaussian_box(0.3, 1.1, phase=0.4)
    kern = Hartree(1.0, 0.4)
    base = hartree_term(u, kern).values
    rot = hartree_term(u.with_values(np.exp(1j * theta) * u.values), kern).values
    assert np.abs(rot - np.exp(1j * theta) * base).max() <= 1e-12 * np.abs(base).max()
    scaled = hartree_term(u.with_values(c * u.values), kern).values
    assert np.abs(scaled - c ** 3 * base).max() <= 1e-12 * c ** 3 * np.abs(base).max()


# kernel split

def test_kernel_split_reconstructs():
    spec = Hartree(1.0, 0.5)
    ks = kernel_split(spec, 2, r=2.0)
    xi = np.random.default_rng(0).normal(scale=2.0, size=(200, 2))
    full = np.array([hartree_kernel_fourier(spec, v) for v in xi])
    assert np.allclose(ks.low.func(xi) + ks.high.func(xi), full, rtol=1e-15, atol=0)
    assert np.all(ks.low.func(xi)[np.linalg.norm(xi, axis=1) > 1] == 0)


def test_kernel_split_norms_two_dimensions():
    # radial integrals: ||k1||_1 = 2 pi A / gamma, ||k2||_2^2 = 2 pi A^2 / (r (d - gamma) - d)
    g, d, r = 0.5, 2, 2.0
    ks = kernel_split(Hartree(1.0, g), d, r)
    amp = hartree_constant(d, g)
    assert ks.low_l1 == pytest.approx(2 * math.pi * amp / g, rel=1e-10)
    assert ks.high_lr == pytest.approx(math.sqrt(2 * math.pi * amp ** 2 / (r * (d - g) - d)), rel=1e-10)


def test_kernel_split_threshold():
    with pytest.raises(ExponentRangeError):
        kernel_split(Hartree(1.0, 0.5), 2, r=4 / 3)


def test_split_by_level():
    f = np.random.default_rng(1).normal(scale=2.0, size=500) * np.exp(-np.linspace(-5, 5, 500) ** 2)
    g, h = split_by_level(f)
    assert np.array_equal(g + h, f)
    assert np.all(np.abs(h) <= 1) and np.all((g == 0) | (np.abs(g) > 1))
    assert np.isfinite(np.sum(np.abs(g) ** 1.5)) and np.isfinite(np.sum(np.abs(h) ** 4))


# power and series nonlinearities

def test_gross_pitaevskii_patch():
    assert np.all(power_nonlinearity(np.ones(7), 1, -1) == -1)
    assert np.all(power_nonlinearity(np.zeros(3)) == 0)


@given(st.floats(0, 2 * math.pi), st.integers(1, 3), st.sampled_from([-1, 1]))
@settings(max_examples=30, deadline=None)
def test_power_gauge_and_modulus(theta, k, sign):
    u = np.random.default_rng(k).normal(size=50) + 1j * np.random.default_rng(k + 9).normal(size=50)
    u[::7] = 0
    out = power_nonlinearity(u, k, sign)
    assert np.allclose(power_nonlinearity(np.exp(1j * theta) * u, k, sign), np.exp(1j * theta) * out, atol=1e-12)
    assert np.allclose(np.abs(out), np.abs(u) ** (2 * k + 1), rtol=1e-14)
    assert np.all(out[::7] == 0)


@pytest.mark.parametrize("k,sign", [(1, 1), (1, -1), (2, 1), (3, -1)])
def test_series_reproduces_power(k, sign):
    u = gaussian_box(0.2, 1.0, phase=1.3)
    a = real_entire_apply(RealEntireSeries.from_power(k, sign), u).values
    assert np.allclose(a, power_nonlinearity(u, k, sign).values, rtol=1e-13, atol=1e-15)


def test_series_explicit_cubic_coefficients():
    # (s^2 + t^2)(s + i t) = s^3 + s t^2 + i s^2 t + i t^3
    a = np.zeros((4, 4), dtype=complex)
    a[3, 0], a[1, 2], a[2, 1], a[0, 3] = 1, 1, 1j, 1j
    u = np.array([0.3 - 1.2j, 2.0 + 0.5j, 0.0])
    assert np.allclose(RealEntireSeries(a)(u), np.abs(u) ** 2 * u, rtol=1e-15)


def test_zero_series_and_constant_term():
    assert np.all(RealEntireSeries(np.zeros((3, 3)))(np.array([1 + 1j, 2.0])) == 0)
    with pytest.raises(ValueError):
        RealEntireSeries(np.ones((2, 2)))


def test_majorant_dominates():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    a[0, 0] = 0
    ser = RealEntireSeries(a)
    u = rng.normal(size=300) + 1j * rng.normal(size=300)
    assert np.abs(ser(u)).max() <= ser.majorant(np.abs(u.real).max(), np.abs(u.imag).max())


def test_truncation_within_majorant_tail():
    # F(s, t) = s e^{s + t} has a_mn = 1 / ((m-1)! n!) for m >= 1
    def rule(m, n):
        return 0.0 if m == 0 else 1.0 / (math.factorial(m - 1) * math.factorial(n))
    ser = RealEntireSeries.from_callable(rule, degree=12)
    u = np.array([0.4 + 0.3j, -0.7 + 0.1j, 0.9 - 0.8j])
    exact = u.real * np.exp(u.real + u.imag)
    err = np.abs(ser(u) - exact).max()
    bound = ser.tail_bound(np.abs(u.real).max(), np.abs(u.imag).max())
    assert 0 < err <= bound


# estimate diagnostics

def test_riesz_potential_matches_quadrature():
    rules = uniform_grid(20.0, 512, 1)
    x = rules[0].nodes
    pot, h, _ = riesz_potential(GridField(np.exp(-0.5 * x * x), rules), 0.5)
    mid = len(pot) // 2
    for x0 in (0.0, 1.25, 5.0):
        ref = riesz_quad(0.5, x0, lambda y: math.exp(-0.5 * y * y))
        assert pot[mid + round(x0 / h)].real == pytest.approx(ref, rel=1e-3)


def test_hls_ratio_invariances():
    rules = uniform_grid(20.0, 512, 1)
    x = rules[0].nodes
    f = GridField(np.exp(-0.5 * x * x), rules)
    r1 = hls_ratio(f, 0.5, 4 / 3)
    assert 0 < r1 < math.inf
    assert hls_ratio(f.with_values(2 * f.values), 0.5, 4 / 3) == pytest.approx(r1, rel=1e-12)
    dil = [hls_ratio(GridField(np.exp(-0.5 * (lam * x) ** 2), rules), 0.5, 4 / 3) for lam in (0.5, 1.0, 2.0)]
    assert max(dil) / min(dil) - 1 <= 0.01


def test_hls_exponent_range():
    f = GridField(np.exp(-X * X), BOX)
    with pytest.raises(ExponentRangeError):
        hls_ratio(f, 0.5, 2.0)


def test_trilinear_ground_state_and_scale():
    kern = Hartree(1.0, 0.4)
    phi0 = HermiteField.basis(0, 4)
    r = trilinear_ratio(phi0, 1, 1, kern)
    assert 0 < r < math.inf
    f = field_family(1, 8, seed=2, decay=0.4)[0]
    assert trilinear_ratio(3 * f, 2, 1.2, kern) == pytest.approx(trilinear_ratio(f, 2, 1.2, kern), rel=1e-10)


@pytest.mark.parametrize("p,q,k,kern", [(2.5, 1, 1, Hartree(1.0, 0.4)), (1, 1.8, 1, Hartree(1.0, 0.4)),
                                        (1, 1, 2, Hartree(1.0, 0.4)), (1, 1.5, 2, gaussian_multiplier(1.0))])
def test_trilinear_range_enforced(p, q, k, kern):
    with pytest.raises(ExponentRangeError):
        trilinear_ratio(HermiteField.basis(0, 4), p, q, kern, k=k)


def test_lipschitz_quotient_is_stable():
    kern = Hartree(1.0, 0.4)
    sups = []
    for seed in (0, 1):
        fam = field_family(20, 8, seed=seed, decay=0.4)
        vals = [lipschitz_ratio(fam[2 * i], fam[2 * i + 1], 1, 1, kern) for i in range(10)]
        assert all(0 < v < math.inf for v in vals)
        sups.append(max(vals))
    assert max(sups) / min(sups) - 1 <= 0.25
