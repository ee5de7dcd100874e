from __future__ import annotations

import warnings

import numpy as np
import pytest
from conftest import reduced

from effkernel.eigenflow import LambdaH, WavenumberGrid, fit_lambda_h, sample_eigenvalues
from effkernel.errors import ComplexBranchesError, DecayWarning, RegularizationError
from effkernel.lambert import DelayParams
from effkernel.netspec import NetworkSpec, TransportTerm, builtin_presets
from effkernel.reduction import (
    CutoffSpec,
    Mollifier,
    RegularizationMode,
    build_effective_system,
    invert_kernel_1d,
    invert_kernel_radial,
    p_star_collision,
    p_star_complex,
    p_star_real,
    reduce_complex,
    reduce_real,
    regularize,
    torus_distance,
)
from effkernel.simulate import kernel_transform, wavenumber_magnitude
from effkernel.spectral import assemble_symbol

GRID = WavenumberGrid()
PARAMS = DelayParams(0.1, 0.05)


def regularized(name, dim=1, variant="uniform"):
    sym = assemble_symbol(builtin_presets(name), dim)
    lam = fit_lambda_h(sample_eigenvalues(sym, GRID))
    return regularize(sym, lam, RegularizationMode(variant, 0.05))


# --------------------------------------------------------------------------
# regularization


def test_split_activator_parts():
    reg = regularized("activator_inhibitor", variant="split")
    s = np.array([0.0, 1.5, 7.0])
    np.testing.assert_allclose(reg.unbounded_part(s)[:, 0, 0], 0.0, atol=1e-14)
    np.testing.assert_allclose(reg.unbounded_part(s)[:, 1, 1], -(3.0 - 0.05) * s**2, rtol=1e-12)
    np.testing.assert_allclose(reg.bounded_part(s), np.broadcast_to([[1, -1], [4, -3]], (3, 2, 2)), atol=1e-12)
    expected = reg.unbounded_part(s) + np.exp(-0.05 * s**2)[:, None, None] * reg.bounded_part(s)
    np.testing.assert_allclose(reg(s), expected)


def test_uniform_at_origin_is_unchanged():
    for name in ("activator_inhibitor", "pigment", "proneural"):
        reg = regularized(name, 2)
        np.testing.assert_array_equal(reg(0.0), reg.symbol(0.0))


def test_three_node_uniform_is_damped_symbol():
    reg = regularized("three_node")
    assert reg.lambda_h == LambdaH(0, 0.0)
    s = np.linspace(0, 10, 11)
    np.testing.assert_allclose(reg(s), np.exp(-0.05 * s**2)[:, None, None] * reg.symbol(s), atol=1e-15)


def test_split_rejects_growing_immobile_component():
    spec = NetworkSpec(("u", "v"), (TransportTerm(), TransportTerm.diffusion(1.0)), ())
    with pytest.raises(RegularizationError):
        regularize(assemble_symbol(spec), LambdaH(2, -0.5), RegularizationMode("split", 0.05))


def test_mollifier_properties():
    moll = Mollifier(0.3)
    s = np.linspace(0, 200, 2001)
    assert np.all(moll.transform(s) >= 0)
    x = np.linspace(-0.3, 0.3, 60_001)
    prof = moll.profile(x)
    assert np.trapezoid(prof, x) == pytest.approx(1.0, abs=1e-8)
    # gamma_1 = (1/2) int x^2 J_eps / eps^2
    assert 0.5 * np.trapezoid(x**2 * prof, x) / 0.3**2 == pytest.approx(moll.second_moment, rel=1e-6)


def test_mollifier_expansion_order():
    """||J_eps * u - u - eps^2 gamma_1 u''|| = O(eps^4), by direct quadrature."""
    u = lambda x: np.cos(x) + 0.5 * np.sin(2 * x)
    upp = lambda x: -np.cos(x) - 2.0 * np.sin(2 * x)
    x0 = np.linspace(0, 2 * np.pi, 33)
    nodes, weights = np.polynomial.legendre.leggauss(40)
    errs = []
    epss = [0.1, 0.05, 0.025]
    for eps in epss:
        moll = Mollifier(eps)
        conv = np.zeros_like(x0)
        for a, b in ((-eps, 0.0), (0.0, eps)):  # J is linear on each half
            y = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            w = 0.5 * (b - a) * weights
            conv += (moll.profile(y)[None, :] * u(x0[:, None] - y[None, :])) @ w
        errs.append(np.max(np.abs(conv - u(x0) - eps**2 * moll.second_moment * upp(x0))))
    order = np.polyfit(np.log(epss), np.log(errs), 1)[0]
    assert order >= 3.5


# --------------------------------------------------------------------------
# scalar reduction


def test_activator_exact_spectrum():
    _, sp = reduced("activator_inhibitor", 1, "exact")
    assert sp.kind == "scalar"
    assert sp.scalar[0] == pytest.approx(-1.0, abs=1e-7)
    assert sp.scalar.max() > 0
    peak = sp.s[np.argmax(sp.scalar)]
    assert 0 < peak < 5


def test_single_component_pure_diffusion_is_zero():
    spec = NetworkSpec(("u",), (TransportTerm.diffusion(0.4),), ())
    sym = assemble_symbol(spec)
    lam = fit_lambda_h(sample_eigenvalues(sym, GRID))
    reg = regularize(sym, lam, RegularizationMode())
    for method in ("exact", "way1", "way2"):
        np.testing.assert_array_equal(reduce_real(reg, GRID, PARAMS, method).scalar, 0.0)


def test_three_node_turing_signature():
    _, sp = reduced("three_node", 1, "way2")
    assert sp.scalar[0] < 0
    assert sp.scalar[1:].max() > 0


def test_exact_rejects_complex_branches():
    with pytest.raises(ComplexBranchesError):
        reduce_real(regularized("proneural_salt_pepper", 2), GRID, PARAMS, "exact")


def test_way2_matches_exact_in_identity_regime():
    _, ex = reduced("activator_inhibitor", 1, "exact")
    _, w2 = reduced("activator_inhibitor", 1, "way2")
    assert np.all(w2.scalar > -10.0)
    np.testing.assert_allclose(ex.scalar, w2.scalar, atol=1e-9)


@pytest.mark.parametrize("name", ["activator_inhibitor", "three_node", "pigment", "pigment_rescaled",
                                  "pigment_k1_zero", "proneural", "proneural_salt_pepper"])
@pytest.mark.parametrize("dim", [1, 2])
def test_origin_consistency_and_decay(name, dim):
    br, sp = reduced(name, dim)
    lam0 = br.lambda_max[0]
    if lam0 > -10.0:
        growth0 = sp.dispersion()[0]
        assert abs(growth0 - lam0) <= 1e-9
    assert sp.decay_ratio < 1e-4


def test_decay_warning_on_short_grid():
    reg = regularized("activator_inhibitor")
    with pytest.warns(DecayWarning):
        reduce_real(reg, WavenumberGrid(3.0, 256), PARAMS, "exact")


# --------------------------------------------------------------------------
# pair reduction


def test_way2_pair_identities():
    _, sp = reduced("proneural_salt_pepper", 2, "way2")
    assert sp.kind == "pair"
    col = sp.collision
    v = sp.values
    assert np.all(v["p"] == 1.0)
    win = col.complex_mask
    assert np.max(np.abs(v["q"][win] + col.b[win] ** 2)) <= 1e-10
    assert np.all(v["q"][~win] == 0.0)
    np.testing.assert_array_equal(v["nu1"][win], col.a[win])
    np.testing.assert_array_equal(v["nu2"][win], col.a[win])


def test_p_star_at_collision():
    assert p_star_collision(-0.5, 0.1) == pytest.approx(np.exp(-0.05) * 0.95, abs=1e-15)
    assert p_star_collision(-0.5, 0.1) == pytest.approx(0.9036, abs=1e-4)
    # both one-sided formulas tend to the collision value
    for h in (1e-3, 1e-5):
        assert p_star_real(-0.5 - h, -0.5 + h, 0.1) == pytest.approx(0.9036, abs=2e-4)
        assert p_star_complex(-0.5, h, 0.1) == pytest.approx(p_star_collision(-0.5, 0.1), abs=1e-6)
    assert p_star_real(-0.5, -0.5, 0.1) == p_star_collision(-0.5, 0.1)


@pytest.mark.parametrize("method", ["way1", "way2"])
def test_pair_curves_continuous_at_window_edge(method):
    _, sp = reduced("proneural_salt_pepper", 2, method)
    i = int(np.flatnonzero(sp.collision.complex_mask)[-1])
    h = sp.grid.spacing
    for name in sp.curve_names():
        c = sp.values[name]
        slope = np.max(np.abs(np.diff(c[max(i - 20, 0):i]))) + np.max(np.abs(np.diff(c[i + 1:i + 21])))
        assert abs(c[i + 1] - c[i]) <= 10 * max(slope, h), name


def test_way1_pair_collision_value():
    _, sp = reduced("proneural_salt_pepper", 2, "way1")
    v = sp.values
    win = sp.collision.complex_mask
    a, b = sp.collision.a[win], sp.collision.b[win]
    np.testing.assert_allclose(v["p"][win], p_star_complex(a, b, 0.1), rtol=1e-12)
    b_star = np.exp(0.1 * a) * (b * np.cos(0.1 * b) + a * np.sin(0.1 * b))
    np.testing.assert_allclose(v["q"][win], -b_star * b, rtol=1e-12)


def test_reduce_complex_requires_window():
    from effkernel.errors import UnsupportedStructureError

    with pytest.raises(UnsupportedStructureError):
        reduce_complex(regularized("activator_inhibitor"), GRID, PARAMS)


# --------------------------------------------------------------------------
# inversion


def test_gaussian_1d():
    s = GRID.samples
    x = np.linspace(-10, 10, 401)
    k = invert_kernel_1d(s, np.exp(-(s**2)), x)
    assert np.max(np.abs(k - np.exp(-(x**2) / 4) / (2 * np.sqrt(np.pi)))) <= 1e-6


def test_gaussian_radial_both_routes():
    s = GRID.samples
    r = np.linspace(0, 10, 201)
    k, diff = invert_kernel_radial(s, np.exp(-(s**2)), r, check=True)
    assert np.max(np.abs(k - np.exp(-(r**2) / 4) / (4 * np.pi))) <= 1e-6
    assert diff <= 1e-8


def test_zero_spectrum_zero_kernel():
    s = GRID.samples
    assert not np.any(invert_kernel_1d(s, np.zeros_like(s), np.linspace(-5, 5, 11)))
    assert not np.any(invert_kernel_radial(s, np.zeros_like(s), np.linspace(0, 5, 11)))


def test_activator_mexican_hat():
    _, sp = reduced("activator_inhibitor", 1, "exact")
    sys_ = build_effective_system(sp, 1024, 0.2)
    x, k = sys_.profiles["K"]
    zero = np.argmin(np.abs(x))
    assert k[zero] > 0 and k.min() < 0
    assert x[np.argmin(k)] != 0


def test_three_node_radial_kernel_shape():
    _, sp = reduced("three_node", 2, "way2")
    r, k = build_effective_system(sp, 256, 0.5).profiles["K"]
    assert k[0] > 0
    assert k[1:40].min() < 0


def test_torus_kernel_transform_equals_spectrum():
    _, sp = reduced("pigment", 2)
    sys_ = build_effective_system(sp, 64, 0.5, profiles=False)
    hat = kernel_transform(sys_.kernels["K"], 0.5)
    kmag = wavenumber_magnitude((64, 64), 0.5)
    np.testing.assert_allclose(hat.real, sp.evaluate(kmag)["mu"], atol=1e-12)


def test_round_trip_profile_forward_transform():
    _, sp = reduced("three_node", 1, "way2")
    x = np.linspace(-400, 400, 16001)
    k = invert_kernel_1d(sp.s, sp.scalar, x)
    test_s = sp.s[sp.s <= 10]
    fwd = np.trapezoid(k[None, :] * np.cos(np.outer(test_s, x)), x, axis=1)
    mu = sp.scalar[: test_s.size]
    assert np.linalg.norm(fwd - mu) / np.linalg.norm(mu) <= 1e-4


def test_kernels_even_and_radial():
    _, sp = reduced("pigment", 2)
    k = build_effective_system(sp, 64, 0.5, profiles=False).kernels["K"]
    np.testing.assert_allclose(k, k.T, atol=1e-14)
    np.testing.assert_allclose(k[1:, :], k[1:, :][::-1, :], atol=1e-14)
    # periodic images and the grid's band limit break exact radial symmetry;
    # on a grid fine enough for the spectrum to decay below Nyquist the torus
    # kernel follows the radial profile near the origin
    full = build_effective_system(sp, 256, 0.2)
    r, prof = full.profiles["K"]
    k = full.kernels["K"]
    dist = torus_distance(256, 0.2, 2)
    near = dist <= 8.0
    expected = np.interp(dist[near], r, prof)
    assert np.max(np.abs(k[near] - expected)) <= 2e-2 * np.max(np.abs(prof))


def test_effective_system_slots():
    _, scal = reduced("activator_inhibitor", 1, "exact")
    s1 = build_effective_system(scal, 128, 0.2, profiles=False)
    assert set(s1.kernels) == {"K"} and s1.lambda_h.coefficient == pytest.approx(-0.05)
    _, w2 = reduced("proneural_salt_pepper", 2, "way2")
    s2 = build_effective_system(w2, 32, 0.5, CutoffSpec(2.0), profiles=False)
    assert set(s2.kernels) == {"K", "M", "N"} and s2.l_identity == 1.0 and s2.cutoff.u_star == 2.0
    assert s2.lambda_h == LambdaH(0, 0.0)
    _, w1 = reduced("proneural_salt_pepper", 2, "way1")
    s3 = build_effective_system(w1, 32, 0.5, profiles=False)
    assert set(s3.kernels) == {"K", "L", "M", "N"}
