from __future__ import annotations

import numpy as np
import pytest
from conftest import reduced

from effkernel.detect import detect_kernel
from effkernel.errors import DetectionError
from effkernel.reduction import build_effective_system
from effkernel.simulate import Field, SimParams, noise_field, simulate_scalar


def evolve(u: Field, khat, delta):
    """Exact evolution of u_t = K * u over delta, given K_hat on the fftn layout."""
    uh = np.fft.fftn(u.component(0)) * np.exp(delta * khat)
    return Field.scalar(np.fft.ifftn(uh).real, u.spacing, u.time + delta)


def kgrid(n, dx, dim):
    k = 2 * np.pi * np.fft.fftfreq(n, dx)
    return np.abs(k) if dim == 1 else np.hypot(k[:, None], k[None, :])


def test_identical_snapshots_give_zero():
    u = noise_field((64,), 0.5, 1.0, 0)
    res = detect_kernel(u, u, 0.37)
    assert np.all(res.spectrum[~res.mask] == 0.0)


@pytest.mark.parametrize("dim", [1, 2])
def test_gaussian_recovery(dim):
    n, dx = (256, 0.25) if dim == 1 else (64, 0.5)
    k = kgrid(n, dx, dim)
    k0 = np.exp(-(k**2))
    u = noise_field((n,) * dim, dx, 1.0, 1)
    res = detect_kernel(u, evolve(u, k0, 1e-3), 1e-3)
    used = ~res.mask
    err = np.linalg.norm(res.spectrum[used] - k0[used]) / np.linalg.norm(k0[used])
    assert err <= 0.01
    assert res.imag_residue < 1e-6


def test_single_mode_growth_factor():
    n, dx, m = 128, 0.5, 7
    x = np.arange(n) * dx
    k0 = 2 * np.pi * m / (n * dx)
    before = Field.scalar(np.cos(k0 * x), dx)
    g = 1.003
    after = Field.scalar(g * np.cos(k0 * x), dx, 1e-3)
    res = detect_kernel(before, after, 1e-3)
    assert res.n_used == 2  # +/- k0
    assert np.all(np.isclose(res.wavenumbers[~res.mask], k0))
    np.testing.assert_allclose(res.spectrum[~res.mask], (g - 1) / 1e-3, rtol=1e-9)


def test_zero_field_is_undetectable():
    z = Field.scalar(np.zeros(32), 1.0)
    with pytest.raises(DetectionError):
        detect_kernel(z, z, 0.1)


def test_grid_mismatch_and_bad_delta():
    a = noise_field((32,), 1.0, 1.0, 0)
    with pytest.raises(DetectionError):
        detect_kernel(a, noise_field((64,), 1.0, 1.0, 0), 0.1)
    with pytest.raises(DetectionError):
        detect_kernel(a, a, 0.0)


def test_gauge_invariance():
    u = noise_field((128,), 0.5, 1.0, 2)
    k = kgrid(128, 0.5, 1)
    v = evolve(u, -(k**2), 1e-2)
    base = detect_kernel(u, v, 1e-2)
    # power-of-two scaling commutes exactly with the FFT
    scaled = detect_kernel(Field(4.0 * u.values, 0.5), Field(4.0 * v.values, 0.5), 1e-2)
    np.testing.assert_array_equal(base.spectrum, scaled.spectrum)
    np.testing.assert_array_equal(base.mask, scaled.mask)


def test_masking_floor():
    u = noise_field((64,), 0.5, 1.0, 3)
    uh = np.fft.fft(u.component(0))
    uh[5] = uh[-5] = 1e-9  # below 1e-6 of the peak
    weak = Field.scalar(np.fft.ifft(uh).real, 0.5)
    res = detect_kernel(weak, weak, 0.1)
    assert res.mask[5] and res.mask[-5] and np.isnan(res.spectrum[5])


def test_consistency_with_linear_effective_equation():
    _, sp = reduced("three_node", 1)
    n, dx = 256, 0.25
    sys_ = build_effective_system(sp, n, dx, cutoff=None, profiles=False)
    u0 = noise_field((n,), dx, 1.0, 4)
    target = sp.dispersion(kgrid(n, dx, 1))
    deltas = [1e-2, 1e-3, 1e-4]
    errs = []
    for d in deltas:
        after = simulate_scalar(sys_, u0, SimParams(dt=d, steps=1, stepper="exponential")).final
        res = detect_kernel(u0, after, d)
        used = ~res.mask
        errs.append(np.max(np.abs(res.spectrum[used] - target[used])))
    order = np.polyfit(np.log(deltas), np.log(errs), 1)[0]
    assert order >= 0.9
    assert errs[-1] <= 1e-4 * max(1.0, np.max(np.abs(target)))


def test_profiles():
    u = noise_field((16, 16), 0.5, 1.0, 5)
    k = kgrid(16, 0.5, 2)
    res = detect_kernel(u, evolve(u, np.exp(-(k**2)), 1e-4), 1e-4)
    ks, vals = res.radial_profile()
    assert ks[0] == 0.0 and vals[0] == pytest.approx(1.0, abs=1e-3)
    x, prof = res.kernel_profile()
    assert x[np.argmax(prof)] == 0.0
