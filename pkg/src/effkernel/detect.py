"""Kernel detection from two snapshots of a scalar field.

For u_t = K * u, each Fourier mode evolves as u_hat(t + d) = e^{d K_hat} u_hat(t),
so K_hat ~ (u_hat(t + d)/u_hat(t) - 1)/d with an O(d) error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DetectionError
from .simulate import Field

DEFAULT_FLOOR = 1e-6


@dataclass
class DetectionResult:
    wavenumbers: np.ndarray  # |k| per mode, full fftn layout
    spectrum: np.ndarray  # real part of K_hat, NaN where masked
    mask: np.ndarray  # True where the mode was excluded
    delta: float
    kernel: np.ndarray  # real-space kernel on the field grid (origin at index 0)
    spacing: float
    imag_residue: float

    @property
    def n_used(self) -> int:
        return int(np.count_nonzero(~self.mask))

    def radial_profile(self) -> tuple[np.ndarray, np.ndarray]:
        """Unmasked spectrum averaged over modes sharing the same |k|."""
        k = np.round(self.wavenumbers[~self.mask], 10)
        v = self.spectrum[~self.mask]
        uniq, inv = np.unique(k, return_inverse=True)
        return uniq, np.bincount(inv, v) / np.bincount(inv)

    def kernel_profile(self) -> tuple[np.ndarray, np.ndarray]:
        """Kernel along the first axis, centred: (x, K(x))."""
        n = self.kernel.shape[0]
        line = self.kernel if self.kernel.ndim == 1 else self.kernel[:, 0]
        idx = np.arange(n)
        x = np.where(idx < n - idx, idx, idx - n) * self.spacing
        order = np.argsort(x)
        return x[order], line[order]


def detect_kernel(before: Field, after: Field, delta: float, floor: float = DEFAULT_FLOOR,
                  component: int = 0) -> DetectionResult:
    """Per-mode ratio estimate of K_hat; modes with |u_hat| < floor * max are masked."""
    if before.shape != after.shape or before.spacing != after.spacing:
        raise DetectionError("snapshots must share a grid")
    if not delta > 0:
        raise DetectionError("delta must be positive")
    ub = np.fft.fftn(before.component(component))
    ua = np.fft.fftn(after.component(component))
    mag = np.abs(ub)
    top = mag.max()
    if top == 0:
        raise DetectionError("every mode is masked (zero field); detection is impossible")
    mask = mag < floor * top
    if mask.all():
        raise DetectionError("every mode is masked; detection is impossible")
    # (after - before) / before equals ratio - 1 without the cancellation
    rel = np.zeros_like(ub)
    rel[~mask] = (ua[~mask] - ub[~mask]) / ub[~mask]
    khat = rel / delta
    residue = float(np.max(np.abs(khat.imag[~mask])))
    spec = np.where(mask, np.nan, khat.real)
    dim = before.dimension
    kernel = np.fft.ifftn(np.where(mask, 0.0, khat.real)).real / before.spacing**dim
    axes = [2 * np.pi * np.fft.fftfreq(n, before.spacing) for n in before.shape]
    if dim == 1:
        kmag = np.abs(axes[0])
    else:
        kmag = np.hypot(axes[0][:, None], axes[1][None, :])
    return DetectionResult(kmag, spec, mask, float(delta), kernel, before.spacing, residue)
