"""Fourier-space symbol B(s) of a network.

``s`` is the wavenumber: xi in 1D and the radial R = |(xi, eta)| in 2D.
Every transform that enters B is real and even in s, so the symbol is a
real matrix; complex numbers first appear at the eigenvalue stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpecValidationError
from .netspec import NetworkSpec, TransportTerm, validate

THETA_NODES = 129
THETA_TOL = 1e-12
_MAX_THETA_NODES = 1 << 16


def fourier_transport(term: TransportTerm, s, dimension: int = 1):
    """Fourier transform of a transport term at wavenumber ``s``."""
    s = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s)):
        raise ValueError("wavenumber must be finite")
    if term.kind == "diffusion":
        out = -term.d * s**2
    elif term.kind == "custom_kernel":
        pts = np.asarray(term.samples, dtype=float)
        out = np.interp(np.abs(s), pts[:, 0], pts[:, 1])
    else:
        out = np.zeros_like(s)
    return out if out.ndim else float(out)


def theta_quadrature_j0(z, nodes: int = THETA_NODES, tol: float = THETA_TOL):
    """Bessel J0 from its integral form (2/pi) * int_0^{pi/2} cos(z sin t) dt.

    Composite trapezoid on ``nodes`` points, halving the spacing until two
    successive refinements differ by less than ``tol``.  The integrand is the
    quarter of a smooth periodic function, so convergence is geometric once
    the node count exceeds roughly |z|.
    """
    z = np.asarray(z, dtype=float)
    flat = z.ravel()

    def trap(m):
        theta = np.linspace(0.0, np.pi / 2, m)
        w = np.full(m, 1.0)
        w[0] = w[-1] = 0.5
        w *= (np.pi / 2) / (m - 1)
        # chunk to keep the (len(z), m) work array modest
        out = np.empty(flat.shape)
        step = max(1, 2_000_000 // m)
        sin_t = np.sin(theta)
        for i in range(0, flat.size, step):
            out[i : i + step] = np.cos(np.outer(flat[i : i + step], sin_t)) @ w
        return out * (2 / np.pi)

    m = nodes
    prev = trap(m)
    while True:
        m = 2 * m - 1
        cur = trap(m)
        if np.max(np.abs(cur - prev), initial=0.0) < tol or m > _MAX_THETA_NODES:
            break
        prev = cur
    cur[flat == 0.0] = 1.0  # exact value; the weighted sum can be off by one ulp
    out = cur.reshape(z.shape)
    return out if out.ndim else float(out)


def ring_mass(l: float, dimension: int, normalization: str = "unit") -> float:
    """Total mass of the ring measure at distance ``l``."""
    if normalization == "unit":
        return 1.0
    if normalization == "measure":
        # two point masses in 1D, arc length of the circle in 2D
        return 2.0 if dimension == 1 else 2 * np.pi * l
    raise ValueError(f"unknown ring normalization {normalization!r}")


def ring_transform(l: float, s, dimension: int = 1, normalization: str = "unit"):
    """Fourier transform of the ring kernel at distance ``l``.

    Unit normalization gives cos(s l) in 1D and J0(l s) in 2D, both equal to
    1 at s = 0.  The "measure" normalization scales by the ring's mass.
    """
    if not l > 0:
        raise ValueError("ring distance must be positive")
    s = np.asarray(s, dtype=float)
    if dimension == 1:
        out = np.cos(s * l)
    elif dimension == 2:
        out = np.asarray(theta_quadrature_j0(l * s))
    else:
        raise ValueError("dimension must be 1 or 2")
    out = ring_mass(l, dimension, normalization) * out
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SpectralSymbol:
    """B(s) = diag(transport(s)) + A_hat(s) for a validated network."""

    spec: NetworkSpec
    dimension: int

    @property
    def size(self) -> int:
        return self.spec.size

    def transport_part(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros(s.shape + (self.size, self.size))
        for i, term in enumerate(self.spec.transport):
            out[..., i, i] = fourier_transport(term, s, self.dimension)
        return out

    def interaction_part(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.broadcast_to(self.spec.local_matrix(), s.shape + (self.size, self.size)).copy()
        cache: dict[float, np.ndarray] = {}
        for row, col, gain, l in self.spec.ring_terms():
            if l not in cache:
                cache[l] = np.asarray(
                    ring_transform(l, s, self.dimension, self.spec.ring_normalization)
                )
            out[..., row, col] += gain * cache[l]
        return out

    def unbounded_diagonal(self) -> np.ndarray:
        """Per-component flag: transport grows without bound in s (diffusion)."""
        return np.array([t.kind == "diffusion" and t.d > 0 for t in self.spec.transport])

    def diffusivities(self) -> np.ndarray:
        return self.spec.diffusivities()

    def evaluate(self, s) -> np.ndarray:
        scalar = np.ndim(s) == 0
        out = self.transport_part(s) + self.interaction_part(s)
        return out[0] if scalar else out

    __call__ = evaluate


def assemble_symbol(spec: NetworkSpec, dimension: int | None = None) -> SpectralSymbol:
    report = validate(spec)
    if not report.ok:
        raise SpecValidationError(report)
    dim = spec.dimension_default if dimension is None else dimension
    if dim not in (1, 2):
        raise ValueError("dimension must be 1 or 2")
    return SpectralSymbol(spec, dim)
