"""Principal Lambert W and the maps from eigenvalues zeta to growth rates mu.

The exact reduction solves mu * e^{delta mu} = zeta * e^{delta zeta} on the
principal branch, i.e. mu = W0(delta zeta e^{delta zeta}) / delta.  The rough
map M*(zeta) = zeta e^{delta zeta} replaces it in the first practical scheme;
the second uses mu = zeta directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INV_E = float(np.exp(-1.0))
_MAX_ITER = 50


@dataclass(frozen=True)
class DelayParams:
    delta: float = 0.1
    epsilon: float = 0.05

    def __post_init__(self):
        if not (self.delta > 0 and self.epsilon > 0):
            raise ValueError("delta and epsilon must be positive")


def _seed(z: np.ndarray) -> np.ndarray:
    w = np.empty_like(z)
    near = z < -0.25
    # series about the branch point -1/e in p = sqrt(2(ez + 1))
    p = np.sqrt(np.maximum(2.0 * (np.e * z[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p**2 / 3.0 + 11.0 / 72.0 * p**3
    mid = ~near & (z <= 3.0)
    lz = np.log1p(z[mid])
    w[mid] = lz * (1.0 - np.log1p(lz) / (2.0 + lz))
    big = z > 3.0
    l1 = np.log(z[big])
    l2 = np.log(l1)
    w[big] = l1 - l2 + l2 / l1
    return w


def w0(z):
    """Principal branch W0 of the Lambert W function for real z >= -1/e."""
    z = np.asarray(z, dtype=float)
    if np.any(np.isnan(z)) or np.any(z < -INV_E * (1 + 4 * np.finfo(float).eps)):
        raise ValueError("w0 is defined for real z >= -1/e")
    flat = z.ravel().copy()
    w = _seed(flat)
    at_branch = np.e * flat + 1.0 <= 0.0
    w[at_branch] = -1.0
    active = ~at_branch & (flat != 0.0)
    w[flat == 0.0] = 0.0
    for _ in range(_MAX_ITER):
        if not active.any():
            break
        wa, za = w[active], flat[active]
        ew = np.exp(wa)
        f = wa * ew - za
        wp1 = wa + 1.0
        denom = ew * wp1 - (wa + 2.0) * f / (2.0 * wp1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(denom != 0.0, f / denom, 0.0)
        new = np.maximum(wa - step, -1.0)
        w[active] = new
        done = (np.abs(new - wa) <= 1e-15 * (1.0 + np.abs(new))) | (step == 0.0)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    out = w.reshape(z.shape)
    return out if out.ndim else float(out)


def m_max(zeta, delta: float):
    """Exact growth rate (1/delta) W0(delta zeta e^{delta zeta}) for real zeta.

    For delta*zeta >= -1 the principal branch inverts x e^x exactly, so the
    input is returned unchanged; evaluating through W0 there would lose
    accuracy to the conditioning of W0 near its branch point.
    """
    zeta = np.asarray(zeta)
    if np.iscomplexobj(zeta):
        raise ValueError("m_max takes real eigenvalues only")
    zeta = zeta.astype(float)
    x = delta * zeta
    out = zeta.copy()
    low = x < -1.0
    if low.any():
        xl = x[low]
        out[low] = np.asarray(w0(xl * np.exp(xl))) / delta
    return out if out.ndim else float(out)


def m_star(zeta, delta: float):
    """First-order substitute zeta * e^{delta zeta}; accepts complex input."""
    zeta = np.asarray(zeta)
    out = zeta * np.exp(delta * zeta)
    return out if out.ndim else out.item()
