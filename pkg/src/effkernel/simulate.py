"""Periodic pseudo-spectral time stepping of effective equations and of the full network."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm

from .errors import InstabilityError
from .netspec import NetworkSpec
from .reduction import CutoffSpec, EffectiveSystem
from .spectral import assemble_symbol

STEPPERS = ("euler", "exponential")


def _irfftn(a: np.ndarray, shape) -> np.ndarray:
    return np.fft.irfftn(a, s=shape, axes=tuple(range(-len(shape), 0)))


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@dataclass
class Field:
    """Grid state with a leading component axis: values.shape == (ncomp, *shape)."""

    values: np.ndarray
    spacing: float
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim not in (2, 3):
            raise ValueError("values must be (ncomp, n) or (ncomp, n, n)")
        if not all(_is_pow2(n) for n in self.shape):
            raise ValueError(f"grid sizes must be powers of two, got {self.shape}")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def scalar(cls, values, spacing: float, time: float = 0.0) -> "Field":
        return cls(np.asarray(values, dtype=float)[None], spacing, time)

    @property
    def dimension(self) -> int:
        return self.values.ndim - 1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape[1:]

    @property
    def ncomp(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> float:
        return self.shape[0] * self.spacing

    def component(self, i: int = 0) -> np.ndarray:
        return self.values[i]

    def coordinates(self) -> np.ndarray:
        return np.arange(self.shape[0]) * self.spacing


@dataclass(frozen=True)
class Ablation:
    """Zero a disk (or interval in 1D) at the given step; center in box fractions."""

    step: int
    radius: float
    center: tuple[float, ...] = (0.5, 0.5)


@dataclass(frozen=True)
class InitialCondition:
    kind: str = "noise"  # noise | seeded_region
    amplitude: float = 0.01
    region: str = "left"
    width: int = 4
    value: float = 1.0


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.01
    steps: int = 1000
    record_every: int = 0  # 0 records only the initial and final states
    seed: int = 0
    irreversible: bool = False
    initial: InitialCondition = field(default_factory=InitialCondition)
    stepper: str = "euler"
    conv_floor: float = 1e-12
    ablate: Ablation | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps < 0 or self.record_every < 0:
            raise ValueError("steps and record_every must be nonnegative")
        if self.stepper not in STEPPERS:
            raise ValueError(f"unknown stepper {self.stepper!r}")


@dataclass
class Trajectory:
    snapshots: list[Field]
    dt: float
    steps: int
    max_abs: float = 0.0
    bound: float | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.snapshots])

    @property
    def final(self) -> Field:
        return self.snapshots[-1]

    @property
    def bound_ok(self) -> bool:
        return self.bound is None or self.max_abs <= self.bound


# --------------------------------------------------------------------------
# helpers


def cutoff_chi(u, spec: CutoffSpec):
    """Trapezoid saturation: 1 on |u| <= u*/2, linear to 0 at |u| = u*, 0 beyond."""
    a = np.abs(np.asarray(u, dtype=float))
    out = np.clip(2.0 - 2.0 * a / spec.u_star, 0.0, 1.0)
    return out if out.ndim else float(out)


def wavenumber_magnitude(shape: tuple[int, ...], spacing: float) -> np.ndarray:
    """|k| on the rfftn layout of a periodic grid."""
    if len(shape) == 1:
        return 2 * np.pi * np.fft.rfftfreq(shape[0], spacing)
    kx = 2 * np.pi * np.fft.fftfreq(shape[0], spacing)
    ky = 2 * np.pi * np.fft.rfftfreq(shape[1], spacing)
    return np.hypot(kx[:, None], ky[None, :])


def kernel_transform(kernel: np.ndarray, spacing: float) -> np.ndarray:
    """Discrete transform of a torus-sampled kernel, scaled to act as a convolution."""
    # the sampled kernels are even, so their transform is real up to rounding
    return np.fft.rfftn(kernel).real * spacing**kernel.ndim


def periodic_convolve(kernel: np.ndarray, u: np.ndarray, spacing: float) -> np.ndarray:
    """(K * u)(x_i) = sum_j K(x_i - x_j) u(x_j) spacing^dim on the torus, via FFT."""
    kh = np.fft.rfftn(kernel) * spacing**kernel.ndim
    return _irfftn(kh * np.fft.rfftn(u), u.shape)


def direct_convolve(kernel: np.ndarray, u: np.ndarray, spacing: float) -> np.ndarray:
    """Brute-force periodic convolution (reference for small grids)."""
    out = np.zeros_like(u, dtype=float)
    for idx in np.ndindex(*u.shape):
        shifted = np.roll(kernel, shift=idx, axis=tuple(range(u.ndim)))
        out += u[idx] * shifted
    return out * spacing**u.ndim


def stability_bound(system: EffectiveSystem) -> float:
    """Largest explicit Euler step: 0.5 / (||K||_1 + |lambda_h(k_max)|)."""
    k_max = np.pi / system.spacing * np.sqrt(system.dimension)
    return 0.5 / (system.kernel_l1() + abs(system.lambda_h(k_max)))


def noise_field(shape, spacing, amplitude, seed, ncomp=1) -> Field:
    rng = np.random.default_rng(seed)
    return Field(rng.uniform(-amplitude, amplitude, size=(ncomp,) + tuple(shape)), spacing)


def seeded_field(shape, spacing, value=1.0, width=4, region="left", ncomp=1) -> Field:
    if region != "left":
        raise ValueError("only the left-edge seed is supported")
    vals = np.zeros((ncomp,) + tuple(shape))
    vals[0, ..., :width] = value
    return Field(vals, spacing)


def initial_field(ic: InitialCondition, shape, spacing, seed, ncomp=1, u_star=1.0) -> Field:
    if ic.kind == "noise":
        return noise_field(shape, spacing, ic.amplitude * u_star, seed, ncomp)
    if ic.kind == "seeded_region":
        return seeded_field(shape, spacing, ic.value * u_star, ic.width, ic.region, ncomp)
    raise ValueError(f"unknown initial condition {ic.kind!r}")


def ablation_mask(shape, spacing, abl: Ablation) -> np.ndarray:
    coords = [np.arange(n) * spacing for n in shape]
    lengths = [n * spacing for n in shape]
    grids = np.meshgrid(*coords, indexing="ij")
    dist2 = np.zeros(shape)
    for g, c, L in zip(grids, abl.center, lengths):
        d = np.abs(g - c * L)
        d = np.minimum(d, L - d)
        dist2 += d**2
    return dist2 <= abl.radius**2


def dominant_wavenumber(f: Field, component: int = 0) -> tuple[float, float]:
    """Peak of the bin-averaged power spectrum of (u - mean).

    Returns the wavenumber and a confidence ratio (peak over median power of
    the nonzero bins).  Bins are integer multiples of 2 pi / L; in 2D they
    are annuli of |k|.
    """
    u = f.component(component)
    u = u - u.mean()
    if not np.any(u):
        raise ValueError("dominant wavenumber of a constant field is undefined")
    power = np.abs(np.fft.fftn(u)) ** 2
    if f.dimension == 1:
        idx = np.abs(np.fft.fftfreq(f.shape[0], 1.0 / f.shape[0]))
    else:
        if f.shape[0] != f.shape[1]:
            raise ValueError("radial binning needs a square grid")
        m = np.fft.fftfreq(f.shape[0], 1.0 / f.shape[0])
        idx = np.hypot(m[:, None], m[None, :])
    bins = np.rint(idx).astype(int).ravel()
    nb = f.shape[0] // 2 + 1
    keep = bins < nb
    total = np.bincount(bins[keep], power.ravel()[keep], minlength=nb)
    count = np.bincount(bins[keep], minlength=nb)
    mean = np.where(count > 0, total / np.maximum(count, 1), 0.0)[1:]
    peak = int(np.argmax(mean))
    med = float(np.median(mean))
    conf = float(mean[peak] / med) if med > 0 else np.inf
    return (peak + 1) * 2 * np.pi / f.length, conf


# --------------------------------------------------------------------------
# effective equations


class _Operators:
    def __init__(self, system: EffectiveSystem, shape):
        if tuple(shape) != system.shape:
            raise ValueError(f"field grid {tuple(shape)} does not match the kernel grid {system.shape}")
        self.shape = tuple(shape)
        self.kmag = wavenumber_magnitude(self.shape, system.spacing)
        self.lam = np.asarray(system.lambda_h(self.kmag))
        self.has_lam = system.lambda_h.degree != 0
        self.hats = {k: kernel_transform(v, system.spacing) for k, v in system.kernels.items()}
        self.l1 = system.kernel_l1()

    def conv(self, name, uh, scale, floor):
        out = _irfftn(self.hats[name] * uh, self.shape)
        if floor > 0:
            out[np.abs(out) < floor * self.l1 * scale] = 0.0
        return out

    def lin(self, uh):
        if not self.has_lam:
            return 0.0
        return _irfftn(self.lam * uh, self.shape)


def _check(step, values, cutoff: CutoffSpec | None):
    m = float(np.max(np.abs(values)))
    if not np.isfinite(m) or (cutoff is not None and m > 10 * cutoff.u_star):
        raise InstabilityError(step, m)
    return m


def _record_due(step, params: SimParams) -> bool:
    return step == params.steps or (params.record_every > 0 and step % params.record_every == 0)


def _validate_stepper(system: EffectiveSystem, params: SimParams):
    if params.stepper == "exponential":
        if system.cutoff is not None or params.irreversible:
            raise ValueError("the exponential stepper is exact only for the linear equation (no cutoff)")
        return
    bound = stability_bound(system)
    if params.dt > bound:
        raise ValueError(f"dt = {params.dt} exceeds the explicit stability bound {bound:.4g}")


def _apply_ablation(values: np.ndarray, step: int, params: SimParams, spacing: float):
    abl = params.ablate
    if abl is not None and step == abl.step:
        mask = ablation_mask(values.shape[1:], spacing, abl)
        values[:, mask] = 0.0


def simulate_scalar(system: EffectiveSystem, field0: Field, params: SimParams) -> Trajectory:
    """u_t = L u + chi(u) (K * u); irreversible: u_t = L u + chi(u) max(K * u, 0)."""
    if system.kind != "scalar":
        raise ValueError("simulate_scalar needs a scalar effective system")
    _validate_stepper(system, params)
    ops = _Operators(system, field0.shape)
    cut = system.cutoff
    u = field0.values[0].copy()
    t0 = field0.time
    snaps = [Field(u[None].copy(), field0.spacing, t0)]
    max_abs = float(np.max(np.abs(u)))
    if params.stepper == "exponential":
        growth = np.exp(params.dt * (ops.lam + ops.hats["K"]))
        uh = np.fft.rfftn(u)
        for step in range(1, params.steps + 1):
            uh = growth * uh
            if _record_due(step, params):
                u = _irfftn(uh, ops.shape)
                max_abs = max(max_abs, _check(step, u, None))
                snaps.append(Field(u[None].copy(), field0.spacing, t0 + step * params.dt))
        return Trajectory(snaps, params.dt, params.steps, max_abs)

    for step in range(1, params.steps + 1):
        uh = np.fft.rfftn(u)
        scale = float(np.max(np.abs(u)))
        react = ops.conv("K", uh, scale, params.conv_floor)
        if params.irreversible:
            react = np.maximum(react, 0.0)
        if cut is not None:
            react = cutoff_chi(u, cut) * react
        u = u + params.dt * (ops.lin(uh) + react)
        vals = u[None]
        _apply_ablation(vals, step, params, field0.spacing)
        max_abs = max(max_abs, _check(step, u, cut))
        if _record_due(step, params):
            snaps.append(Field(u[None].copy(), field0.spacing, t0 + step * params.dt))
    bound = None
    if cut is not None and not ops.has_lam:
        start = float(np.max(np.abs(field0.values[0])))
        bound = max(start, cut.u_star + params.dt * ops.l1 * cut.u_star)
    return Trajectory(snaps, params.dt, params.steps, max_abs, bound)


def _pair_matrix(ops: _Operators, system: EffectiveSystem) -> np.ndarray:
    h = ops.hats
    m = np.empty(ops.kmag.shape + (2, 2))
    m[..., 0, 0] = ops.lam + h["K"]
    m[..., 0, 1] = system.l_identity + h.get("L", 0.0)
    m[..., 1, 0] = h["M"]
    m[..., 1, 1] = ops.lam + h["N"]
    return m


def simulate_pair(system: EffectiveSystem, x0: Field, y0: Field, params: SimParams) -> Trajectory:
    """Two-field effective system; snapshots carry X and Y as components 0 and 1.

    Reversible form: X_t = L X + chi(X)(K*X + L_Y),  Y_t = L Y + chi(Y)(M*X + N*Y),
    with L_Y = l_identity Y + L_ker * Y.  Irreversible form applies max(., 0)
    to the X reaction only.
    """
    if system.kind != "pair":
        raise ValueError("simulate_pair needs a pair effective system")
    if x0.shape != y0.shape or x0.spacing != y0.spacing:
        raise ValueError("X and Y must share a grid")
    _validate_stepper(system, params)
    ops = _Operators(system, x0.shape)
    cut = system.cutoff
    x = x0.values[0].copy()
    y = y0.values[0].copy()
    t0 = x0.time
    snaps = [Field(np.stack([x, y]), x0.spacing, t0)]
    max_abs = float(max(np.max(np.abs(x)), np.max(np.abs(y))))
    if params.stepper == "exponential":
        prop = expm(params.dt * _pair_matrix(ops, system))
        xh, yh = np.fft.rfftn(x), np.fft.rfftn(y)
        for step in range(1, params.steps + 1):
            xh, yh = prop[..., 0, 0] * xh + prop[..., 0, 1] * yh, prop[..., 1, 0] * xh + prop[..., 1, 1] * yh
            if _record_due(step, params):
                vals = np.stack([_irfftn(xh, ops.shape), _irfftn(yh, ops.shape)])
                max_abs = max(max_abs, _check(step, vals, None))
                snaps.append(Field(vals, x0.spacing, t0 + step * params.dt))
        return Trajectory(snaps, params.dt, params.steps, max_abs)

    for step in range(1, params.steps + 1):
        xh, yh = np.fft.rfftn(x), np.fft.rfftn(y)
        scale = float(max(np.max(np.abs(x)), np.max(np.abs(y))))
        rx = ops.conv("K", xh, scale, params.conv_floor) + system.l_identity * y
        if "L" in ops.hats:
            rx = rx + ops.conv("L", yh, scale, params.conv_floor)
        ry = ops.conv("M", xh, scale, params.conv_floor) + ops.conv("N", yh, scale, params.conv_floor)
        if params.irreversible:
            rx = np.maximum(rx, 0.0)
        if cut is not None:
            rx = cutoff_chi(x, cut) * rx
            ry = cutoff_chi(y, cut) * ry
        x = x + params.dt * (ops.lin(xh) + rx)
        y = y + params.dt * (ops.lin(yh) + ry)
        vals = np.stack([x, y])
        _apply_ablation(vals, step, params, x0.spacing)
        x, y = vals[0], vals[1]
        max_abs = max(max_abs, _check(step, vals, cut))
        if _record_due(step, params):
            snaps.append(Field(vals.copy(), x0.spacing, t0 + step * params.dt))
    return Trajectory(snaps, params.dt, params.steps, max_abs)


# --------------------------------------------------------------------------
# full network oracle


def mode_propagators(spec: NetworkSpec, shape, spacing: float, dt: float, dimension: int | None = None):
    """exp(dt B(|k|)) for every distinct |k| of the grid, plus the gather index."""
    dim = len(shape) if dimension is None else dimension
    sym = assemble_symbol(spec, dim)
    kmag = wavenumber_magnitude(tuple(shape), spacing)
    uniq, inv = np.unique(np.round(kmag, 12), return_inverse=True)
    props = expm(dt * sym(uniq))
    return props, inv.reshape(kmag.shape)


def simulate_full_network(spec: NetworkSpec, u0: Field, params: SimParams) -> Trajectory:
    """Exact-in-space linear stepping of U_t = J U + A U, mode by mode."""
    if u0.ncomp != spec.size:
        raise ValueError(f"initial field has {u0.ncomp} components, network has {spec.size}")
    props, inv = mode_propagators(spec, u0.shape, u0.spacing, params.dt, u0.dimension)
    axes = tuple(range(1, u0.dimension + 1))
    uh = np.fft.rfftn(u0.values, axes=axes)
    flat = uh.reshape(spec.size, -1)
    gather = props[inv.ravel()]  # (modes, N, N)
    snaps = [Field(u0.values.copy(), u0.spacing, u0.time)]
    max_abs = float(np.max(np.abs(u0.values)))
    for step in range(1, params.steps + 1):
        flat = np.einsum("mij,jm->im", gather, flat)
        if _record_due(step, params):
            vals = np.fft.irfftn(flat.reshape(uh.shape), s=u0.shape, axes=axes)
            max_abs = max(max_abs, _check(step, vals, None))
            snaps.append(Field(vals, u0.spacing, u0.time + step * params.dt))
    return Trajectory(snaps, params.dt, params.steps, max_abs)


def mode_amplitude(f: Field, k_index: int, component: int = 0) -> complex:
    """Complex Fourier coefficient of a 1D field at integer wavenumber index."""
    return complex(np.fft.rfft(f.component(component))[k_index])


def with_cutoff(system: EffectiveSystem, cutoff: CutoffSpec | None) -> EffectiveSystem:
    return replace(system, cutoff=cutoff)
