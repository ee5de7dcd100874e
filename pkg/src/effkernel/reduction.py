"""Regularization, reduced spectra and their real-space effective kernels."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import j0

from .eigenflow import (
    COMPLEX_TOL,
    CollisionData,
    EigenBranches,
    LambdaH,
    WavenumberGrid,
    sample_eigenvalues,
)
from .errors import ComplexBranchesError, DecayWarning, RegularizationError, UnsupportedStructureError
from .lambert import DelayParams, m_max, m_star
from .spectral import SpectralSymbol, theta_quadrature_j0

DECAY_RATIO = 1e-4
METHODS = ("exact", "way1", "way2")
VARIANTS = ("split", "uniform", "mollifier")
RADIAL_AGREEMENT = 1e-8


@dataclass(frozen=True)
class Mollifier:
    """Triangle bump J(x) = max(1 - |x|, 0), the self-convolution of a box.

    Its transform sinc^2(xi/2) is nonnegative, mass 1, and the second-moment
    constant gamma_1 = (1/2) int x^2 J = 1/12.
    """

    epsilon: float = 0.05
    mass: float = 1.0
    second_moment: float = 1.0 / 12.0
    transform_nonneg: bool = True

    def transform(self, s):
        # np.sinc(x) = sin(pi x)/(pi x); J_eps has transform J_hat(eps s)
        x = self.epsilon * np.asarray(s, dtype=float) / 2
        return np.sinc(x / np.pi) ** 2

    def profile(self, x):
        x = np.asarray(x, dtype=float) / self.epsilon
        return np.maximum(1.0 - np.abs(x), 0.0) / self.epsilon


@dataclass(frozen=True)
class RegularizationMode:
    variant: str = "uniform"
    epsilon: float = 0.05
    mollifier: Mollifier | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown regularization {self.variant!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def damping(self, s):
        s = np.asarray(s, dtype=float)
        if self.variant == "mollifier":
            moll = self.mollifier or Mollifier(self.epsilon)
            return moll.transform(s)
        return np.exp(-self.epsilon * s**2)


@dataclass(frozen=True)
class CutoffSpec:
    u_star: float = 1.0

    def __post_init__(self):
        if not self.u_star > 0:
            raise ValueError("u_star must be positive")


@dataclass(frozen=True)
class RegularizedSymbol:
    """B_eps(s) built from B_h(s) = B(s) - lambda_h(s) I."""

    symbol: SpectralSymbol
    lambda_h: LambdaH
    mode: RegularizationMode

    @property
    def dimension(self) -> int:
        return self.symbol.dimension

    @property
    def size(self) -> int:
        return self.symbol.size

    def diffusivities(self):
        return self.symbol.diffusivities()

    def shifted(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.symbol(s) - np.asarray(self.lambda_h(s))[..., None, None] * np.eye(self.size)

    def unbounded_part(self, s) -> np.ndarray:
        """Diagonal part growing like s^2: diffusion minus lambda_h."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        grow = self.symbol.unbounded_diagonal()
        diag = self.symbol.transport_part(s)
        diag[..., ~grow, ~grow] = 0.0
        lam = np.asarray(self.lambda_h(s))[..., None, None]
        return diag - lam * np.eye(self.size)

    def bounded_part(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.symbol(s) - self.unbounded_part(s) - np.asarray(self.lambda_h(s))[..., None, None] * np.eye(self.size)

    def evaluate(self, s) -> np.ndarray:
        scalar = np.ndim(s) == 0
        s = np.atleast_1d(np.asarray(s, dtype=float))
        damp = np.asarray(self.mode.damping(s))[..., None, None]
        if self.mode.variant == "split":
            out = self.unbounded_part(s) + damp * self.bounded_part(s)
        else:
            out = damp * self.shifted(s)
        return out[0] if scalar else out

    __call__ = evaluate


def regularize(symbol: SpectralSymbol, lambda_h: LambdaH, mode: RegularizationMode) -> RegularizedSymbol:
    """Damp the shifted symbol so the reduced spectrum decays in s.

    Split mode keeps the s^2-growing diagonal undamped; it is rejected when a
    component without diffusion would be left growing like +|lambda_h| s^2.
    """
    reg = RegularizedSymbol(symbol, lambda_h, mode)
    if mode.variant == "split" and lambda_h.degree == 2:
        grow = symbol.unbounded_diagonal()
        d = symbol.diffusivities()
        rate = -d * grow - lambda_h.coefficient
        if np.any(rate > 1e-12):
            bad = [symbol.spec.components[i] for i in np.flatnonzero(rate > 1e-12)]
            raise RegularizationError(
                "split regularization leaves an unbounded growing diagonal for "
                f"component(s) {', '.join(bad)}; use the uniform or mollifier mode"
            )
    return reg


@dataclass
class ReducedSpectrum:
    grid: WavenumberGrid
    lambda_h: LambdaH
    kind: str  # "scalar" or "pair"
    method: str
    dimension: int
    values: dict[str, np.ndarray]
    params: DelayParams
    mode: RegularizationMode | None = None
    collision: CollisionData | None = None
    branches: EigenBranches | None = None
    decay_ratio: float = 0.0
    regularized: RegularizedSymbol | None = None

    @property
    def s(self) -> np.ndarray:
        return self.grid.samples

    @property
    def scalar(self) -> np.ndarray:
        return self.values["mu"]

    def curve_names(self) -> list[str]:
        return ["mu"] if self.kind == "scalar" else ["nu1", "nu2", "p", "q"]

    def evaluate(self, s) -> dict[str, np.ndarray]:
        """Reduced curves at arbitrary wavenumbers, zero beyond s_max.

        Recomputed from the regularized symbol when available (exact at every
        point), otherwise interpolated from the samples by cubic splines.
        """
        s = np.abs(np.asarray(s, dtype=float))
        inside = s <= self.grid.s_max
        out = {}
        if self.regularized is not None:
            vals = _reduced_values(self.regularized(s[inside]), self.kind, self.method, self.params.delta)
        else:
            from scipy.interpolate import CubicSpline

            vals = {k: CubicSpline(self.s, self.values[k])(s[inside]) for k in self.curve_names()}
        for k in self.curve_names():
            full = np.zeros(s.shape)
            if k == "p":
                full[~inside] = 1.0
            full[inside] = vals[k]
            out[k] = full
        return out

    def dispersion(self, s=None) -> np.ndarray:
        """Growth rate of the effective linear dynamics per wavenumber."""
        s = self.s if s is None else np.asarray(s, dtype=float)
        v = self.values if s is self.s else self.evaluate(s)
        lam = np.asarray(self.lambda_h(s))
        if self.kind == "scalar":
            return lam + v["mu"]
        tr = v["nu1"] + v["nu2"]
        det = v["nu1"] * v["nu2"] - v["p"] * v["q"]
        disc = tr**2 / 4 - det
        return lam + tr / 2 + np.sqrt(np.maximum(disc, 0.0))

    def table(self) -> tuple[list[str], np.ndarray]:
        names = self.curve_names()
        return ["s"] + names, np.column_stack([self.s] + [self.values[k] for k in names])


def _decay_ratio(curves) -> float:
    worst = 0.0
    for c in curves:
        peak = np.max(np.abs(c))
        if peak > 0:
            worst = max(worst, abs(c[-1]) / peak)
    return float(worst)


def _check_decay(ratio: float, what: str):
    if ratio >= DECAY_RATIO:
        warnings.warn(
            DecayWarning(
                f"{what} has not decayed at s_max (edge/peak = {ratio:.2e}); increase s_max or epsilon",
                ratio,
            ),
            stacklevel=3,
        )


def p_star_real(z1, z2, delta: float):
    """Divided difference of M* on a real pair, e^{dz}(1 + dz) when they coincide."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    gap = z2 - z1
    mid = 0.5 * (z1 + z2)
    close = np.abs(gap) <= 1e-7 * np.maximum(1.0, np.abs(mid))
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = (np.asarray(m_star(z2, delta)) - np.asarray(m_star(z1, delta))) / gap
    tangent = np.exp(delta * mid) * (1 + delta * mid)
    return np.where(close, tangent, dd)


def p_star_complex(a, b, delta: float):
    """e^{delta a}(cos(delta b) + a sin(delta b)/b), continuous as b -> 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    # sin(db)/b = delta * sinc(db)
    return np.exp(delta * a) * (np.cos(delta * b) + a * delta * np.sinc(delta * b / np.pi))


def p_star_collision(a_c: float, delta: float) -> float:
    return float(np.exp(delta * a_c) * (1 + delta * a_c))


def _leading(mats: np.ndarray):
    ev = np.linalg.eigvals(mats)
    order = np.argsort(-ev.real, axis=-1, kind="stable")
    return np.take_along_axis(ev, order, axis=-1)


def _reduced_values(mats: np.ndarray, kind: str, method: str, delta: float) -> dict[str, np.ndarray]:
    """Pointwise reduced curves from regularized matrices, shape (m, N, N)."""
    ev = _leading(mats)
    if kind == "scalar":
        if method == "exact":
            return {"mu": np.max(m_max(ev.real, delta), axis=-1)}
        if method == "way1":
            return {"mu": np.max(np.asarray(m_star(ev.real, delta)), axis=-1)}
        return {"mu": ev.real[..., 0]}
    lead = ev[..., 0]
    cplx = np.abs(lead.imag) > COMPLEX_TOL * np.maximum(1.0, np.abs(lead))
    a = np.where(cplx, lead.real, 0.0)
    b = np.where(cplx, np.abs(lead.imag), 0.0)
    if ev.shape[-1] < 2:
        raise UnsupportedStructureError("pair reduction needs at least two components")
    z1 = np.where(cplx, a, ev[..., 0].real)
    z2 = np.where(cplx, a, ev[..., 1].real)
    if method == "way2":
        return {"nu1": z1, "nu2": z2, "p": np.ones_like(z1), "q": np.where(cplx, -(b**2), 0.0)}
    ez = np.exp(delta * a)
    a_star = ez * (a * np.cos(delta * b) - b * np.sin(delta * b))
    b_star = ez * (b * np.cos(delta * b) + a * np.sin(delta * b))
    return {
        "nu1": np.where(cplx, a_star, np.asarray(m_star(z1, delta))),
        "nu2": np.where(cplx, a_star, np.asarray(m_star(z2, delta))),
        "p": np.where(cplx, p_star_complex(a, b, delta), p_star_real(z1, z2, delta)),
        "q": np.where(cplx, -b_star * b, 0.0),
    }


def reduce_real(
    reg: RegularizedSymbol,
    grid: WavenumberGrid,
    params: DelayParams,
    method: str = "way2",
    threads: int = 1,
) -> ReducedSpectrum:
    """Scalar reduction mu_max(s) = max_j M(zeta_j(s)) of the regularized symbol.

    exact: M = m_max per branch; way1: M = m_star; way2: max_j Re zeta_j.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    br = sample_eigenvalues(reg, grid, threads=threads)
    if method in ("exact", "way1") and not br.is_real():
        raise ComplexBranchesError(
            "the regularized symbol has complex eigenvalues; use reduce_complex (way1 or way2)"
        )
    z = br.branches
    if method == "exact":
        mu = np.max(m_max(z.real, params.delta), axis=1)
    elif method == "way1":
        mu = np.max(np.asarray(m_star(z.real, params.delta)), axis=1)
    else:
        mu = z.real.max(axis=1)
    ratio = _decay_ratio([mu])
    _check_decay(ratio, "mu_max")
    return ReducedSpectrum(
        grid, reg.lambda_h, "scalar", method, reg.dimension, {"mu": mu}, params, reg.mode,
        br.collision, br, ratio, reg,
    )


def reduce_complex(
    reg: RegularizedSymbol,
    grid: WavenumberGrid,
    params: DelayParams,
    method: str = "way2",
    threads: int = 1,
) -> ReducedSpectrum:
    """Pair reduction (nu1, nu2, p, q) for a single complex window of the leading pair.

    Off the window nu1 >= nu2 are the two largest real parts and q = 0; on
    it both nu equal the common real part a and q carries the imaginary
    part b.  way2 uses the eigenvalues themselves, way1 their images under
    M*(z) = z e^{delta z}.
    """
    if method not in ("way1", "way2"):
        raise ValueError("pair reduction supports way1 and way2 only")
    br = sample_eigenvalues(reg, grid, threads=threads)
    if br.structure_issue:
        raise UnsupportedStructureError(br.structure_issue)
    col = br.collision
    if col is None:
        raise UnsupportedStructureError("no complex window in the leading pair; use reduce_real")
    top = br.leading_pair()
    # off the window the runner-up may pair with a third, lower branch; only
    # its real part enters, and the number of such samples is reported
    stray = ~col.complex_mask & (np.abs(top[:, 1].imag) > COMPLEX_TOL * np.maximum(1.0, np.abs(top[:, 1])))
    if stray.any():
        warnings.warn(
            f"{int(stray.sum())} samples have a complex pair below the leading eigenvalue; "
            "their real part is used for nu2",
            RuntimeWarning,
            stacklevel=2,
        )
    values = _reduced_values(reg(grid.samples), "pair", method, params.delta)
    curves = [values["nu1"], values["nu2"], values["q"]] + ([values["p"] - 1.0] if method == "way1" else [])
    ratio = _decay_ratio(curves)
    _check_decay(ratio, "pair spectrum")
    return ReducedSpectrum(
        grid, reg.lambda_h, "pair", method, reg.dimension, values, params, reg.mode, col, br, ratio, reg
    )


def reduce(symbol: SpectralSymbol, lambda_h: LambdaH, mode: RegularizationMode, grid: WavenumberGrid,
           params: DelayParams, method: str = "way2", threads: int = 1) -> ReducedSpectrum:
    """Scalar reduction when possible, pair reduction when the leading pair goes complex."""
    reg = regularize(symbol, lambda_h, mode)
    if method == "exact":
        return reduce_real(reg, grid, params, method, threads)
    br = sample_eigenvalues(reg, grid, threads=threads)
    if br.collision is None and br.structure_issue is None:
        return reduce_real(reg, grid, params, method, threads)
    return reduce_complex(reg, grid, params, method, threads)


# --------------------------------------------------------------------------
# inverse transforms


def _trapz_weights(s: np.ndarray) -> np.ndarray:
    h = np.diff(s)
    w = np.zeros_like(s)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def _apply(basis, points: np.ndarray, s: np.ndarray, weighted: np.ndarray, budget: int) -> np.ndarray:
    """sum_k basis(points_i * s_k) weighted[c, k] for every curve c, chunked."""
    out = np.empty((weighted.shape[0], points.size))
    step = max(1, budget // len(s))
    for i in range(0, points.size, step):
        out[:, i : i + step] = weighted @ basis(np.outer(s, points[i : i + step]))
    return out


def invert_kernel_1d(s, values, x) -> np.ndarray:
    """K(x) = (1/pi) int_0^{s_max} mu(s) cos(s x) ds by the trapezoid rule.

    ``values`` may stack several curves along its first axis.
    """
    s = np.asarray(s, dtype=float)
    vals = np.asarray(values, dtype=float)
    x = np.asarray(x, dtype=float)
    wv = np.atleast_2d(vals) * _trapz_weights(s)
    out = _apply(np.cos, x.ravel(), s, wv, 4_000_000) / np.pi
    return out.reshape(vals.shape[:-1] + x.shape)


def invert_kernel_radial(s, values, r, check: bool = False):
    """K(r) = (1/2pi) int_0^{R_max} R mu(R) J0(r R) dR.

    Trapezoid in R plus the Euler-Maclaurin end correction h^2 mu(0)/12 for
    the R = 0 endpoint (the integrand is odd in R).  With ``check`` the same
    quadrature is repeated with J0 from the theta integral and the largest
    difference between the two routes is returned as well.
    """
    s = np.asarray(s, dtype=float)
    vals = np.asarray(values, dtype=float)
    mu = np.atleast_2d(vals)
    h = s[1] - s[0]
    wv = mu * (_trapz_weights(s) * s)
    corr = (h**2 / 12.0 * mu[:, 0])[:, None]
    r = np.asarray(r, dtype=float)
    shape = vals.shape[:-1] + r.shape

    def route(bessel):
        out = _apply(bessel, r.ravel(), s, wv, 2_000_000)
        return ((out + corr) / (2 * np.pi)).reshape(shape)

    main = route(j0)
    if not check:
        return main
    alt = route(lambda z: np.asarray(theta_quadrature_j0(z)))
    return main, float(np.max(np.abs(main - alt), initial=0.0))


# --------------------------------------------------------------------------
# effective system on a periodic simulation grid


def torus_offsets(n: int, spacing: float) -> np.ndarray:
    """Signed minimal-image coordinate of each node index on a ring of n nodes."""
    idx = np.arange(n)
    return np.where(idx < n - idx, idx, idx - n) * spacing


def torus_distance(n: int, spacing: float, dimension: int) -> np.ndarray:
    """Minimal-image distance from the origin for every node of an n^dim torus."""
    signed = torus_offsets(n, spacing)
    if dimension == 1:
        return np.abs(signed)
    return np.hypot(signed[:, None], signed[None, :])


def torus_kernels(spectrum: ReducedSpectrum, curves: dict[str, str | None], n: int, spacing: float):
    """Kernels on the n^dim torus, periodized exactly.

    Summing every periodic image of F^{-1}(f) equals the Fourier series whose
    coefficients are f at the torus wavenumbers, so each kernel is the
    inverse FFT of the reduced curve evaluated on the grid's |k| (divided by
    the cell volume so that convolution is a lattice sum times spacing^dim).
    ``curves`` maps kernel names to curve names; "L" uses p - 1.
    """
    dim = spectrum.dimension
    shape = (n,) * dim
    axes = [2 * np.pi * np.fft.fftfreq(n, spacing)] * dim
    kmag = np.abs(axes[0]) if dim == 1 else np.hypot(axes[0][:, None], axes[1][None, :])
    uniq, inv = np.unique(kmag, return_inverse=True)
    vals = spectrum.evaluate(uniq)
    cell = spacing**dim
    out = {}
    for name, curve in curves.items():
        coeff = vals[curve] - (1.0 if name == "L" else 0.0)
        out[name] = np.fft.ifftn(coeff[inv].reshape(shape)).real / cell
    return out


def kernel_profiles(spectrum: ReducedSpectrum, curves: dict[str, str], n: int, spacing: float):
    """(x, K) in 1D or (r, K) in 2D from the trapezoid inversions of the sampled curves."""
    s = spectrum.s
    stack = np.array([spectrum.values[c] - (1.0 if k == "L" else 0.0) for k, c in curves.items()])
    if spectrum.dimension == 1:
        x = np.sort(torus_offsets(n, spacing))
        prof = invert_kernel_1d(s, stack, x)
    else:
        x = np.arange(n // 2 + 1) * spacing
        prof = invert_kernel_radial(s, stack, x)
    return {k: (x, prof[i]) for i, k in enumerate(curves)}


@dataclass
class EffectiveSystem:
    """Effective equation on an n^dim periodic grid.

    Scalar kind: u_t = L u + K * u.  Pair kind:
    X_t = L X + K * X + l_identity Y + L_ker * Y,  Y_t = L Y + M * X + N * Y.
    Kernels are sampled point values; a convolution is the lattice sum
    times spacing**dimension.
    """

    kind: str
    dimension: int
    lambda_h: LambdaH
    n: int
    spacing: float
    kernels: dict[str, np.ndarray]
    profiles: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    l_identity: float = 0.0
    cutoff: CutoffSpec | None = field(default_factory=CutoffSpec)
    method: str = "way2"

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dimension

    def kernel_l1(self) -> float:
        """Largest row sum of kernel L1 norms (identity coupling included)."""
        cell = self.spacing**self.dimension
        norm = {k: float(np.sum(np.abs(v)) * cell) for k, v in self.kernels.items()}
        if self.kind == "scalar":
            return norm["K"]
        row_x = norm["K"] + norm.get("L", 0.0) + abs(self.l_identity)
        row_y = norm["M"] + norm["N"]
        return max(row_x, row_y)


def build_effective_system(
    spectrum: ReducedSpectrum,
    n: int,
    spacing: float,
    cutoff: CutoffSpec | None = CutoffSpec(),
    profiles: bool = True,
) -> EffectiveSystem:
    """Effective equation on an n^dim torus with the given spacing.

    Scalar spectra give K = F^{-1}(mu_max).  Pair spectra give K, M, N from
    nu1, q, nu2; the X-equation's coupling to Y is the identity under way2
    and the identity plus F^{-1}(p* - 1) under way1.
    """
    if spectrum.kind == "scalar":
        curves = {"K": "mu"}
        l_identity = 0.0
    else:
        curves = {"K": "nu1", "M": "q", "N": "nu2"}
        l_identity = 1.0
        if spectrum.method == "way1":
            curves["L"] = "p"
    kernels = torus_kernels(spectrum, curves, n, spacing)
    profs = kernel_profiles(spectrum, curves, n, spacing) if profiles else {}
    return EffectiveSystem(
        spectrum.kind, spectrum.dimension, spectrum.lambda_h, n, spacing, kernels, profs, l_identity,
        cutoff, spectrum.method,
    )
