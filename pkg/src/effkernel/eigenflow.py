"""Eigenvalue branches of a matrix family B(s) over a wavenumber grid."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment

from .errors import AmbiguousAsymptoteError, EigenSolverError, UnsupportedStructureError

COMPLEX_TOL = 1e-7
FIT_RESIDUAL_TOL = 1e-3
SNAP_RTOL = 0.01
CONVERGING_RATIO = 0.9


@dataclass(frozen=True)
class WavenumberGrid:
    s_max: float = 40.0
    n: int = 4096

    def __post_init__(self):
        if self.n < 16:
            raise ValueError("grid needs at least 16 samples")
        if not self.s_max > 0:
            raise ValueError("s_max must be positive")

    @property
    def samples(self) -> np.ndarray:
        return np.linspace(0.0, self.s_max, self.n)

    @property
    def spacing(self) -> float:
        return self.s_max / (self.n - 1)


@dataclass(frozen=True)
class LambdaH:
    """Leading asymptotic term of lambda_max: coefficient * s**degree."""

    degree: int = 0
    coefficient: float = 0.0

    def __post_init__(self):
        if self.degree not in (0, 2):
            raise ValueError("lambda_h degree must be 0 or 2")
        if self.degree == 2 and not self.coefficient < 0:
            raise ValueError("a quadratic lambda_h needs a negative coefficient")
        if self.degree == 0 and self.coefficient != 0:
            raise ValueError("a degree-0 lambda_h has coefficient 0")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        out = self.coefficient * s**2 if self.degree == 2 else np.zeros_like(s)
        return out if out.ndim else float(out)

    def describe(self) -> str:
        return "0" if self.degree == 0 else f"{self.coefficient:.6g} s^2"


@dataclass(frozen=True)
class CollisionData:
    """Single window where the leading pair is complex conjugate.

    ``xi_c`` is the real/complex transition point (the left edge for an
    interior window, 0 when the window covers the whole grid).  ``a`` and
    ``b`` are grid curves: real part and |imaginary part| of the leading
    pair, with b = 0 off the window.
    """

    xi_c: float
    window: tuple[float, float]
    edges: tuple[float, ...]
    complex_mask: np.ndarray
    a: np.ndarray
    b: np.ndarray


@dataclass
class EigenBranches:
    grid: WavenumberGrid
    branches: np.ndarray  # (n, N) complex, tracked columns
    evaluate: Callable | None = None
    candidates: tuple[float, ...] = ()
    collision: CollisionData | None = None
    structure_issue: str | None = None

    @property
    def lambda_max(self) -> np.ndarray:
        return self.branches.real.max(axis=1)

    def leading_pair(self) -> np.ndarray:
        """Per sample, the two eigenvalues of largest real part, (n, 2)."""
        order = np.argsort(-self.branches.real, axis=1, kind="stable")
        top = np.take_along_axis(self.branches, order[:, :2], axis=1)
        return top

    def is_real(self) -> bool:
        scale = np.maximum(1.0, np.abs(self.branches))
        return bool(np.all(np.abs(self.branches.imag) <= COMPLEX_TOL * scale))

    def table(self) -> tuple[list[str], np.ndarray]:
        """Columns for the branch CSV dump."""
        n = self.branches.shape[1]
        header = ["s"] + [f"re_zeta_{j + 1}" for j in range(n)] + [f"im_zeta_{j + 1}" for j in range(n)]
        header.append("lambda_max")
        cols = np.column_stack(
            [self.grid.samples, self.branches.real, self.branches.imag, self.lambda_max]
        )
        return header, cols


def _eigvals(evaluate, s: np.ndarray) -> np.ndarray:
    mats = np.asarray(evaluate(s), dtype=float)
    try:
        return np.linalg.eigvals(mats)
    except np.linalg.LinAlgError:
        for si, m in zip(s, mats):
            try:
                np.linalg.eigvals(m)
            except np.linalg.LinAlgError as exc:
                raise EigenSolverError(float(si), exc) from None
        raise


def _track(raw: np.ndarray) -> np.ndarray:
    n, size = raw.shape
    out = np.empty_like(raw)
    first = raw[0]
    out[0] = first[np.lexsort((-first.imag, -first.real))]
    if size == 1:
        return raw.copy()
    for k in range(1, n):
        pred = out[k - 1] if k == 1 else 2 * out[k - 1] - out[k - 2]
        cost = np.abs(pred[:, None] - raw[k][None, :])
        _, cols = linear_sum_assignment(cost)
        out[k] = raw[k][cols]
    return out


def sample_eigenvalues(evaluate, grid: WavenumberGrid, threads: int = 1, detect: bool = True) -> EigenBranches:
    """Eigenvalues of ``evaluate(s)`` on the grid, tracked by continuity.

    Pairing between neighbouring samples minimizes the total distance to a
    linear extrapolation of each branch.  Parallel evaluation splits the
    grid into contiguous chunks and reassembles them in index order, so the
    result does not depend on ``threads``.
    """
    s = grid.samples
    if threads > 1:
        chunks = np.array_split(np.arange(grid.n), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda idx: _eigvals(evaluate, s[idx]), chunks))
        raw = np.concatenate(parts, axis=0)
    else:
        raw = _eigvals(evaluate, s)
    branches = EigenBranches(grid, _track(raw), evaluate)
    diff = getattr(evaluate, "diffusivities", None)
    if diff is not None:
        branches.candidates = tuple(float(d) for d in np.unique(diff()) if d > 0)
    if detect:
        try:
            branches.collision = detect_collision(branches)
        except UnsupportedStructureError as exc:
            branches.structure_issue = str(exc)
    return branches


def fit_lambda_h(branches: EigenBranches, fit_window: float = 0.25, candidates=None) -> LambdaH:
    """Fit lambda_max ~ alpha s^2 + beta on the top ``fit_window`` of the grid.

    A quadratic fit coefficient within 1% of a diffusivity candidate -d is
    replaced by -d exactly, so the differential operator is the physical one.
    """
    if not 0 < fit_window <= 1:
        raise ValueError("fit_window must lie in (0, 1]")
    s = branches.grid.samples
    lam = branches.lambda_max
    start = int(np.floor((1 - fit_window) * len(s)))
    ss, ll = s[start:], lam[start:]
    design = np.column_stack([ss**2, np.ones_like(ss)])
    (alpha, beta), *_ = np.linalg.lstsq(design, ll, rcond=None)
    resid = ll - design @ np.array([alpha, beta])
    rms = float(np.sqrt(np.mean(resid**2)))
    tol = FIT_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(ll))))
    s_max = branches.grid.s_max
    if abs(alpha) * s_max**2 < 10 * abs(beta) or abs(alpha) * s_max**2 <= tol:
        # bounded tails may oscillate (ring couplings); only a systematic
        # drift across the window makes the constant asymptote doubtful
        trend = abs(alpha) * (ss[-1] ** 2 - ss[0] ** 2)
        a, b, c = (float(np.mean(part)) for part in np.array_split(ll, 3))
        # an algebraic approach to a constant decelerates across the window
        # (ratio ~0.77 for 1/s^2 over its top quarter); growth does not
        converging = abs(c - b) < CONVERGING_RATIO * abs(b - a)
        if trend > max(2 * rms, tol) and not converging:
            raise AmbiguousAsymptoteError(
                f"lambda_max drifts by {trend:.3g} over the fit window without a dominant "
                "s^2 term; transports beyond diffusion are not supported"
            )
        return LambdaH(0, 0.0)
    if rms > tol:
        raise AmbiguousAsymptoteError(
            f"lambda_max is not of the form alpha s^2 + beta near s_max "
            f"(rms residual {rms:.3g}); transports beyond diffusion are not supported"
        )
    if alpha >= 0:
        raise AmbiguousAsymptoteError(f"lambda_max grows like +{alpha:.3g} s^2; the network is ill-posed")
    cands = branches.candidates if candidates is None else tuple(candidates)
    for d in cands:
        if abs(alpha + d) <= SNAP_RTOL * d:
            alpha = -d
            break
    return LambdaH(2, float(alpha))


def _pair_discriminant(evaluate, s: float) -> float:
    """(z1 - z2)^2 of the two leading eigenvalues: > 0 real, < 0 complex."""
    ev = np.linalg.eigvals(np.asarray(evaluate(np.array([s])), dtype=float)[0])
    ev = ev[np.argsort(-ev.real, kind="stable")]
    if abs(ev[0].imag) > COMPLEX_TOL * max(1.0, abs(ev[0])):
        return -4.0 * ev[0].imag**2
    return float(((ev[0] - ev[1]) ** 2).real)


def _locate_edge(branches: EigenBranches, lo: int, hi: int) -> float:
    s = branches.grid.samples
    if branches.evaluate is None:
        return 0.5 * (s[lo] + s[hi])
    f = lambda x: _pair_discriminant(branches.evaluate, x)
    flo, fhi = f(s[lo]), f(s[hi])
    if flo == 0.0:
        return float(s[lo])
    if fhi == 0.0 or np.sign(flo) == np.sign(fhi):
        return float(s[hi] if flo > 0 else s[lo])
    return float(brentq(f, s[lo], s[hi], xtol=1e-14, rtol=4 * np.finfo(float).eps))


def detect_collision(branches: EigenBranches) -> CollisionData | None:
    """Locate the window where the leading pair is a complex conjugate pair."""
    top = branches.leading_pair()
    lead = top[:, 0]
    cplx = np.abs(lead.imag) > COMPLEX_TOL * np.maximum(1.0, np.abs(lead))
    if not cplx.any():
        return None
    edges_idx = np.flatnonzero(np.diff(cplx.astype(np.int8)))
    runs = int(cplx[0]) + int(np.sum(np.diff(cplx.astype(np.int8)) == 1))
    if runs > 1:
        raise UnsupportedStructureError(
            f"the leading pair is complex on {runs} disjoint windows; only one collision is supported"
        )
    s = branches.grid.samples
    edges = tuple(_locate_edge(branches, i, i + 1) for i in edges_idx)
    first = np.flatnonzero(cplx)[0]
    last = np.flatnonzero(cplx)[-1]
    lo = 0.0 if first == 0 else edges[0]
    hi = float(s[-1]) if last == len(s) - 1 else edges[-1]
    xi_c = edges[0] if edges else 0.0
    a = np.where(cplx, lead.real, 0.0)
    b = np.where(cplx, np.abs(lead.imag), 0.0)
    return CollisionData(float(xi_c), (float(lo), float(hi)), edges, cplx, a, b)
