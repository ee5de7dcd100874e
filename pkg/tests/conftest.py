from __future__ import annotations

import functools
import warnings

import pytest

from effkernel.eigenflow import WavenumberGrid, fit_lambda_h, sample_eigenvalues
from effkernel.lambert import DelayParams
from effkernel.netspec import builtin_presets
from effkernel.reduction import RegularizationMode, reduce
from effkernel.spectral import assemble_symbol


@functools.lru_cache(maxsize=None)
def reduced(preset: str, dim: int, method: str = "way2", variant: str = "uniform", eps: float = 0.05,
            delta: float = 0.1):
    """Cached (branches, spectrum) for a preset on the default wavenumber grid."""
    symbol = assemble_symbol(builtin_presets(preset), dim)
    grid = WavenumberGrid()
    branches = sample_eigenvalues(symbol, grid)
    lam = fit_lambda_h(branches)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        spectrum = reduce(symbol, lam, RegularizationMode(variant, eps), grid, DelayParams(delta, eps), method)
    return branches, spectrum


@pytest.fixture
def reduce_preset():
    return reduced
