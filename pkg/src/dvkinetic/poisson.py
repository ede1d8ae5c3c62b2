"""Zero-mean periodic Poisson solves by exact-symbol Fourier inversion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CompatibilityError
from .fields import Field, Grid, integrate

NORM_CONVENTION = "||phi||_H2^2 = ||phi||^2 + ||grad phi||^2 + ||D^2 phi||^2 (all second derivatives)"


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    phi: Field
    grad_phi: tuple[Field, ...]
    residual_norm: float


@dataclass(frozen=True)
class EllipticConstant:
    value: float
    norm_convention: str = NORM_CONVENTION


def _wavenumbers(grid: Grid):
    """Angular wavenumbers ``2*pi*xi`` broadcast for an rfftn of the grid."""
    n = grid.n
    full = 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n)
    half = 2 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    if grid.dim == 1:
        return (half,)
    return (full[:, None, None], full[None, :, None], half[None, None, :])


def _nyquist_free(k, n):
    # The Nyquist mode has no real first derivative; drop it from gradients.
    out = k.copy()
    out[np.isclose(np.abs(out), np.pi * n)] = 0.0
    return out


def solve_zero_mean(f: np.ndarray, grid: Grid) -> PoissonSolution:
    """Solve ``-Laplace(phi) = f`` with the mean of ``f`` projected out."""
    f = np.asarray(f, dtype=np.float64)
    ks = _wavenumbers(grid)
    symbol = sum(k**2 for k in ks)
    f_hat = np.fft.rfftn(f)
    phi_hat = np.zeros_like(f_hat)
    nonzero = symbol > 0
    phi_hat[nonzero] = f_hat[nonzero] / symbol[nonzero]
    shape = grid.shape

    def inverse(hat):
        return np.fft.irfftn(hat, s=shape, axes=range(grid.dim))

    phi = inverse(phi_hat)
    grads = tuple(Field(grid, inverse(1j * _nyquist_free(k, grid.n) * phi_hat)) for k in ks)
    minus_lap = inverse(symbol * phi_hat)
    residual = float(np.max(np.abs(minus_lap - f))) if f.size else 0.0
    return PoissonSolution(Field(grid, phi), grads, residual)


def solve(rho: Field, m_inf: float, rtol: float = 1e-10) -> PoissonSolution:
    """Solve ``-Laplace(phi) = rho - ncomp*m_inf`` (ncomp = 2 in 1D, 6 in 3D)."""
    ncomp = 2 if rho.grid.dim == 1 else 6
    mass = integrate(rho)
    target = ncomp * m_inf
    defect = mass - target
    if abs(defect) > rtol * max(abs(target), abs(mass), 1e-300):
        raise CompatibilityError(
            f"Poisson datum has nonzero mean: integral(rho) - {ncomp}*m_inf = {defect:.3e}"
        )
    return solve_zero_mean(rho.values - target, rho.grid)


def elliptic_constant(dim: int) -> EllipticConstant:
    """Sharp constant in ``||phi||_H2 <= C_R ||rho - ncomp*m_inf||_L2`` on the unit torus.

    Per Fourier mode the ratio is ``(1 + s + s**2) / s**2`` with ``s = |2 pi xi|**2``,
    largest at the lowest nonzero mode ``s = (2 pi)**2`` in any dimension.
    """
    if dim not in (1, 3):
        raise ValueError(f"dim must be 1 or 3, got {dim}")
    s = (2 * math.pi) ** 2
    return EllipticConstant(math.sqrt(1.0 + 1.0 / s + 1.0 / s**2))


def spectral_norms(phi: np.ndarray, grid: Grid) -> tuple[float, float, float]:
    """``(||phi||, ||grad phi||, ||D^2 phi||)`` in L2 via Parseval."""
    ks = _wavenumbers(grid)
    s = sum(k**2 for k in ks)
    p_hat = np.fft.rfftn(np.asarray(phi, dtype=np.float64))
    # rfft stores each conjugate pair once, except the self-conjugate planes.
    weight = np.full(p_hat.shape, 2.0)
    n = grid.n
    weight[..., 0] = 1.0
    if n % 2 == 0:
        weight[..., -1] = 1.0
    norm = grid.cell_volume / n**grid.dim
    power = weight * np.abs(p_hat) ** 2 * norm
    return (
        math.sqrt(power.sum()),
        math.sqrt((power * s).sum()),
        math.sqrt((power * s**2).sum()),
    )
