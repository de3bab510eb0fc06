"""Water optical properties and the two-term Henyey-Greenstein phase function.

The scattering angle distribution of seawater is modeled as a convex mix of
a forward and a backward Henyey-Greenstein lobe.  The three lobe parameters
(forward weight ``a``, forward asymmetry ``g_F``, backward asymmetry ``g_B``)
are tied to each other and to the mean scattering cosine by an empirical
cubic relation, so a single measured mean cosine pins the whole phase
function; ``solve_tthg_from_mean_cosine`` performs that reduction.

All functions here are pure and accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when the lobe-parameter root search fails to bracket a root."""


@dataclass(frozen=True)
class WaterMedium:
    """Inherent optical properties of the water column.

    absorption and scattering are in 1/m; extinction must equal their sum
    (it is derived when not given).  mean_cos_theta is the mean cosine of
    the single-scattering angle used to pin the phase function.
    """

    absorption: float
    scattering: float
    extinction: float | None = None
    refractive_index: float = 1.33
    mean_cos_theta: float = 0.9675
    backscatter_fraction: float | None = None

    def __post_init__(self):
        if self.extinction is None:
            object.__setattr__(self, "extinction", self.absorption + self.scattering)
        if self.absorption < 0:
            raise ValueError(f"absorption must be >= 0, got {self.absorption}")
        if self.scattering <= 0:
            raise ValueError(f"scattering must be > 0, got {self.scattering}")
        total = self.absorption + self.scattering
        if abs(self.extinction - total) > 1e-12 * max(abs(total), 1.0):
            raise ValueError(
                f"extinction {self.extinction} inconsistent with "
                f"absorption + scattering = {total}"
            )
        if not 0.0 < self.albedo <= 1.0:
            raise ValueError(f"single-scattering albedo {self.albedo} outside (0, 1]")
        if self.refractive_index <= 1.0:
            raise ValueError(f"refractive_index must exceed 1, got {self.refractive_index}")
        if not -1.0 < self.mean_cos_theta < 1.0:
            raise ValueError(f"mean_cos_theta must lie in (-1, 1), got {self.mean_cos_theta}")
        if self.backscatter_fraction is not None and not 0.0 <= self.backscatter_fraction < 0.5:
            raise ValueError(
                f"backscatter_fraction must lie in [0, 0.5), got {self.backscatter_fraction}"
            )

    @property
    def albedo(self) -> float:
        """Single-scattering albedo: scattering / extinction."""
        return self.scattering / self.extinction


@dataclass(frozen=True)
class TTHGParams:
    """Two-term Henyey-Greenstein lobe parameters (a, g_F, g_B)."""

    forward_weight: float
    g_forward: float
    g_backward: float

    def __post_init__(self):
        if not 0.0 <= self.forward_weight <= 1.0:
            raise ValueError(f"forward_weight must lie in [0, 1], got {self.forward_weight}")
        if not 0.0 < self.g_forward < 1.0:
            raise ValueError(f"g_forward must lie in (0, 1), got {self.g_forward}")
        if not 0.0 < self.g_backward < 1.0:
            raise ValueError(f"g_backward must lie in (0, 1), got {self.g_backward}")


def hg_pdf(theta, g):
    """Henyey-Greenstein phase density (1 - g^2) / [2 (1 + g^2 - 2 g cos t)^1.5].

    Normalized so that the integral of hg_pdf * sin(theta) over [0, pi] is 1.
    """
    g = float(g)
    if abs(g) >= 1.0:
        raise ValueError(f"asymmetry factor must satisfy |g| < 1, got {g}")
    cos_t = np.cos(theta)
    return (1.0 - g * g) / (2.0 * (1.0 + g * g - 2.0 * g * cos_t) ** 1.5)


def tthg_pdf(theta, params: TTHGParams):
    """Two-term HG density: a * HG(theta, g_F) + (1 - a) * HG(theta, -g_B)."""
    a = params.forward_weight
    return a * hg_pdf(theta, params.g_forward) + (1.0 - a) * hg_pdf(
        theta, -params.g_backward
    )


def g_backward_from_forward(g_forward):
    """Backward asymmetry as the empirical cubic in the forward asymmetry."""
    gf = np.asarray(g_forward, dtype=np.float64)
    out = (
        -0.3061446
        + 1.000568 * gf
        - 0.01826338 * gf**2
        + 0.03643748 * gf**3
    )
    return float(out) if np.isscalar(g_forward) else out


def forward_weight_from_asymmetries(g_forward, g_backward):
    """Forward-lobe weight a = g_B (1 + g_B) / [(g_F + g_B)(1 + g_B - g_F)]."""
    gf = np.asarray(g_forward, dtype=np.float64)
    gb = np.asarray(g_backward, dtype=np.float64)
    out = gb * (1.0 + gb) / ((gf + gb) * (1.0 + gb - gf))
    return float(out) if np.isscalar(g_forward) else out


def mean_cosine(params: TTHGParams) -> float:
    """Mean scattering cosine of the mixture: a (g_F + g_B) - g_B."""
    return (
        params.forward_weight * (params.g_forward + params.g_backward)
        - params.g_backward
    )


def _mean_cosine_of_gf(gf):
    """Mean cosine as a function of g_F alone, with g_B and a eliminated."""
    gb = g_backward_from_forward(gf)
    a = forward_weight_from_asymmetries(gf, gb)
    return a * (gf + gb) - gb


def solve_tthg_from_mean_cosine(
    mean_cos: float,
    tol: float = 1e-9,
    max_iter: int = 200,
    grid_points: int = 2000,
) -> TTHGParams:
    """Recover (a, g_F, g_B) from a target mean scattering cosine.

    Scans g_F over (0, 1) for sign changes of the mean-cosine residual and
    bisects inside the rightmost bracket (most forward-peaked root when the
    relation admits several).  The residual at the returned g_F is below
    ``tol``.
    """
    if not 0.0 < mean_cos < 1.0:
        raise ValueError(f"mean_cos must lie in (0, 1), got {mean_cos}")
    lo_edge, hi_edge = 1e-6, 1.0 - 1e-6
    grid = np.linspace(lo_edge, hi_edge, grid_points)
    resid = _mean_cosine_of_gf(grid) - mean_cos
    sign_change = np.nonzero(np.diff(np.signbit(resid)))[0]
    if len(sign_change) == 0:
        raise ConvergenceError(
            f"no g_F root in [{lo_edge}, {hi_edge}] for mean_cos={mean_cos}: "
            f"residuals at endpoints {resid[0]:.3e}, {resid[-1]:.3e}"
        )
    i = sign_change[-1]  # rightmost bracket: most forward-peaked root
    lo, hi = grid[i], grid[i + 1]
    f_lo = resid[i]
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = _mean_cosine_of_gf(mid) - mean_cos
        if abs(f_mid) < tol:
            gb = g_backward_from_forward(mid)
            return TTHGParams(forward_weight_from_asymmetries(mid, gb), mid, gb)
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection did not reach residual {tol} within {max_iter} iterations "
        f"(bracket [{lo}, {hi}])"
    )


def mean_cosine_from_backscatter(backscatter_fraction: float) -> float:
    """Mean cosine approximation 2 (1 - 2B) / (2 + B) from the backscatter fraction."""
    B = float(backscatter_fraction)
    if not 0.0 <= B < 0.5:
        raise ValueError(f"backscatter fraction must lie in [0, 0.5), got {B}")
    return 2.0 * (1.0 - 2.0 * B) / (2.0 + B)


def hg_inverse_cos(g, u):
    """Invert the HG cumulative for cos(theta) given u in [0, 1).

    Valid for negative g (backward lobe); g numerically zero falls back to
    the isotropic inverse 2u - 1.
    """
    g = np.asarray(g, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    safe_g = np.where(np.abs(g) < 1e-12, 1.0, g)
    frac = (1.0 - safe_g * safe_g) / (1.0 - safe_g + 2.0 * safe_g * u)
    cos_t = (1.0 + safe_g * safe_g - frac * frac) / (2.0 * safe_g)
    cos_t = np.where(np.abs(g) < 1e-12, 2.0 * u - 1.0, cos_t)
    return np.clip(cos_t, -1.0, 1.0)


def sample_scattering_angle(params: TTHGParams, u1, u2):
    """Draw scattering angles with density tthg_pdf(theta) * sin(theta).

    u1 selects the forward lobe with probability a, u2 inverts the chosen
    lobe's cumulative analytically; distributionally identical to inverting
    the mixture cumulative directly.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    g = np.where(u1 < params.forward_weight, params.g_forward, -params.g_backward)
    cos_t = hg_inverse_cos(g, u2)
    theta = np.arccos(cos_t)
    return float(theta) if theta.ndim == 0 else theta


def clear_ocean() -> WaterMedium:
    """Clear-ocean default medium: extinction 0.151 1/m, mean cosine 0.9675."""
    return WaterMedium(absorption=0.114, scattering=0.037)


_TTHG_CACHE: dict[float, TTHGParams] = {}


def phase_params_for(medium: WaterMedium) -> TTHGParams:
    """Solved TTHG parameters for a medium, memoized by mean cosine."""
    key = medium.mean_cos_theta
    if key not in _TTHG_CACHE:
        _TTHG_CACHE[key] = solve_tthg_from_mean_cosine(key)
    return _TTHG_CACHE[key]


def _hg_cdf_table(params: TTHGParams, n: int = 20001):
    """Numeric CDF of tthg_pdf * sin on a theta grid (trapezoid rule)."""
    theta = np.linspace(0.0, math.pi, n)
    density = tthg_pdf(theta, params) * np.sin(theta)
    cdf = np.concatenate(([0.0], np.cumsum(np.diff(theta) * 0.5 * (density[1:] + density[:-1]))))
    return theta, cdf / cdf[-1]
