"""Channel-design quantities from raw arrival statistics.

The bit period comes from a high quantile of the arrival delay distribution
(no field-of-view filter: worst case for intersymbol interference), the
receiver field of view from the same quantile of the angle-of-arrival
distribution, and gamma is the fraction of launched photon weight that
survives the aperture + FoV + gate acceptance chain.

Selection quantiles are count-based (each received packet is one sample of
the arrival-statistics CDF); a weight-weighted mode exists for sensitivity
checks.  The accepted fraction gamma stays weight-summed, since packet
weight carries the survival probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .arrivals_store import ArrivalSet

#: presentation granularity: whole ns for periods of 1 ns and up, 0.01 ns below
BIT_PERIOD_COARSE = 1e-9
BIT_PERIOD_FINE = 1e-11
FOV_GRANULARITY_DEG = 1.0


@dataclass(frozen=True)
class EmpiricalCdf:
    """Weighted empirical CDF over unique sorted sample values.

    Queries interpolate linearly between the (value, cumulative weight)
    points, so quantile(level) inverts cdf() up to tie collapsing.
    """

    values: np.ndarray  # unique, ascending
    cum_weights: np.ndarray  # strictly increasing, same length

    @property
    def total_weight(self) -> float:
        return float(self.cum_weights[-1])

    def quantile(self, level: float) -> float:
        if not 0.0 <= level <= 1.0:
            raise ValueError(f"quantile level must lie in [0, 1], got {level}")
        target = level * self.cum_weights[-1]
        return float(np.interp(target, self.cum_weights, self.values))

    def cdf(self, x) -> np.ndarray | float:
        xs = np.asarray(x, dtype=np.float64)
        out = np.interp(xs, self.values, self.cum_weights) / self.cum_weights[-1]
        out = np.where(xs < self.values[0], 0.0, out)
        return float(out) if out.ndim == 0 else out


def build_cdf(values, weights=None) -> EmpiricalCdf:
    """Weight-normalized empirical CDF; ties collapse into one point."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise ValueError("cannot build a CDF from an empty sample")
    w = np.ones_like(vals) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != vals.shape:
        raise ValueError("weights must match values in shape")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    order = np.argsort(vals, kind="stable")
    vals, w = vals[order], w[order]
    uniq, start = np.unique(vals, return_index=True)
    summed = np.add.reduceat(w, start)
    return EmpiricalCdf(values=uniq, cum_weights=np.cumsum(summed))


class BitPeriod(NamedTuple):
    raw: float  # s
    rounded: float  # s


class FieldOfView(NamedTuple):
    raw: float  # rad
    rounded: float  # rad


@dataclass(frozen=True)
class ChannelSelection:
    """Bit period and FoV pinned for downstream noise/QBER evaluation."""

    bit_period: float  # s
    fov: float  # rad
    quantile_level: float = 0.999
    link_distance: float | None = None

    def __post_init__(self):
        if self.bit_period <= 0:
            raise ValueError(f"bit_period must be > 0, got {self.bit_period}")
        if not 0.0 < self.fov <= math.pi:
            raise ValueError(f"fov must lie in (0, pi], got {self.fov}")
        if not 0.0 < self.quantile_level < 1.0:
            raise ValueError(f"quantile_level must lie in (0, 1), got {self.quantile_level}")


def round_up_bit_period(raw: float) -> float:
    """Round a raw delay quantile up to presentation granularity."""
    if raw <= 0:
        return 0.0
    gran = BIT_PERIOD_COARSE if raw >= BIT_PERIOD_COARSE else BIT_PERIOD_FINE
    return math.ceil(raw / gran * (1.0 - 1e-12)) * gran


def round_up_fov(raw: float) -> float:
    """Round a raw angle-of-arrival quantile up to whole degrees."""
    if raw <= 0:
        return 0.0
    steps = math.ceil(math.degrees(raw) / FOV_GRANULARITY_DEG * (1.0 - 1e-12))
    return math.radians(steps * FOV_GRANULARITY_DEG)


def select_bit_period(
    arrivals: ArrivalSet, level: float = 0.999, weighted: bool = False
) -> BitPeriod:
    """Delay quantile over all arrivals (FoV 180 degrees: ISI worst case).

    Count-based by default: each received packet counts once, matching how
    arrival CDFs are tallied for channel design; ``weighted=True`` weighs
    packets by survival weight instead (sensitivity mode).
    """
    if arrivals.arrived == 0:
        raise ValueError("arrival set is empty; cannot select a bit period")
    cdf = build_cdf(arrivals.delays, arrivals.weights if weighted else None)
    raw = cdf.quantile(level)
    return BitPeriod(raw=raw, rounded=round_up_bit_period(raw))


def select_fov(
    arrivals: ArrivalSet, level: float = 0.999, weighted: bool = False
) -> FieldOfView:
    """Angle-of-arrival quantile over all arrivals (count-based by default)."""
    if arrivals.arrived == 0:
        raise ValueError("arrival set is empty; cannot select a field of view")
    cdf = build_cdf(arrivals.aoas, arrivals.weights if weighted else None)
    raw = cdf.quantile(level)
    return FieldOfView(raw=raw, rounded=round_up_fov(raw))


def gamma(arrivals: ArrivalSet, fov: float, gate: float) -> float:
    """Accepted weight fraction: aoa <= fov and delay <= gate, over launches."""
    if not 0.0 < fov <= math.pi:
        raise ValueError(f"fov must lie in (0, pi], got {fov}")
    if gate < 0:
        raise ValueError(f"gate must be >= 0, got {gate}")
    if arrivals.n_photons == 0:
        return 0.0
    mask = (arrivals.aoas <= fov) & (arrivals.delays <= gate)
    return float(arrivals.weights[mask].sum()) / arrivals.n_photons


class GammaTable:
    """Fast repeated gamma queries at fixed FoV over a sweep of gate times."""

    def __init__(self, arrivals: ArrivalSet, fov: float):
        if not 0.0 < fov <= math.pi:
            raise ValueError(f"fov must lie in (0, pi], got {fov}")
        in_fov = arrivals.aoas <= fov
        delays = arrivals.delays[in_fov]
        weights = arrivals.weights[in_fov]
        order = np.argsort(delays, kind="stable")
        self._delays = delays[order]
        self._cum_weights = np.cumsum(weights[order])
        self._n_photons = arrivals.n_photons

    def gamma(self, gate) -> np.ndarray | float:
        gates = np.asarray(gate, dtype=np.float64)
        pos = np.searchsorted(self._delays, gates, side="right")
        cum = np.concatenate(([0.0], self._cum_weights))
        out = cum[pos] / self._n_photons if self._n_photons else np.zeros_like(gates)
        return float(out) if out.ndim == 0 else out


def channel_selection(
    arrivals: ArrivalSet,
    level: float = 0.999,
    use_rounded: bool = True,
    link_distance: float | None = None,
) -> ChannelSelection:
    """Select bit period and FoV from one arrival set at the given level."""
    bp = select_bit_period(arrivals, level)
    fov = select_fov(arrivals, level)
    return ChannelSelection(
        bit_period=bp.rounded if use_rounded else bp.raw,
        fov=fov.rounded if use_rounded else fov.raw,
        quantile_level=level,
        link_distance=link_distance,
    )


def write_cdf_csv(cdf: EmpiricalCdf, path) -> None:
    """CDF polyline as ``value,cdf`` rows for external plotting."""
    total = cdf.total_weight
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("value,cdf\n")
            for v, c in zip(cdf.values, cdf.cum_weights):
                fh.write(f"{v:.17g},{c / total:.17g}\n")
    except OSError as exc:
        raise OSError(f"cannot write CDF CSV to {path}: {exc}") from exc
