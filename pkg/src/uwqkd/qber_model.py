"""Closed-form link budget: background light, detector noise, and QBER.

Background photons scale with ambient irradiance at depth, collection area,
optical filter width, acceptance solid angle and gate time; dark counts
accumulate at the detector rate over the bit period.  Both feed the sifted
quantum bit error rate, which saturates at 0.5 when noise dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import PLANCK_CONSTANT, SPEED_OF_LIGHT


@dataclass(frozen=True)
class ReceiverSpec:
    """Receiver detection parameters; fov/gate_time may be filled later."""

    aperture_diameter: float  # m
    filter_width: float  # m
    dark_count_rate: float  # Hz
    fov: float | None = None  # rad, acceptance cone half-angle
    gate_time: float | None = None  # s

    def __post_init__(self):
        if self.aperture_diameter <= 0:
            raise ValueError(f"aperture_diameter must be > 0, got {self.aperture_diameter}")
        if self.filter_width <= 0:
            raise ValueError(f"filter_width must be > 0, got {self.filter_width}")
        if self.dark_count_rate < 0:
            raise ValueError(f"dark_count_rate must be >= 0, got {self.dark_count_rate}")
        if self.fov is not None and not 0.0 <= self.fov <= math.pi:
            raise ValueError(f"fov must lie in [0, pi], got {self.fov}")
        if self.gate_time is not None and self.gate_time < 0:
            raise ValueError(f"gate_time must be >= 0, got {self.gate_time}")

    @property
    def aperture_area(self) -> float:
        return math.pi * (0.5 * self.aperture_diameter) ** 2

    def with_selection(self, fov: float, gate_time: float) -> "ReceiverSpec":
        return ReceiverSpec(
            aperture_diameter=self.aperture_diameter,
            filter_width=self.filter_width,
            dark_count_rate=self.dark_count_rate,
            fov=fov,
            gate_time=gate_time,
        )


@dataclass(frozen=True)
class EnvironmentSpec:
    """Ambient light environment of the deployment site."""

    surface_irradiance: float  # W/m^2 at depth 0
    diffuse_attenuation: float  # 1/m
    depth: float  # m

    def __post_init__(self):
        for name in ("surface_irradiance", "diffuse_attenuation", "depth"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class NoiseBudget:
    """Noise photon counts per detection slot."""

    n_background: float  # per gate window
    n_dark: float  # per bit
    n_noise: float  # per detector: n_dark + n_background / 2

    def __post_init__(self):
        if self.n_background < 0 or self.n_dark < 0:
            raise ValueError("noise counts must be >= 0")
        if self.n_noise != self.n_dark + self.n_background / 2:
            raise ValueError("n_noise must equal n_dark + n_background / 2")


def irradiance_at_depth(env: EnvironmentSpec) -> float:
    """Ambient irradiance after exponential decay over depth (W/m^2)."""
    return env.surface_irradiance * math.exp(-env.diffuse_attenuation * env.depth)


def background_count(rx: ReceiverSpec, env: EnvironmentSpec, wavelength: float) -> float:
    """Mean background photons collected during one gate window.

    pi * R_d * A * lambda * d_lambda * (1 - cos(fov)) * gate / (2 h c).
    """
    if rx.fov is None or rx.gate_time is None:
        raise ValueError("receiver fov and gate_time must be set for background_count")
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    r_d = irradiance_at_depth(env)
    return (
        math.pi
        * r_d
        * rx.aperture_area
        * wavelength
        * rx.filter_width
        * (1.0 - math.cos(rx.fov))
        * rx.gate_time
        / (2.0 * PLANCK_CONSTANT * SPEED_OF_LIGHT)
    )


def noise_budget(
    rx: ReceiverSpec,
    env: EnvironmentSpec,
    wavelength: float,
    bit_period: float,
    dark_counts_window: str = "bit",
) -> NoiseBudget:
    """Combined noise per detector for one bit slot.

    ``dark_counts_window`` selects whether dark counts integrate over the
    bit period (default) or only over the gate window.
    """
    if bit_period <= 0:
        raise ValueError(f"bit_period must be > 0, got {bit_period}")
    if dark_counts_window not in ("bit", "gate"):
        raise ValueError(f"dark_counts_window must be 'bit' or 'gate', got {dark_counts_window}")
    n_background = background_count(rx, env, wavelength)  # validates fov/gate
    window = bit_period if dark_counts_window == "bit" else rx.gate_time
    n_dark = rx.dark_count_rate * window
    return NoiseBudget(
        n_background=n_background,
        n_dark=n_dark,
        n_noise=n_dark + n_background / 2,
    )


def qber(gamma: float, n_signal: float, noise: NoiseBudget) -> float:
    """Sifted-key error rate: n_N / (gamma n_S / 2 + 2 n_N), in [0, 0.5]."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    if n_signal <= 0:
        raise ValueError(f"n_signal must be > 0, got {n_signal}")
    denominator = gamma * n_signal / 2 + 2 * noise.n_noise
    if denominator == 0:
        raise ValueError("no signal and no noise: QBER undefined")
    return noise.n_noise / denominator
