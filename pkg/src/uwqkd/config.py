"""Experiment configuration: parsing, validation, canonical serialization.

Config files are flat ``key = value`` text with dotted section keys, SI
units throughout except angles, which are written in degrees and converted
to radians at parse time.  Canonical serialization is key-sorted with
shortest round-trip float formatting, so equal configs hash equally and the
hash keys campaign caches.

``campaign.workers`` is accepted but excluded from the canonical form: it
is an execution detail that must not change any result.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

from .medium_optics import WaterMedium
from .qber_model import EnvironmentSpec, ReceiverSpec
from .transport import ReceiverGeometry, TransmitterSpec, TransportLimits


class ConfigError(ValueError):
    """Invalid, unknown, or inconsistent configuration input."""


@dataclass(frozen=True)
class LinkConfig:
    """Everything one experiment needs, Table-style defaults included."""

    transmitter: TransmitterSpec
    geometry: ReceiverGeometry
    receiver: ReceiverSpec
    environment: EnvironmentSpec
    medium: WaterMedium
    limits: TransportLimits
    quantile_level: float = 0.999
    dark_counts_window: str = "bit"
    n_photons: int = 10_000_000
    seed: int = 42
    workers: int = 1

    def __post_init__(self):
        if not 0.0 < self.quantile_level < 1.0:
            raise ConfigError(
                f"analysis.quantile_level must lie in (0, 1), got {self.quantile_level}"
            )
        if self.dark_counts_window not in ("bit", "gate"):
            raise ConfigError(
                f"protocol.dark_counts_window must be 'bit' or 'gate', "
                f"got {self.dark_counts_window!r}"
            )
        if self.n_photons < 0:
            raise ConfigError(f"campaign.n_photons must be >= 0, got {self.n_photons}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"campaign.seed must fit in 64 bits, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"campaign.workers must be >= 1, got {self.workers}")


def default_config(
    link_distance: float = 10.0,
    beam_radius: float = 0.003,
    max_divergence_deg: float = 20.0,
    n_photons: int = 10_000_000,
    seed: int = 42,
) -> LinkConfig:
    """Clear-ocean defaults: 532 nm, 20 cm aperture, 60 Hz dark counts,
    surface irradiance 1e-3 W/m^2 decaying at 0.08 1/m down to 100 m depth."""
    return LinkConfig(
        transmitter=TransmitterSpec(
            beam_radius=beam_radius,
            max_divergence=math.radians(max_divergence_deg),
            wavelength=532e-9,
            photons_per_pulse=1.0,
        ),
        geometry=ReceiverGeometry(link_distance=link_distance, aperture_diameter=0.20),
        receiver=ReceiverSpec(
            aperture_diameter=0.20,
            filter_width=30e-9,
            dark_count_rate=60.0,
        ),
        environment=EnvironmentSpec(
            surface_irradiance=1e-3,
            diffuse_attenuation=0.08,
            depth=100.0,
        ),
        medium=WaterMedium(absorption=0.114, scattering=0.037),
        limits=TransportLimits(),
        n_photons=n_photons,
        seed=seed,
    )


def _config_items(config: LinkConfig) -> dict:
    tx, geo, rx = config.transmitter, config.geometry, config.receiver
    env, med, lim = config.environment, config.medium, config.limits
    items = {
        "transmitter.beam_radius_m": tx.beam_radius,
        "transmitter.max_divergence_deg": math.degrees(tx.max_divergence),
        "transmitter.wavelength_m": tx.wavelength,
        "transmitter.photons_per_pulse": tx.photons_per_pulse,
        "receiver.link_distance_m": geo.link_distance,
        "receiver.aperture_diameter_m": geo.aperture_diameter,
        "receiver.acceptance_radius_m": geo.acceptance_radius,
        "receiver.filter_width_m": rx.filter_width,
        "receiver.dark_count_rate_hz": rx.dark_count_rate,
        "environment.surface_irradiance_w_m2": env.surface_irradiance,
        "environment.diffuse_attenuation_1_m": env.diffuse_attenuation,
        "environment.depth_m": env.depth,
        "medium.absorption_1_m": med.absorption,
        "medium.scattering_1_m": med.scattering,
        "medium.extinction_1_m": med.extinction,
        "medium.refractive_index": med.refractive_index,
        "medium.mean_cos_theta": med.mean_cos_theta,
        "analysis.quantile_level": config.quantile_level,
        "protocol.dark_counts_window": config.dark_counts_window,
        "transport.weight_threshold": lim.weight_threshold,
        "transport.max_interactions": lim.max_interactions,
        "transport.min_z_m": lim.min_z,
        "campaign.n_photons": config.n_photons,
        "campaign.seed": config.seed,
    }
    if med.backscatter_fraction is not None:
        items["medium.backscatter_fraction"] = med.backscatter_fraction
    if rx.fov is not None:
        items["receiver.fov_deg"] = math.degrees(rx.fov)
    if rx.gate_time is not None:
        items["receiver.gate_time_s"] = rx.gate_time
    return items


def _format_value(value) -> str:
    if isinstance(value, bool):
        raise TypeError("no boolean config values")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def canonical_text(config: LinkConfig) -> str:
    """Key-sorted flat serialization; stable input for hashing and headers."""
    items = _config_items(config)
    return "".join(f"{k} = {_format_value(items[k])}\n" for k in sorted(items))


def config_hash(config: LinkConfig) -> str:
    """SHA-256 of the canonical form (covers n_photons and seed)."""
    return hashlib.sha256(canonical_text(config).encode("utf-8")).hexdigest()


_FLOAT_KEYS = {
    "transmitter.beam_radius_m",
    "transmitter.max_divergence_deg",
    "transmitter.wavelength_m",
    "transmitter.photons_per_pulse",
    "receiver.link_distance_m",
    "receiver.aperture_diameter_m",
    "receiver.acceptance_radius_m",
    "receiver.filter_width_m",
    "receiver.dark_count_rate_hz",
    "receiver.fov_deg",
    "receiver.gate_time_s",
    "environment.surface_irradiance_w_m2",
    "environment.diffuse_attenuation_1_m",
    "environment.depth_m",
    "medium.absorption_1_m",
    "medium.scattering_1_m",
    "medium.extinction_1_m",
    "medium.refractive_index",
    "medium.mean_cos_theta",
    "medium.backscatter_fraction",
    "analysis.quantile_level",
    "transport.weight_threshold",
    "transport.min_z_m",
}
_INT_KEYS = {"transport.max_interactions", "campaign.n_photons", "campaign.seed",
             "campaign.workers"}
_STR_KEYS = {"protocol.dark_counts_window"}
_ALL_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS


def parse_config(text: str) -> LinkConfig:
    """Parse flat config text; unset keys fall back to the defaults."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    def take_float(key, default=None):
        if key not in raw:
            return default
        try:
            return float(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: not a number: {raw[key]!r}") from exc

    def take_int(key, default=None):
        if key not in raw:
            return default
        try:
            return int(raw[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: not an integer: {raw[key]!r}") from exc

    base = default_config()
    try:
        medium = WaterMedium(
            absorption=take_float("medium.absorption_1_m", base.medium.absorption),
            scattering=take_float("medium.scattering_1_m", base.medium.scattering),
            extinction=take_float("medium.extinction_1_m"),
            refractive_index=take_float(
                "medium.refractive_index", base.medium.refractive_index
            ),
            mean_cos_theta=take_float("medium.mean_cos_theta", base.medium.mean_cos_theta),
            backscatter_fraction=take_float("medium.backscatter_fraction"),
        )
        fov_deg = take_float("receiver.fov_deg")
        config = LinkConfig(
            transmitter=TransmitterSpec(
                beam_radius=take_float(
                    "transmitter.beam_radius_m", base.transmitter.beam_radius
                ),
                max_divergence=math.radians(
                    take_float(
                        "transmitter.max_divergence_deg",
                        math.degrees(base.transmitter.max_divergence),
                    )
                ),
                wavelength=take_float("transmitter.wavelength_m", base.transmitter.wavelength),
                photons_per_pulse=take_float(
                    "transmitter.photons_per_pulse", base.transmitter.photons_per_pulse
                ),
            ),
            geometry=ReceiverGeometry(
                link_distance=take_float(
                    "receiver.link_distance_m", base.geometry.link_distance
                ),
                aperture_diameter=take_float(
                    "receiver.aperture_diameter_m", base.geometry.aperture_diameter
                ),
                acceptance_radius=take_float("receiver.acceptance_radius_m"),
            ),
            receiver=ReceiverSpec(
                aperture_diameter=take_float(
                    "receiver.aperture_diameter_m", base.geometry.aperture_diameter
                ),
                filter_width=take_float("receiver.filter_width_m", base.receiver.filter_width),
                dark_count_rate=take_float(
                    "receiver.dark_count_rate_hz", base.receiver.dark_count_rate
                ),
                fov=math.radians(fov_deg) if fov_deg is not None else None,
                gate_time=take_float("receiver.gate_time_s"),
            ),
            environment=EnvironmentSpec(
                surface_irradiance=take_float(
                    "environment.surface_irradiance_w_m2",
                    base.environment.surface_irradiance,
                ),
                diffuse_attenuation=take_float(
                    "environment.diffuse_attenuation_1_m",
                    base.environment.diffuse_attenuation,
                ),
                depth=take_float("environment.depth_m", base.environment.depth),
            ),
            medium=medium,
            limits=TransportLimits(
                weight_threshold=take_float(
                    "transport.weight_threshold", base.limits.weight_threshold
                ),
                max_interactions=take_int(
                    "transport.max_interactions", base.limits.max_interactions
                ),
                min_z=take_float("transport.min_z_m", base.limits.min_z),
            ),
            quantile_level=take_float("analysis.quantile_level", base.quantile_level),
            dark_counts_window=raw.get("protocol.dark_counts_window", base.dark_counts_window),
            n_photons=take_int("campaign.n_photons", base.n_photons),
            seed=take_int("campaign.seed", base.seed),
            workers=take_int("campaign.workers", base.workers),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return config


def load_config(path) -> LinkConfig:
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise OSError(f"cannot read config from {path}: {exc}") from exc


def with_overrides(
    config: LinkConfig,
    n_photons: int | None = None,
    seed: int | None = None,
    workers: int | None = None,
    quantile_level: float | None = None,
) -> LinkConfig:
    """Copy with CLI-level overrides applied."""
    updates = {}
    if n_photons is not None:
        updates["n_photons"] = int(n_photons)
    if seed is not None:
        updates["seed"] = int(seed)
    if workers is not None:
        updates["workers"] = int(workers)
    if quantile_level is not None:
        updates["quantile_level"] = float(quantile_level)
    return replace(config, **updates) if updates else config
