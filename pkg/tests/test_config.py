"""Config parsing, canonical form stability, and validation errors."""

import math

import pytest

from uwqkd.config import (
    ConfigError,
    canonical_text,
    config_hash,
    default_config,
    parse_config,
    with_overrides,
)


class TestDefaults:
    def test_clear_ocean_values(self):
        cfg = default_config()
        assert cfg.medium.extinction == pytest.approx(0.151)
        assert cfg.transmitter.wavelength == 532e-9
        assert cfg.geometry.aperture_diameter == 0.20
        assert cfg.geometry.acceptance_radius == 0.10
        assert cfg.receiver.dark_count_rate == 60.0
        assert cfg.environment.depth == 100.0
        assert math.degrees(cfg.transmitter.max_divergence) == pytest.approx(20.0)

    def test_parameterized(self):
        cfg = default_config(link_distance=40.0, beam_radius=0.3,
                             max_divergence_deg=45.0)
        assert cfg.geometry.link_distance == 40.0
        assert cfg.transmitter.beam_radius == 0.3


class TestRoundTrip:
    def test_parse_serialize_parse_identity(self):
        cfg = default_config(link_distance=30.0, seed=123)
        text = canonical_text(cfg)
        again = parse_config(text)
        assert canonical_text(again) == text
        assert config_hash(again) == config_hash(cfg)

    def test_keys_sorted(self):
        lines = [ln.split(" = ")[0] for ln in canonical_text(default_config()).splitlines()]
        assert lines == sorted(lines)

    def test_hash_changes_with_any_field(self):
        base = config_hash(default_config())
        assert config_hash(default_config(seed=43)) != base
        assert config_hash(default_config(link_distance=10.1)) != base
        assert config_hash(default_config(n_photons=10_000_001)) != base

    def test_workers_excluded_from_canonical(self):
        a = with_overrides(default_config(), workers=1)
        b = with_overrides(default_config(), workers=8)
        assert canonical_text(a) == canonical_text(b)
        assert config_hash(a) == config_hash(b)


class TestParsing:
    def test_comments_and_blanks(self):
        cfg = parse_config(
            "# comment\n\nreceiver.link_distance_m = 25\n  # indented comment\n"
        )
        assert cfg.geometry.link_distance == 25.0

    def test_angles_in_degrees(self):
        cfg = parse_config("transmitter.max_divergence_deg = 45\n")
        assert cfg.transmitter.max_divergence == pytest.approx(math.pi / 4)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("transmitter.bogus = 1\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("campaign.seed = 1\ncampaign.seed = 2\n")

    def test_malformed_line_rejected(self):
        with pytest.raises(ConfigError, match="expected"):
            parse_config("this is not a config line\n")

    def test_non_numeric_value_rejected(self):
        with pytest.raises(ConfigError, match="not a number"):
            parse_config("medium.absorption_1_m = fish\n")

    def test_inconsistent_extinction_rejected(self):
        text = (
            "medium.absorption_1_m = 0.1\n"
            "medium.scattering_1_m = 0.05\n"
            "medium.extinction_1_m = 0.2\n"
        )
        with pytest.raises(ConfigError, match="inconsistent"):
            parse_config(text)

    def test_scattering_above_extinction_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("medium.scattering_1_m = -0.05\n")

    def test_acceptance_radius_override(self):
        cfg = parse_config("receiver.acceptance_radius_m = 0.2\n")
        assert cfg.geometry.acceptance_radius == 0.2

    def test_dark_counts_window_values(self):
        assert parse_config("protocol.dark_counts_window = gate\n").dark_counts_window == "gate"
        with pytest.raises(ConfigError, match="dark_counts_window"):
            parse_config("protocol.dark_counts_window = pulse\n")


class TestOverrides:
    def test_override_fields(self):
        cfg = with_overrides(default_config(), n_photons=5, seed=9, workers=3,
                             quantile_level=0.99)
        assert cfg.n_photons == 5
        assert cfg.seed == 9
        assert cfg.workers == 3
        assert cfg.quantile_level == 0.99

    def test_no_overrides_returns_same_config(self):
        cfg = default_config()
        assert with_overrides(cfg) is cfg
