"""Monte Carlo photon transport from transmitter plane to receiver plane.

Photons launch at z = 0, travel exponentially distributed steps, lose a
fraction of their weight at every particle interaction, and scatter into a
new direction drawn from the medium phase function.  A photon terminates at
its first forward crossing of the receiver plane z = L (recorded as an
arrival when the crossing point lies inside the aperture), when its weight
drops below the survival threshold, or when a runaway bound trips.

Two execution paths share the same per-photon counter-based draw layout:

* scalar ops (``launch_photon`` .. ``propagate``) trace one photon at a time
  and are the readable reference implementation;
* ``run_campaign`` advances whole batches in vectorized numpy and must
  produce bit-identical records.

Draw layout per photon: block 0 supplies the launch angles (word0 -> azimuth,
word1 -> polar); block k >= 1 supplies interaction k (word0 -> step length,
word1 -> lobe choice, word2 -> lobe inversion, word3 -> scatter azimuth).
"""

from __future__ import annotations

import enum
import math
import multiprocessing
from dataclasses import dataclass
from typing import NamedTuple, TYPE_CHECKING

import numpy as np

from .constants import SPEED_OF_LIGHT
from .medium_optics import TTHGParams, WaterMedium, hg_inverse_cos, phase_params_for
from .rng import PhotonStream, photon_block_words, u01, u01_positive

if TYPE_CHECKING:  # pragma: no cover
    from .arrivals_store import ArrivalSet
    from .config import LinkConfig

TWO_PI = 2.0 * math.pi

#: |mu_z| above which the rotation switches to the near-axis form
NEAR_AXIS_MU_Z = 0.9999


@dataclass(frozen=True)
class TransmitterSpec:
    """Source geometry: photons start on a circle of beam_radius at z = 0,
    tilted by a polar angle uniform in [-max_divergence, max_divergence]."""

    beam_radius: float  # m
    max_divergence: float  # rad
    wavelength: float  # m
    photons_per_pulse: float = 1.0

    def __post_init__(self):
        if self.beam_radius < 0:
            raise ValueError(f"beam_radius must be >= 0, got {self.beam_radius}")
        if not 0.0 <= self.max_divergence < math.pi / 2:
            raise ValueError(
                f"max_divergence must lie in [0, pi/2), got {self.max_divergence}"
            )
        if self.wavelength <= 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        if self.photons_per_pulse <= 0:
            raise ValueError(f"photons_per_pulse must be > 0, got {self.photons_per_pulse}")


@dataclass(frozen=True)
class ReceiverGeometry:
    """Receiver plane at z = link_distance.

    The plane terminates every photon that crosses it; a crossing becomes an
    arrival record when it lands within ``acceptance_radius`` of the axis
    (default: the aperture radius, i.e. half the diameter).
    """

    link_distance: float  # m
    aperture_diameter: float  # m
    acceptance_radius: float | None = None  # m, defaults to aperture radius

    def __post_init__(self):
        if self.link_distance <= 0:
            raise ValueError(f"link_distance must be > 0, got {self.link_distance}")
        if self.aperture_diameter <= 0:
            raise ValueError(f"aperture_diameter must be > 0, got {self.aperture_diameter}")
        if self.acceptance_radius is None:
            object.__setattr__(self, "acceptance_radius", 0.5 * self.aperture_diameter)
        if self.acceptance_radius <= 0:
            raise ValueError(f"acceptance_radius must be > 0, got {self.acceptance_radius}")

    @property
    def aperture_radius(self) -> float:
        return 0.5 * self.aperture_diameter


@dataclass(frozen=True)
class TransportLimits:
    """Termination rules besides plane crossing."""

    weight_threshold: float = 1e-4
    max_interactions: int = 10_000
    min_z: float = -10.0


@dataclass
class PhotonState:
    """One in-flight photon packet."""

    position: np.ndarray  # (3,) m
    direction: np.ndarray  # (3,) unit vector
    weight: float = 1.0
    path_length: float = 0.0


class Outcome(enum.Enum):
    ARRIVED = "arrived"
    ABSORBED = "absorbed"
    ESCAPED = "escaped"


@dataclass(frozen=True)
class ArrivalRecord:
    """Receiver-plane hit inside the aperture."""

    hit_x: float  # m
    hit_y: float  # m
    delay: float  # s, arrival time minus ballistic time of flight
    aoa: float  # rad, angle between arrival direction and +z axis
    weight: float


class PropagationResult(NamedTuple):
    outcome: Outcome
    record: ArrivalRecord | None
    interactions: int
    reason: str  # for escapes: missed_aperture | below_min_z | max_interactions


@dataclass
class CampaignStats:
    n_photons: int = 0
    arrived: int = 0
    absorbed: int = 0
    escaped: int = 0
    arrived_weight: float = 0.0


# ---------------------------------------------------------------------------
# shared numeric helpers (operate on scalars and arrays alike; the scalar and
# vector paths must run the same expressions so trajectories match bitwise)

def _launch_components(beam_radius, max_divergence, u_phi, u_theta):
    phi0 = TWO_PI * u_phi
    theta0 = max_divergence * (2.0 * u_theta - 1.0)
    cos_phi0 = np.cos(phi0)
    sin_phi0 = np.sin(phi0)
    sin_t0 = np.sin(theta0)
    x = beam_radius * cos_phi0
    y = beam_radius * sin_phi0
    mu_x = sin_t0 * cos_phi0
    mu_y = sin_t0 * sin_phi0
    mu_z = np.cos(theta0)
    return x, y, mu_x, mu_y, mu_z


def _rotate_components(mu_x, mu_y, mu_z, theta, phi):
    cos_t = np.cos(theta)
    sin_t = np.sin(theta)
    cos_p = np.cos(phi)
    sin_p = np.sin(phi)
    near = np.abs(mu_z) > NEAR_AXIS_MU_Z
    trans_sq = np.maximum(1.0 - mu_z * mu_z, 1e-300)  # near-axis lanes masked out
    trans = np.sqrt(trans_sq)
    gen_x = sin_t * (mu_x * mu_z * cos_p - mu_y * sin_p) / trans + mu_x * cos_t
    gen_y = sin_t * (mu_y * mu_z * cos_p + mu_x * sin_p) / trans + mu_y * cos_t
    gen_z = -sin_t * cos_p * trans + mu_z * cos_t
    axis_x = sin_t * cos_p
    axis_y = sin_t * sin_p
    axis_z = np.sign(mu_z) * cos_t
    new_x = np.where(near, axis_x, gen_x)
    new_y = np.where(near, axis_y, gen_y)
    new_z = np.where(near, axis_z, gen_z)
    norm = np.sqrt(new_x * new_x + new_y * new_y + new_z * new_z)
    return new_x / norm, new_y / norm, new_z / norm


def _delay(path_length, link_distance, refractive_index):
    nc = refractive_index / SPEED_OF_LIGHT
    return path_length * nc - link_distance * nc


def _scatter_cosine(phase: TTHGParams, u_mix, u_inv):
    g = np.where(
        u_mix < phase.forward_weight, phase.g_forward, -phase.g_backward
    )
    return hg_inverse_cos(g, u_inv)


# ---------------------------------------------------------------------------
# scalar reference operations

def launch_photon(tx: TransmitterSpec, u_phi: float, u_theta: float) -> PhotonState:
    """Initial photon state from two uniform draws in [0, 1).

    Position sits on the source circle at azimuth phi0; the direction shares
    that azimuth and tilts by a polar angle uniform in +-max_divergence.
    """
    x, y, mu_x, mu_y, mu_z = _launch_components(
        tx.beam_radius, tx.max_divergence, float(u_phi), float(u_theta)
    )
    return PhotonState(
        position=np.array([x, y, 0.0], dtype=np.float64),
        direction=np.array([mu_x, mu_y, mu_z], dtype=np.float64),
        weight=1.0,
        path_length=0.0,
    )


def sample_step(extinction: float, q: float) -> float:
    """Free path length -ln(q)/extinction for q in (0, 1]."""
    if extinction <= 0:
        raise ValueError(f"extinction must be > 0, got {extinction}")
    if not 0.0 < q <= 1.0:
        raise ValueError(f"step draw must lie in (0, 1], got {q}")
    # np.log, not math.log: keeps the scalar path bit-identical to the kernel
    return float(-np.log(q) / extinction)


def update_weight(weight: float, medium: WaterMedium) -> float:
    """Post-interaction weight: w * scattering/extinction."""
    return weight * (medium.scattering / medium.extinction)


def rotate_direction(direction, theta: float, phi: float) -> np.ndarray:
    """Deflect a unit vector by scattering angle theta at azimuth phi.

    Uses the direction-cosine update for |mu_z| <= 0.9999 and the near-axis
    form beyond it; the result is renormalized.
    """
    d = np.asarray(direction, dtype=np.float64)
    norm = math.sqrt(float(d @ d))
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be unit length, |d| = {norm}")
    nx, ny, nz = _rotate_components(d[0], d[1], d[2], theta, phi)
    return np.array([nx, ny, nz], dtype=np.float64)


def propagate(
    photon: PhotonState,
    medium: WaterMedium,
    phase: TTHGParams,
    geometry: ReceiverGeometry,
    stream: PhotonStream,
    limits: TransportLimits = TransportLimits(),
) -> PropagationResult:
    """Trace one launched photon to termination.

    Interaction draws come from ``stream`` starting at block 1 (block 0 is
    reserved for the launch), so a photon's trajectory is a pure function of
    (seed, photon index).
    """
    x, y, z = (float(v) for v in photon.position)
    mu_x, mu_y, mu_z = (float(v) for v in photon.direction)
    weight = photon.weight
    path = photon.path_length
    link = geometry.link_distance
    r_sq = geometry.acceptance_radius**2
    interactions = 0
    block = 1
    while True:
        w0, w1, w2, w3 = stream.block_words(block)
        delta = sample_step(medium.extinction, float(u01_positive(w0)))
        z_new = z + mu_z * delta
        if z_new >= link:
            s = (link - z) / mu_z
            hit_x = x + mu_x * s
            hit_y = y + mu_y * s
            path = path + s
            if hit_x * hit_x + hit_y * hit_y <= r_sq:
                record = ArrivalRecord(
                    hit_x=float(hit_x),
                    hit_y=float(hit_y),
                    delay=float(_delay(path, link, medium.refractive_index)),
                    aoa=float(np.arccos(np.clip(mu_z, -1.0, 1.0))),
                    weight=weight,
                )
                return PropagationResult(Outcome.ARRIVED, record, interactions, "")
            return PropagationResult(Outcome.ESCAPED, None, interactions, "missed_aperture")
        x = x + mu_x * delta
        y = y + mu_y * delta
        z = z_new
        path = path + delta
        weight = weight * (medium.scattering / medium.extinction)
        interactions += 1
        if weight < limits.weight_threshold:
            return PropagationResult(Outcome.ABSORBED, None, interactions, "")
        if z < limits.min_z:
            return PropagationResult(Outcome.ESCAPED, None, interactions, "below_min_z")
        if interactions >= limits.max_interactions:
            return PropagationResult(Outcome.ESCAPED, None, interactions, "max_interactions")
        cos_t = float(_scatter_cosine(phase, u01(w1), u01(w2)))
        theta = float(np.arccos(cos_t))
        phi = float(TWO_PI * u01(w3))
        mu_x, mu_y, mu_z = _rotate_components(mu_x, mu_y, mu_z, theta, phi)
        mu_x, mu_y, mu_z = float(mu_x), float(mu_y), float(mu_z)
        block += 1


# ---------------------------------------------------------------------------
# vectorized batch kernel

class _BatchParams(NamedTuple):
    """Plain-float snapshot of everything the kernel needs (picklable)."""

    extinction: float
    albedo: float
    refractive_index: float
    forward_weight: float
    g_forward: float
    g_backward: float
    beam_radius: float
    max_divergence: float
    link_distance: float
    acceptance_radius_sq: float
    weight_threshold: float
    max_interactions: int
    min_z: float


class _BatchResult(NamedTuple):
    indices: np.ndarray  # uint64, sorted ascending
    records: np.ndarray  # (n, 5) float64: hit_x, hit_y, delay, aoa, weight
    arrived: int
    absorbed: int
    escaped: int


def _simulate_batch(bp: _BatchParams, seed: int, start: int, count: int) -> _BatchResult:
    idx = np.arange(start, start + count, dtype=np.uint64)
    w0, w1, _, _ = photon_block_words(seed, idx, 0)
    x, y, mu_x, mu_y, mu_z = _launch_components(
        bp.beam_radius, bp.max_divergence, u01(w0), u01(w1)
    )
    z = np.zeros(count, dtype=np.float64)
    path = np.zeros(count, dtype=np.float64)
    phase = TTHGParams(bp.forward_weight, bp.g_forward, bp.g_backward)

    rec_idx: list[np.ndarray] = []
    rec_val: list[np.ndarray] = []
    arrived = absorbed = escaped = 0
    weight = 1.0
    block = 1
    while idx.size:
        w0, w1, w2, w3 = photon_block_words(seed, idx, block)
        delta = -np.log(u01_positive(w0)) / bp.extinction
        z_new = z + mu_z * delta
        crossed = z_new >= bp.link_distance
        if crossed.any():
            s = (bp.link_distance - z[crossed]) / mu_z[crossed]
            hit_x = x[crossed] + mu_x[crossed] * s
            hit_y = y[crossed] + mu_y[crossed] * s
            hit_path = path[crossed] + s
            inside = hit_x * hit_x + hit_y * hit_y <= bp.acceptance_radius_sq
            n_in = int(inside.sum())
            arrived += n_in
            escaped += int(inside.size - n_in)
            if n_in:
                recs = np.empty((n_in, 5), dtype=np.float64)
                recs[:, 0] = hit_x[inside]
                recs[:, 1] = hit_y[inside]
                recs[:, 2] = _delay(hit_path[inside], bp.link_distance, bp.refractive_index)
                recs[:, 3] = np.arccos(np.clip(mu_z[crossed][inside], -1.0, 1.0))
                recs[:, 4] = weight
                rec_idx.append(idx[crossed][inside])
                rec_val.append(recs)
        live = ~crossed
        idx = idx[live]
        if not idx.size:
            break
        x = x[live] + mu_x[live] * delta[live]
        y = y[live] + mu_y[live] * delta[live]
        z = z_new[live]
        path = path[live] + delta[live]
        mu_x, mu_y, mu_z = mu_x[live], mu_y[live], mu_z[live]
        weight = weight * bp.albedo
        if weight < bp.weight_threshold:
            absorbed += idx.size
            break
        runaway = z < bp.min_z
        if block >= bp.max_interactions:
            runaway = np.ones_like(runaway)
        if runaway.any():
            escaped += int(runaway.sum())
            keep = ~runaway
            idx, x, y, z, path = idx[keep], x[keep], y[keep], z[keep], path[keep]
            mu_x, mu_y, mu_z = mu_x[keep], mu_y[keep], mu_z[keep]
            w1, w2, w3 = w1[live][keep], w2[live][keep], w3[live][keep]
            if not idx.size:
                break
        else:
            w1, w2, w3 = w1[live], w2[live], w3[live]
        cos_t = _scatter_cosine(phase, u01(w1), u01(w2))
        theta = np.arccos(cos_t)
        phi = TWO_PI * u01(w3)
        mu_x, mu_y, mu_z = _rotate_components(mu_x, mu_y, mu_z, theta, phi)
        block += 1

    if rec_idx:
        all_idx = np.concatenate(rec_idx)
        all_rec = np.vstack(rec_val)
        order = np.argsort(all_idx, kind="stable")
        all_idx, all_rec = all_idx[order], all_rec[order]
    else:
        all_idx = np.empty(0, dtype=np.uint64)
        all_rec = np.empty((0, 5), dtype=np.float64)
    return _BatchResult(all_idx, all_rec, arrived, absorbed, escaped)


def _batch_task(args):
    return _simulate_batch(*args)


def batch_params_from(
    medium: WaterMedium,
    phase: TTHGParams,
    tx: TransmitterSpec,
    geometry: ReceiverGeometry,
    limits: TransportLimits,
) -> _BatchParams:
    return _BatchParams(
        extinction=medium.extinction,
        albedo=medium.scattering / medium.extinction,
        refractive_index=medium.refractive_index,
        forward_weight=phase.forward_weight,
        g_forward=phase.g_forward,
        g_backward=phase.g_backward,
        beam_radius=tx.beam_radius,
        max_divergence=tx.max_divergence,
        link_distance=geometry.link_distance,
        acceptance_radius_sq=geometry.acceptance_radius**2,
        weight_threshold=limits.weight_threshold,
        max_interactions=limits.max_interactions,
        min_z=limits.min_z,
    )


def run_campaign(
    config: "LinkConfig",
    n_photons: int | None = None,
    seed: int | None = None,
    workers: int | None = None,
    batch_size: int = 500_000,
) -> "ArrivalSet":
    """Simulate a photon campaign and collect every in-aperture arrival.

    Results are a pure function of (config, n_photons, seed): per-photon
    counter-based streams make them independent of worker count and batch
    size.  No field-of-view or gate filtering is applied here; those are
    analysis-time filters.
    """
    from .arrivals_store import ArrivalSet
    from .config import canonical_text

    n = config.n_photons if n_photons is None else int(n_photons)
    seed_val = config.seed if seed is None else int(seed)
    n_workers = config.workers if workers is None else int(workers)
    if n < 0:
        raise ValueError(f"n_photons must be >= 0, got {n}")

    bp = batch_params_from(
        config.medium,
        phase_params_for(config.medium),
        config.transmitter,
        config.geometry,
        config.limits,
    )
    tasks = [
        (bp, seed_val, start, min(batch_size, n - start))
        for start in range(0, n, batch_size)
    ]
    if n_workers > 1 and len(tasks) > 1:
        with multiprocessing.Pool(processes=n_workers) as pool:
            results = pool.map(_batch_task, tasks)
    else:
        results = [_batch_task(t) for t in tasks]

    if results:
        records = np.vstack([r.records for r in results])
    else:
        records = np.empty((0, 5), dtype=np.float64)
    stats = CampaignStats(
        n_photons=n,
        arrived=sum(r.arrived for r in results),
        absorbed=sum(r.absorbed for r in results),
        escaped=sum(r.escaped for r in results),
        arrived_weight=float(records[:, 4].sum()) if records.size else 0.0,
    )
    return ArrivalSet(
        config_text=canonical_text(config),
        n_photons=n,
        seed=seed_val,
        records=records,
        absorbed=stats.absorbed,
        escaped=stats.escaped,
        arrived_weight=stats.arrived_weight,
    )
