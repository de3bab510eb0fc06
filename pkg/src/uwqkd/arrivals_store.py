"""Binary persistence for campaign arrival sets.

Transport campaigns are expensive while analysis is cheap and repeated, so
arrivals go to disk once and are reloaded at will.  The format is
little-endian and CRC-protected:

    magic "UQKD" | u32 version | u64 n_photons | u64 n_records | u64 seed
    | u64 absorbed | u64 escaped | f64 arrived_weight
    | u32 config_len | config UTF-8 | u32 crc32(header)
    | n_records x 5 f64 (hit_x, hit_y, delay, aoa, weight) | u32 crc32(records)

Records hold IEEE doubles verbatim, so persist/load round-trips are exact.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

MAGIC = b"UQKD"
FORMAT_VERSION = 1
RECORD_BYTES = 40  # 5 doubles

CSV_HEADER = "hit_x_m,hit_y_m,delay_s,aoa_rad,weight"


class IntegrityError(RuntimeError):
    """File failed magic/version/CRC validation."""


@dataclass(eq=False)
class ArrivalSet:
    """Every in-aperture receiver-plane hit of one campaign, plus totals.

    ``records`` is an (n, 5) float64 array with columns hit_x, hit_y, delay,
    aoa, weight, ordered by launching photon index.
    """

    config_text: str
    n_photons: int
    seed: int
    records: np.ndarray
    absorbed: int
    escaped: int
    arrived_weight: float

    def __post_init__(self):
        self.records = np.ascontiguousarray(self.records, dtype=np.float64)
        if self.records.ndim != 2 or self.records.shape[1] != 5:
            raise ValueError(f"records must be (n, 5), got {self.records.shape}")
        if self.arrived + self.absorbed + self.escaped != self.n_photons:
            raise ValueError(
                f"totals {self.arrived}+{self.absorbed}+{self.escaped} "
                f"do not sum to n_photons={self.n_photons}"
            )

    @property
    def arrived(self) -> int:
        return self.records.shape[0]

    @property
    def delays(self) -> np.ndarray:
        return self.records[:, 2]

    @property
    def aoas(self) -> np.ndarray:
        return self.records[:, 3]

    @property
    def weights(self) -> np.ndarray:
        return self.records[:, 4]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ArrivalSet):
            return NotImplemented
        return (
            self.config_text == other.config_text
            and self.n_photons == other.n_photons
            and self.seed == other.seed
            and self.absorbed == other.absorbed
            and self.escaped == other.escaped
            and self.arrived_weight == other.arrived_weight
            and self.records.shape == other.records.shape
            and bool(np.all(self.records == other.records))
        )


def _header_bytes(arrivals: ArrivalSet) -> bytes:
    config_blob = arrivals.config_text.encode("utf-8")
    return (
        MAGIC
        + struct.pack(
            "<IQQQQQd",
            FORMAT_VERSION,
            arrivals.n_photons,
            arrivals.arrived,
            arrivals.seed,
            arrivals.absorbed,
            arrivals.escaped,
            arrivals.arrived_weight,
        )
        + struct.pack("<I", len(config_blob))
        + config_blob
    )


def persist(arrivals: ArrivalSet, path) -> None:
    """Write an arrival set to ``path`` (overwrites)."""
    header = _header_bytes(arrivals)
    body = arrivals.records.astype("<f8", copy=False).tobytes(order="C")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(struct.pack("<I", zlib.crc32(header)))
            fh.write(body)
            fh.write(struct.pack("<I", zlib.crc32(body)))
    except OSError as exc:
        raise OSError(f"cannot write arrival set to {path}: {exc}") from exc


def load(path) -> ArrivalSet:
    """Read an arrival set previously written by :func:`persist`."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read arrival set from {path}: {exc}") from exc

    fixed = 4 + struct.calcsize("<IQQQQQd") + 4
    if len(blob) < fixed or blob[:4] != MAGIC:
        raise IntegrityError(f"{path}: not an arrival-set file (bad magic)")
    version, n_photons, n_records, seed, absorbed, escaped, arrived_weight = struct.unpack_from(
        "<IQQQQQd", blob, 4
    )
    if version != FORMAT_VERSION:
        raise IntegrityError(f"{path}: unsupported format version {version}")
    (config_len,) = struct.unpack_from("<I", blob, fixed - 4)
    header_end = fixed + config_len
    if len(blob) < header_end + 4:
        raise IntegrityError(f"{path}: truncated header")
    config_text = blob[fixed:header_end].decode("utf-8")
    (header_crc,) = struct.unpack_from("<I", blob, header_end)
    if zlib.crc32(blob[:header_end]) != header_crc:
        raise IntegrityError(f"{path}: header CRC mismatch")
    body_start = header_end + 4
    body_end = body_start + n_records * RECORD_BYTES
    if len(blob) < body_end + 4:
        raise IntegrityError(f"{path}: truncated record region")
    body = blob[body_start:body_end]
    (body_crc,) = struct.unpack_from("<I", blob, body_end)
    if zlib.crc32(body) != body_crc:
        raise IntegrityError(f"{path}: record CRC mismatch")
    records = np.frombuffer(body, dtype="<f8").reshape(n_records, 5).copy()
    return ArrivalSet(
        config_text=config_text,
        n_photons=n_photons,
        seed=seed,
        records=records,
        absorbed=absorbed,
        escaped=escaped,
        arrived_weight=arrived_weight,
    )


def export_csv(arrivals: ArrivalSet, path) -> None:
    """Text export, one record per line; doubles keep 17 significant digits."""
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in arrivals.records:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def import_csv_records(path) -> np.ndarray:
    """Parse an export back into a record array (test helper)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header!r}")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    if not rows:
        return np.empty((0, 5), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)
