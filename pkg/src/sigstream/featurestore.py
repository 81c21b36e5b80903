"""Signature feature storage: binary persistence, user splits, synthetic data.

A dataset is a flat collection of signature records.  Each record carries a
writer id, a kind (genuine or skilled forgery), a per-(writer, kind) sequence
index, and one feature vector.  Random forgeries are never stored: a random
forgery is a genuine record of a different writer, selected at pairing time.

Binary feature file (all integers little-endian)::

    magic   'SHSV'  (4 bytes)
    version u32     (currently 1)
    dim     u32
    count   u32
    count records, each:
        writer_id u32 | kind u8 (0=genuine, 1=skilled) | seq_index u32
        dim x f32 feature values

Feature values are stored as 32-bit floats; in-memory arrays are float64
whose values are exactly representable in float32, so save -> load is the
identity.  A CSV import path accepts ``writer_id,kind,seq,f0,...,f{K-1}``.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable

import numpy as np

from ._rng import TAG_DRIFT, TAG_SPLIT, TAG_WRITER, SplitMix64, mix
from .errors import ConfigError, DataError, FormatError

MAGIC = b"SHSV"
FORMAT_VERSION = 1
HEADER_SIZE = 16
_U32_MAX = 0xFFFFFFFF


class SignatureKind(IntEnum):
    GENUINE = 0
    SKILLED = 1


@dataclass(eq=False)
class SignatureRecord:
    """One signature: identity, kind, order within (writer, kind), features."""

    writer_id: int
    kind: SignatureKind
    seq_index: int
    features: np.ndarray

    def __post_init__(self) -> None:
        if self.writer_id < 0 or self.seq_index < 0:
            raise DataError("writer_id and seq_index must be non-negative")
        self.kind = SignatureKind(self.kind)
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1 or feats.size < 1:
            raise DataError("features must be a 1-D vector with dim >= 1")
        if not np.all(np.isfinite(feats)):
            raise DataError(
                f"non-finite feature value for writer {self.writer_id}"
            )
        # Storage is f32; normalizing here keeps save->load an identity.
        self.features = feats.astype(np.float32).astype(np.float64)

    @property
    def dim(self) -> int:
        return int(self.features.size)

    def key(self) -> tuple[int, int, int]:
        return (self.writer_id, int(self.kind), self.seq_index)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignatureRecord):
            return NotImplemented
        return self.key() == other.key() and np.array_equal(
            self.features, other.features
        )


class Dataset:
    """Immutable record collection indexed by writer and kind.

    Invariants enforced on construction: every record shares one dim, all
    values are finite, (writer, kind, seq) keys are unique, and every writer
    has at least one genuine signature.
    """

    def __init__(self, records: Iterable[SignatureRecord], dim: int | None = None):
        self._records = list(records)
        if not self._records:
            if dim is None or dim < 1:
                raise DataError("empty dataset requires an explicit dim >= 1")
            self._dim = int(dim)
        else:
            self._dim = self._records[0].dim
            if dim is not None and int(dim) != self._dim:
                raise DataError(f"dim {dim} does not match records ({self._dim})")

        index: dict[int, dict[SignatureKind, list[SignatureRecord]]] = {}
        seen: set[tuple[int, int, int]] = set()
        for rec in self._records:
            if rec.dim != self._dim:
                raise DataError(
                    f"record {rec.key()} has dim {rec.dim}, expected {self._dim}"
                )
            k = rec.key()
            if k in seen:
                raise DataError(f"duplicate record key {k}")
            seen.add(k)
            index.setdefault(rec.writer_id, {}).setdefault(rec.kind, []).append(rec)
        for writer, by_kind in index.items():
            if not by_kind.get(SignatureKind.GENUINE):
                raise DataError(f"writer {writer} has no genuine signatures")
            for recs in by_kind.values():
                recs.sort(key=lambda r: r.seq_index)
        self._index = index

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def records(self) -> list[SignatureRecord]:
        return list(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def writers(self) -> list[int]:
        return sorted(self._index)

    def records_of(self, writer_id: int, kind: SignatureKind) -> list[SignatureRecord]:
        """Records of one (writer, kind), ordered by seq_index."""
        by_kind = self._index.get(writer_id)
        if by_kind is None:
            raise DataError(f"unknown writer {writer_id}")
        return list(by_kind.get(kind, []))

    def count_of(self, writer_id: int, kind: SignatureKind) -> int:
        by_kind = self._index.get(writer_id, {})
        return len(by_kind.get(kind, []))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self._dim != other._dim or len(self._records) != len(other._records):
            return False
        a = sorted(self._records, key=SignatureRecord.key)
        b = sorted(other._records, key=SignatureRecord.key)
        return all(x == y for x, y in zip(a, b))


@dataclass(frozen=True)
class SplitConfig:
    """Development / exploitation partition parameters.

    dev_genuine_per_user must be even: negative training pairs use half as
    many random forgeries as genuine signatures.
    """

    dev_user_count: int
    dev_genuine_per_user: int
    exploit_user_count: int
    refs_per_user: int
    claims_per_user: int
    seed: int

    def validate(self) -> None:
        if self.dev_user_count < 2:
            raise ConfigError("dev_user_count must be >= 2 (random forgeries need a second writer)")
        if self.dev_genuine_per_user < 2 or self.dev_genuine_per_user % 2 != 0:
            raise ConfigError("dev_genuine_per_user must be even and >= 2")
        if self.exploit_user_count < 2:
            raise ConfigError("exploit_user_count must be >= 2")
        if self.refs_per_user < 1:
            raise ConfigError("refs_per_user must be >= 1")
        if self.claims_per_user < 1:
            raise ConfigError("claims_per_user must be >= 1")


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic embedding generator settings.

    Writer i gets a mean vector mu_i ~ N(0, I).  Genuine samples scatter
    around mu_i; skilled forgeries are displaced by a fixed per-writer unit
    direction times skilled_offset_scale, with at-least-as-wide noise.

    Drift models a slowly moving embedding space (extractor aging): one
    dataset-level drift direction with per-coordinate magnitudes drawn from
    N(0, drift_velocity_sigma^2), scaled per writer by a folded-normal
    susceptibility.  A record with sequence index s is displaced by
    s * susceptibility_i * direction, so later claims drift away from early
    references coherently across writers but at writer-specific speeds.
    """

    writer_count: int
    genuine_per_writer: int
    skilled_per_writer: int
    dim: int
    genuine_noise_sigma: float = 0.25
    skilled_offset_scale: float = 1.0
    skilled_noise_sigma: float = 0.35
    drift_velocity_sigma: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.writer_count < 1:
            raise ConfigError("writer_count must be >= 1")
        if self.genuine_per_writer < 1:
            raise ConfigError("genuine_per_writer must be >= 1")
        if self.skilled_per_writer < 0:
            raise ConfigError("skilled_per_writer must be >= 0")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        for name in ("genuine_noise_sigma", "skilled_noise_sigma", "drift_velocity_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.skilled_offset_scale < 0:
            raise ConfigError("skilled_offset_scale must be >= 0")
        if self.skilled_noise_sigma < self.genuine_noise_sigma:
            raise ConfigError(
                "skilled_noise_sigma must be >= genuine_noise_sigma"
            )


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write the binary feature file. Byte-deterministic for a given dataset."""
    if dataset.dim > _U32_MAX or len(dataset) > _U32_MAX:
        raise DataError("dim or record count overflows the u32 format field")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<III", FORMAT_VERSION, dataset.dim, len(dataset))
    for rec in sorted(dataset.records, key=SignatureRecord.key):
        if rec.writer_id > _U32_MAX or rec.seq_index > _U32_MAX:
            raise DataError(f"record {rec.key()} overflows a u32 format field")
        out += struct.pack("<IBI", rec.writer_id, int(rec.kind), rec.seq_index)
        out += rec.features.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(out))


def load_dataset(path: str | Path) -> Dataset:
    """Read a binary feature file written by :func:`save_dataset`."""
    blob = Path(path).read_bytes()
    if len(blob) < HEADER_SIZE:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {blob[:4]!r}")
    version, dim, count = struct.unpack("<III", blob[4:HEADER_SIZE])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if dim < 1:
        raise FormatError(f"{path}: dim must be >= 1, got {dim}")
    rec_size = 9 + 4 * dim
    records: list[SignatureRecord] = []
    offset = HEADER_SIZE
    for _ in range(count):
        if offset + rec_size > len(blob):
            raise FormatError(
                f"{path}: truncated at byte offset {len(blob)}, "
                f"record needs bytes [{offset}, {offset + rec_size})"
            )
        writer_id, kind_byte, seq = struct.unpack_from("<IBI", blob, offset)
        if kind_byte not in (0, 1):
            raise FormatError(f"{path}: invalid kind byte {kind_byte} at offset {offset + 4}")
        feats = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset + 9)
        if not np.all(np.isfinite(feats)):
            raise FormatError(f"{path}: non-finite feature in record at offset {offset}")
        records.append(
            SignatureRecord(writer_id, SignatureKind(kind_byte), seq, feats)
        )
        offset += rec_size
    if offset != len(blob):
        raise FormatError(f"{path}: {len(blob) - offset} trailing bytes after last record")
    try:
        return Dataset(records, dim=dim)
    except DataError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def import_csv(path: str | Path) -> Dataset:
    """Import ``writer_id,kind,seq,f0,...,f{K-1}`` rows.

    kind accepts 0/1 or the names 'genuine'/'skilled' (case-insensitive).
    """
    kind_names = {"0": 0, "1": 1, "genuine": 0, "skilled": 1}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty CSV") from None
        if len(header) < 4 or [h.strip() for h in header[:3]] != ["writer_id", "kind", "seq"]:
            raise FormatError(
                f"{path}: header must start with writer_id,kind,seq,f0,..."
            )
        dim = len(header) - 3
        expected = [f"f{i}" for i in range(dim)]
        got = [h.strip() for h in header[3:]]
        if got != expected:
            raise FormatError(f"{path}: feature columns must be f0..f{dim - 1}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != dim + 3:
                raise FormatError(f"{path}:{lineno}: expected {dim + 3} fields, got {len(row)}")
            kind_key = row[1].strip().lower()
            if kind_key not in kind_names:
                raise FormatError(f"{path}:{lineno}: unknown kind {row[1]!r}")
            try:
                writer = int(row[0])
                seq = int(row[2])
                feats = np.array([float(v) for v in row[3:]], dtype=np.float64)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if not np.all(np.isfinite(feats)):
                raise FormatError(f"{path}:{lineno}: non-finite feature value")
            records.append(
                SignatureRecord(writer, SignatureKind(kind_names[kind_key]), seq, feats)
            )
    if not records:
        raise FormatError(f"{path}: CSV has a header but no data rows")
    return Dataset(records)


def generate_synthetic(cfg: SynthConfig) -> Dataset:
    """Generate a synthetic dataset. Deterministic given cfg.seed.

    Each writer draws its own generator from mix(seed, TAG_WRITER, writer),
    so the records of writer i do not depend on writer_count.
    """
    cfg.validate()
    drift_rng = SplitMix64(mix(cfg.seed, TAG_DRIFT))
    drift_direction = cfg.drift_velocity_sigma * np.array(drift_rng.normals(cfg.dim))
    records: list[SignatureRecord] = []
    for writer in range(cfg.writer_count):
        rng = SplitMix64(mix(cfg.seed, TAG_WRITER, writer))
        mu = np.array(rng.normals(cfg.dim))
        direction = np.array(rng.normals(cfg.dim))
        norm = math.sqrt(float(direction @ direction))
        if norm == 0.0:
            direction[0] = 1.0
            norm = 1.0
        offset = cfg.skilled_offset_scale * direction / norm
        velocity = abs(rng.gauss()) * drift_direction
        for seq in range(cfg.genuine_per_writer):
            noise = cfg.genuine_noise_sigma * np.array(rng.normals(cfg.dim))
            records.append(
                SignatureRecord(
                    writer, SignatureKind.GENUINE, seq, mu + seq * velocity + noise
                )
            )
        for seq in range(cfg.skilled_per_writer):
            noise = cfg.skilled_noise_sigma * np.array(rng.normals(cfg.dim))
            records.append(
                SignatureRecord(
                    writer,
                    SignatureKind.SKILLED,
                    seq,
                    mu + seq * velocity + offset + noise,
                )
            )
    return Dataset(records, dim=cfg.dim)


def _exploit_eligible(dataset: Dataset, writer: int, cfg: SplitConfig) -> bool:
    return (
        dataset.count_of(writer, SignatureKind.GENUINE)
        >= cfg.refs_per_user + cfg.claims_per_user
        and dataset.count_of(writer, SignatureKind.SKILLED) >= cfg.claims_per_user
    )


def _dev_eligible(dataset: Dataset, writer: int, cfg: SplitConfig) -> bool:
    return dataset.count_of(writer, SignatureKind.GENUINE) >= cfg.dev_genuine_per_user


def split_users(dataset: Dataset, cfg: SplitConfig) -> tuple[frozenset[int], frozenset[int]]:
    """Partition writers into disjoint development and exploitation sets.

    Writers are shuffled with the config seed; exploitation users are
    assigned first because their availability requirement (references plus
    claims of every kind) is the stricter one.
    """
    cfg.validate()
    ids = dataset.writers()
    if len(ids) < cfg.dev_user_count + cfg.exploit_user_count:
        raise DataError(
            f"need {cfg.dev_user_count + cfg.exploit_user_count} writers, "
            f"dataset has {len(ids)}"
        )
    rng = SplitMix64(mix(cfg.seed, TAG_SPLIT))
    rng.shuffle(ids)

    exploit: list[int] = []
    rest: list[int] = []
    for w in ids:
        if len(exploit) < cfg.exploit_user_count and _exploit_eligible(dataset, w, cfg):
            exploit.append(w)
        else:
            rest.append(w)
    if len(exploit) < cfg.exploit_user_count:
        raise DataError(
            f"only {len(exploit)} writers have >= {cfg.refs_per_user + cfg.claims_per_user} "
            f"genuine and >= {cfg.claims_per_user} skilled signatures "
            f"({cfg.exploit_user_count} exploitation users requested)"
        )
    dev = [w for w in rest if _dev_eligible(dataset, w, cfg)][: cfg.dev_user_count]
    if len(dev) < cfg.dev_user_count:
        raise DataError(
            f"only {len(dev)} remaining writers have >= {cfg.dev_genuine_per_user} "
            f"genuine signatures ({cfg.dev_user_count} development users requested)"
        )
    return frozenset(dev), frozenset(exploit)
