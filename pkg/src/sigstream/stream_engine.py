"""Signature stream construction and prequential (test-then-train) evaluation.

The exploitation set becomes a stream of chunks: chunk j carries, for every
exploitation user, that user's j-th genuine, random-forgery and
skilled-forgery claims, in a seeded arrival order.  Every claim is first
scored against the model version current at its arrival (max fusion over
the user's references); once ``c_size`` claims have been tested, the model
is updated with the dissimilarities of the tested genuine and
random-forgery claims.  Skilled forgeries are never used for updates, and
genuine/random blocks are consumed pairwise so every update batch is
exactly class-balanced.

Updates are a barrier: no claim is scored against a partially applied
update, and a claim's own dissimilarities can only enter updates that
produce a strictly later model version.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import TAG_CHUNK, TAG_MIXED, TAG_UPDATE, SplitMix64, mix
from .dissimilarity import ClaimKind, ExploitSet, Label, label_for
from .errors import DataError
from .evaluation import fuse_max
from .featurestore import SignatureRecord

EVENT_LOG_HEADER = ["position", "chunk", "user", "kind", "score", "label", "model_version"]


@dataclass(frozen=True)
class ChunkEntry:
    user_id: int
    kind: ClaimKind
    record: SignatureRecord


@dataclass
class StreamChunk:
    index: int
    entries: list[ChunkEntry]
    source: int = 0


@dataclass
class VerificationEvent:
    position: int
    chunk_index: int
    user_id: int
    kind: ClaimKind
    score: float
    label: Label
    model_version: int


@dataclass(frozen=True)
class StreamEvalConfig:
    """Chunking and windowing hyperparameters for one stream run."""

    c_size: int
    w_size: int
    w_step: int
    run_count: int = 5
    seed: int = 0

    def validate(self) -> None:
        if self.c_size < 1 or self.w_size < 1 or self.w_step < 1:
            raise DataError("c_size, w_size and w_step must be >= 1")
        if self.w_step > self.w_size:
            raise DataError("w_step must be <= w_size")
        if self.run_count < 1:
            raise DataError("run_count must be >= 1")


def build_stream(exploit: ExploitSet, seed: int) -> list[StreamChunk]:
    """One chunk per claim index; within-chunk arrival order is seeded."""
    chunks: list[StreamChunk] = []
    for j in range(1, exploit.claims_per_user + 1):
        entries = [
            ChunkEntry(u.user_id, kind, u.claims[kind][j - 1])
            for u in exploit.users
            for kind in ClaimKind
        ]
        SplitMix64(mix(seed, TAG_CHUNK, j)).shuffle(entries)
        chunks.append(StreamChunk(j, entries))
    return chunks


def mixed_stream(streams: Sequence[list[StreamChunk]], seed: int) -> list[StreamChunk]:
    """Interleave chunk lists, preserving per-source order.

    At each draw a source is chosen with probability proportional to its
    remaining chunk count.  Output chunks are re-indexed sequentially and
    tagged with their source position.
    """
    if not streams:
        raise DataError("mixed_stream needs at least one source stream")
    dims = set()
    for chunks in streams:
        for chunk in chunks:
            if chunk.entries:
                dims.add(chunk.entries[0].record.dim)
                break
    if len(dims) > 1:
        raise DataError(f"source streams have mixed feature dims: {sorted(dims)}")
    rng = SplitMix64(mix(seed, TAG_MIXED))
    cursors = [0] * len(streams)
    total = sum(len(s) for s in streams)
    out: list[StreamChunk] = []
    for position in range(1, total + 1):
        remaining = [len(s) - c for s, c in zip(streams, cursors)]
        pick = rng.randrange(sum(remaining))
        for src, count in enumerate(remaining):
            if pick < count:
                break
            pick -= count
        chunk = streams[src][cursors[src]]
        cursors[src] += 1
        out.append(StreamChunk(position, list(chunk.entries), source=src))
    return out


def claim_dissimilarities(refs_matrix: np.ndarray, claim: np.ndarray) -> np.ndarray:
    """Dissimilarity of the claim against every reference row."""
    if refs_matrix.ndim != 2 or refs_matrix.shape[0] == 0:
        raise DataError("reference set must be a non-empty 2-D array")
    return np.abs(refs_matrix - np.asarray(claim, dtype=np.float64))


def verify_claim(
    model,
    refs: Sequence[SignatureRecord],
    claim: SignatureRecord,
    claimed_user: int,
    *,
    position: int = 0,
    chunk_index: int = -1,
    model_version: int = 0,
    kind: ClaimKind = ClaimKind.GENUINE,
) -> VerificationEvent:
    """Score one claim: per-reference dissimilarities, then max fusion.

    This is the prequential test step for a single verification request.
    """
    if not refs:
        raise DataError("claim verification needs at least one reference")
    refs_matrix = np.stack([r.features for r in refs])
    dvecs = claim_dissimilarities(refs_matrix, claim.features)
    fused = fuse_max(model.decision_batch(dvecs).tolist())
    return VerificationEvent(
        position, chunk_index, claimed_user, kind, fused,
        label_for(claimed_user, claim.writer_id, kind), model_version,
    )


@dataclass
class UpdateRecord:
    """Audit row for one model update."""

    version_produced: int
    positions: list[int]
    n_positive: int
    n_negative: int


@dataclass
class StreamRunResult:
    events: list[VerificationEvent]
    updates: list[UpdateRecord] = field(default_factory=list)
    snapshots: list[tuple[int, object]] = field(default_factory=list)

    @property
    def version_count(self) -> int:
        return 1 + len(self.updates)


def prequential_run(
    stream: Sequence[StreamChunk],
    exploit: ExploitSet,
    model,
    cfg: StreamEvalConfig,
    *,
    adapt: bool = True,
    snapshot_retention: int = 0,
) -> StreamRunResult:
    """Run the test-then-train loop over the stream.

    With adapt=False the model is never touched and scores equal a batch
    evaluation of the same claims (same code path, bitwise).  With
    adapt=True the model must expose ``partial_fit``; updates fire each
    time ``c_size`` claims have been tested since the previous update, and
    consume pending genuine/random-forgery dissimilarity blocks pairwise
    (surplus blocks of either polarity wait for the next update, keeping
    every batch balanced).
    """
    cfg.validate()
    if adapt and not hasattr(model, "partial_fit"):
        raise DataError(
            f"adaptive run requires a model with partial_fit, got {type(model).__name__}"
        )
    refs = {u.user_id: u.reference_matrix() for u in exploit.users}

    events: list[VerificationEvent] = []
    updates: list[UpdateRecord] = []
    snapshots: list[tuple[int, object]] = []
    pending_pos: list[tuple[int, np.ndarray]] = []
    pending_neg: list[tuple[int, np.ndarray]] = []
    version = 0
    tested_since_update = 0
    position = 0

    for chunk in stream:
        for entry in chunk.entries:
            ref_matrix = refs.get(entry.user_id)
            if ref_matrix is None:
                raise DataError(f"claim for unknown exploitation user {entry.user_id}")
            dvecs = claim_dissimilarities(ref_matrix, entry.record.features)
            fused = fuse_max(model.decision_batch(dvecs).tolist())
            events.append(
                VerificationEvent(
                    position, chunk.index, entry.user_id, entry.kind, fused,
                    label_for(entry.user_id, entry.record.writer_id, entry.kind),
                    version,
                )
            )
            if adapt:
                if entry.kind is ClaimKind.GENUINE:
                    pending_pos.append((position, dvecs))
                elif entry.kind is ClaimKind.RANDOM_FORGERY:
                    pending_neg.append((position, dvecs))
            position += 1
            tested_since_update += 1

            if adapt and tested_since_update >= cfg.c_size:
                tested_since_update = 0
                pairs = min(len(pending_pos), len(pending_neg))
                if pairs == 0:
                    continue
                pos_blocks = pending_pos[:pairs]
                neg_blocks = pending_neg[:pairs]
                del pending_pos[:pairs]
                del pending_neg[:pairs]
                X = np.vstack([b for _, b in pos_blocks] + [b for _, b in neg_blocks])
                n_pos = sum(b.shape[0] for _, b in pos_blocks)
                n_neg = sum(b.shape[0] for _, b in neg_blocks)
                y = np.concatenate((np.ones(n_pos), -np.ones(n_neg)))
                model.partial_fit(X, y, seed=mix(cfg.seed, TAG_UPDATE, version))
                version += 1
                updates.append(
                    UpdateRecord(
                        version,
                        [p for p, _ in pos_blocks] + [p for p, _ in neg_blocks],
                        n_pos,
                        n_neg,
                    )
                )
                if snapshot_retention > 0:
                    snapshots.append((version, model.clone()))
                    if len(snapshots) > snapshot_retention:
                        snapshots.pop(0)

    return StreamRunResult(events, updates, snapshots)


def batch_score(model, exploit: ExploitSet) -> list[VerificationEvent]:
    """Score every exploitation claim with a frozen model.

    Claims are visited in the canonical (user, chunk, kind) order; the
    scoring path is the one the stream engine uses, so a static-policy
    stream run over the same claims produces identical scores.
    """
    refs = {u.user_id: u.reference_matrix() for u in exploit.users}
    events = []
    for position, (u, kind, j, claim) in enumerate(exploit.iter_claims()):
        dvecs = claim_dissimilarities(refs[u.user_id], claim.features)
        fused = fuse_max(model.decision_batch(dvecs).tolist())
        events.append(
            VerificationEvent(
                position, j, u.user_id, kind, fused,
                label_for(u.user_id, claim.writer_id, kind), 0,
            )
        )
    return events


def write_event_log(events: Sequence[VerificationEvent], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_LOG_HEADER)
        for e in events:
            writer.writerow(
                [e.position, e.chunk_index, e.user_id, e.kind.value,
                 repr(e.score), e.label.value, e.model_version]
            )


def read_event_log(path: str | Path) -> list[VerificationEvent]:
    kinds = {k.value: k for k in ClaimKind}
    labels = {l.value: l for l in Label}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EVENT_LOG_HEADER:
            raise DataError(f"{path}: unexpected event log header {header}")
        events = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EVENT_LOG_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(EVENT_LOG_HEADER)} fields")
            if row[3] not in kinds or row[5] not in labels:
                raise DataError(f"{path}:{lineno}: unknown kind or label")
            events.append(
                VerificationEvent(
                    int(row[0]), int(row[1]), int(row[2]), kinds[row[3]],
                    float(row[4]), labels[row[5]], int(row[6]),
                )
            )
    return events
