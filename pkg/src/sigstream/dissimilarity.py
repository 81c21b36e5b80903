"""Dichotomy transformation and development / exploitation pair generation.

The dichotomy transformation maps a pair of feature vectors to their
elementwise absolute difference, turning writer identification into a
two-class problem: pairs from the same writer (positive) land near the
origin, pairs from different writers (negative) scatter.

Development pairs, per user with n selected genuine signatures (n even):

* positives: all n(n-1)/2 unordered genuine pairs;
* negatives: the first n-1 selected genuines, each paired with n/2 random
  forgeries (genuine records of other development users).

Both counts equal (n-1)n/2, so the set is balanced by construction.

Exploitation users get ``refs_per_user`` reference signatures plus
``claims_per_user`` claims of each kind (genuine, random forgery, skilled
forgery); dissimilarities against the references are materialized lazily by
the stream engine or by :meth:`ExploitSet.materialize_all`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ._rng import TAG_DEV, TAG_EXPLOIT, SplitMix64, mix
from .errors import DataError
from .featurestore import (
    Dataset,
    SignatureKind,
    SignatureRecord,
    SplitConfig,
    save_dataset,
)


class Label(Enum):
    POSITIVE = "+"
    NEGATIVE = "-"

    @property
    def y(self) -> int:
        return 1 if self is Label.POSITIVE else -1


class ClaimKind(Enum):
    GENUINE = "G"
    RANDOM_FORGERY = "RF"
    SKILLED_FORGERY = "SK"


def label_for(reference_writer: int, claimant_writer: int, kind: ClaimKind) -> Label:
    """Positive iff the claim is a genuine signature of the claimed writer."""
    if reference_writer == claimant_writer and kind is ClaimKind.GENUINE:
        return Label.POSITIVE
    return Label.NEGATIVE


@dataclass(frozen=True)
class SampleMeta:
    """Identity bookkeeping for one dissimilarity sample.

    claimant_writer is the writer who actually produced the claim record
    (for a random forgery that differs from the claimed identity);
    reference_writer is the claimed identity. chunk_index is -1 outside
    streams.
    """

    claimant_writer: int
    reference_writer: int
    claim_kind: ClaimKind
    reference_seq: int
    claim_seq: int
    chunk_index: int = -1


@dataclass(eq=False)
class DissimilaritySample:
    dvec: np.ndarray
    label: Label
    meta: SampleMeta


def dichotomy_transform(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """Elementwise absolute difference of two equal-dim vectors."""
    a = np.asarray(x1, dtype=np.float64)
    b = np.asarray(x2, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return np.abs(a - b)


# Established shorthand for the transformation in the verification literature.
dt = dichotomy_transform


class DevSet:
    """Balanced labeled dissimilarity samples for classifier training."""

    def __init__(self, samples: Iterable[DissimilaritySample]):
        self.samples = list(samples)
        if not self.samples:
            raise DataError("development set is empty")
        self._dim = int(self.samples[0].dvec.size)
        for s in self.samples:
            if s.dvec.size != self._dim:
                raise DataError("mixed dimensions in development set")
        if self.positives_count != self.negatives_count:
            raise DataError(
                f"unbalanced development set: {self.positives_count} positive "
                f"vs {self.negatives_count} negative"
            )

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def positives_count(self) -> int:
        return sum(1 for s in self.samples if s.label is Label.POSITIVE)

    @property
    def negatives_count(self) -> int:
        return sum(1 for s in self.samples if s.label is Label.NEGATIVE)

    def __len__(self) -> int:
        return len(self.samples)

    def features(self) -> np.ndarray:
        return np.stack([s.dvec for s in self.samples])

    def labels_pm1(self) -> np.ndarray:
        return np.array([s.label.y for s in self.samples], dtype=np.float64)

    def export(self, path: str | Path) -> None:
        """Write samples in the binary feature format, label in the kind byte.

        kind byte 0 = positive, 1 = negative; writer_id carries the claimed
        identity and seq_index a running per-(writer, label) counter, so the
        file round-trips through the dataset loader for training reuse.
        """
        counters: dict[tuple[int, int], int] = {}
        records = []
        for s in self.samples:
            kind = SignatureKind.GENUINE if s.label is Label.POSITIVE else SignatureKind.SKILLED
            key = (s.meta.reference_writer, int(kind))
            seq = counters.get(key, 0)
            counters[key] = seq + 1
            records.append(
                SignatureRecord(s.meta.reference_writer, kind, seq, s.dvec)
            )
        save_dataset(Dataset(records), path)


def gen_dev_set(dataset: Dataset, dev_users: Iterable[int], cfg: SplitConfig) -> DevSet:
    """Generate the balanced development set over the given users.

    Selection is seeded per user with mix(cfg.seed, TAG_DEV, user), so the
    result is independent of user iteration order.  Random forgeries for a
    user are drawn without replacement (with replacement only if the pool of
    other users' genuine records is smaller than the slot count).
    """
    cfg.validate()
    users = sorted(dev_users)
    if len(users) < 2:
        raise DataError("need at least 2 development users for random forgeries")
    n = cfg.dev_genuine_per_user

    genuine_by_user = {u: dataset.records_of(u, SignatureKind.GENUINE) for u in users}
    for u in users:
        if len(genuine_by_user[u]) < n:
            raise DataError(
                f"development user {u} has {len(genuine_by_user[u])} genuine "
                f"signatures, needs {n}"
            )

    samples: list[DissimilaritySample] = []
    for u in users:
        rng = SplitMix64(mix(cfg.seed, TAG_DEV, u))
        selected = rng.sample(genuine_by_user[u], n)

        for k in range(n - 1):
            for j in range(k + 1, n):
                samples.append(
                    DissimilaritySample(
                        dichotomy_transform(selected[k].features, selected[j].features),
                        Label.POSITIVE,
                        SampleMeta(u, u, ClaimKind.GENUINE,
                                   selected[k].seq_index, selected[j].seq_index),
                    )
                )

        pool = [rec for other in users if other != u for rec in genuine_by_user[other]]
        slots = n // 2
        if len(pool) >= slots:
            forgeries = rng.sample(pool, slots)
        else:
            forgeries = [rng.choice(pool) for _ in range(slots)]
        for k in range(n - 1):
            for rf in forgeries:
                samples.append(
                    DissimilaritySample(
                        dichotomy_transform(selected[k].features, rf.features),
                        Label.NEGATIVE,
                        SampleMeta(rf.writer_id, u, ClaimKind.RANDOM_FORGERY,
                                   selected[k].seq_index, rf.seq_index),
                    )
                )
    return DevSet(samples)


@dataclass
class UserExploit:
    """References and per-kind claim sequences for one exploitation user.

    Claim lists are aligned: index j-1 of each list is that user's claim for
    stream chunk j.
    """

    user_id: int
    references: list[SignatureRecord]
    claims: dict[ClaimKind, list[SignatureRecord]] = field(default_factory=dict)

    def reference_matrix(self) -> np.ndarray:
        return np.stack([r.features for r in self.references])


class ExploitSet:
    def __init__(self, users: list[UserExploit], claims_per_user: int):
        if not users:
            raise DataError("exploitation set has no users")
        self.users = sorted(users, key=lambda u: u.user_id)
        self.claims_per_user = claims_per_user
        self._dim = self.users[0].references[0].dim

    @property
    def dim(self) -> int:
        return self._dim

    def user(self, user_id: int) -> UserExploit:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise DataError(f"unknown exploitation user {user_id}")

    def iter_claims(self) -> Iterator[tuple[UserExploit, ClaimKind, int, SignatureRecord]]:
        """All claims in canonical (user, chunk, kind) order."""
        for u in self.users:
            for j in range(self.claims_per_user):
                for kind in ClaimKind:
                    yield u, kind, j + 1, u.claims[kind][j]

    def materialize_all(self) -> list[DissimilaritySample]:
        """Every reference-claim dissimilarity: users x refs x claims x 3 kinds."""
        out: list[DissimilaritySample] = []
        for u, kind, _j, claim in self.iter_claims():
            for ref in u.references:
                out.append(_claim_sample(u.user_id, ref, claim, kind))
        return out


def _claim_sample(
    claimed_user: int,
    ref: SignatureRecord,
    claim: SignatureRecord,
    kind: ClaimKind,
    chunk_index: int = -1,
) -> DissimilaritySample:
    meta = SampleMeta(
        claim.writer_id, claimed_user, kind, ref.seq_index, claim.seq_index, chunk_index
    )
    return DissimilaritySample(
        dichotomy_transform(ref.features, claim.features),
        label_for(meta.reference_writer, meta.claimant_writer, kind),
        meta,
    )


def gen_exploit_set(
    dataset: Dataset, exploit_users: Iterable[int], cfg: SplitConfig
) -> ExploitSet:
    """Select references and claims for each exploitation user.

    refs_per_user + claims_per_user genuine records are sampled per user and
    ordered by sequence index; the earliest become the enrolled references
    and the rest arrive as genuine claims in order, which preserves any
    temporal drift present in the data.  Skilled-forgery claims follow the
    same rule (up to refs_per_user + claims_per_user sampled, the most
    recent claims_per_user kept), so at any stream position the genuine and
    skilled claims sit at comparable signature epochs.  Random-forgery
    claims are genuine records of other exploitation users, drawn without
    replacement where possible.
    """
    cfg.validate()
    users = sorted(exploit_users)
    if len(users) < 2:
        raise DataError("need at least 2 exploitation users for random forgeries")

    genuine_by_user = {u: dataset.records_of(u, SignatureKind.GENUINE) for u in users}
    out: list[UserExploit] = []
    for u in users:
        rng = SplitMix64(mix(cfg.seed, TAG_EXPLOIT, u))
        gs = genuine_by_user[u]
        need = cfg.refs_per_user + cfg.claims_per_user
        if len(gs) < need:
            raise DataError(f"user {u} has {len(gs)} genuine signatures, needs {need}")
        sks = dataset.records_of(u, SignatureKind.SKILLED)
        if len(sks) < cfg.claims_per_user:
            raise DataError(
                f"user {u} has {len(sks)} skilled forgeries, needs {cfg.claims_per_user}"
            )

        chosen = sorted(rng.sample(gs, need), key=lambda r: r.seq_index)
        refs = chosen[: cfg.refs_per_user]
        g_claims = chosen[cfg.refs_per_user :]
        sk_pool = sorted(rng.sample(sks, min(len(sks), need)), key=lambda r: r.seq_index)
        sk_claims = sk_pool[len(sk_pool) - cfg.claims_per_user :]

        pool = [rec for other in users if other != u for rec in genuine_by_user[other]]
        if len(pool) >= cfg.claims_per_user:
            rf_claims = rng.sample(pool, cfg.claims_per_user)
        else:
            rf_claims = [rng.choice(pool) for _ in range(cfg.claims_per_user)]

        out.append(
            UserExploit(
                u,
                refs,
                {
                    ClaimKind.GENUINE: g_claims,
                    ClaimKind.RANDOM_FORGERY: rf_claims,
                    ClaimKind.SKILLED_FORGERY: sk_claims,
                },
            )
        )
    return ExploitSet(out, cfg.claims_per_user)
