"""Data model, feature/annotation ingestion, the synthetic biased benchmark,
and temporal-distribution diagnostics.

A sample is one (video features, token sequence, start/end annotation)
triple. Video features arrive as pre-extracted clip-level vectors, either
from a binary feature file or from the synthetic generator, which plants a
per-action embedding inside the target moment and a background embedding
everywhere else. The generator draws training/val/test_iid moment starts
from a configurable normalized band and test_ood starts from its complement,
so location bias is built in by construction.
"""

from __future__ import annotations

import logging
import math
import string
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"VFEA"
FEATURE_VERSION = 1
SPLITS = ("train", "val", "test_iid", "test_ood")

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


class IngestError(ValueError):
    """Malformed feature file, annotation record, or vocabulary entry."""


class SyntheticConfigError(ValueError):
    """Synthetic generator configuration violates its invariants."""


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

@dataclass
class VideoFeatures:
    """Clip-level feature matrix of shape (T, d_in), finite float32."""

    clips: np.ndarray

    def __post_init__(self):
        clips = np.asarray(self.clips, dtype=np.float32)
        if clips.ndim != 2 or clips.shape[0] < 1 or clips.shape[1] < 1:
            raise ValueError(f"clips must be a (T, D) matrix with T, D >= 1, got shape {clips.shape}")
        if not np.isfinite(clips).all():
            raise ValueError("clip features must be finite")
        self.clips = clips

    @property
    def num_clips(self) -> int:
        return self.clips.shape[0]

    @property
    def d_in(self) -> int:
        return self.clips.shape[1]


@dataclass
class Query:
    """Tokenized text query; ids must resolve in the active vocabulary."""

    tokens: list[int]
    raw_text: str

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("query must have at least one token")

    @property
    def num_tokens(self) -> int:
        return len(self.tokens)

    def words(self) -> list[str]:
        return normalize_words(self.raw_text)


@dataclass
class Annotation:
    """Inclusive start/end clip indices of the target moment."""

    tau_s: int
    tau_e: int

    def __post_init__(self):
        if not (0 <= self.tau_s <= self.tau_e):
            raise ValueError(f"need 0 <= tau_s <= tau_e, got ({self.tau_s}, {self.tau_e})")

    @property
    def length(self) -> int:
        return self.tau_e - self.tau_s + 1


@dataclass
class Sample:
    id: str
    video: VideoFeatures
    query: Query
    annotation: Annotation
    split: str

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}, expected one of {SPLITS}")
        if self.annotation.tau_e > self.video.num_clips - 1:
            raise ValueError(
                f"sample {self.id}: annotation ({self.annotation.tau_s}, {self.annotation.tau_e}) "
                f"exceeds video length {self.video.num_clips}"
            )

    @property
    def start_fraction(self) -> float:
        return self.annotation.tau_s / self.video.num_clips


def normalize_words(text: str) -> list[str]:
    """Lowercased, punctuation-stripped whitespace tokens of a query string."""
    words = [w.translate(_PUNCT_TABLE) for w in text.lower().split()]
    return [w for w in words if w]


@dataclass
class Vocabulary:
    """Token string <-> id table; encoding an unknown token is an error."""

    tokens: list[str]

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        words = normalize_words(text)
        if not words:
            raise IngestError(f"query {text!r} has no tokens after normalization")
        try:
            return [self._index[w] for w in words]
        except KeyError as exc:
            raise IngestError(f"token {exc.args[0]!r} not in vocabulary") from None

    @staticmethod
    def from_texts(texts) -> "Vocabulary":
        seen = sorted({w for t in texts for w in normalize_words(t)})
        return Vocabulary(seen)

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    @staticmethod
    def load(path) -> "Vocabulary":
        lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if l]
        return Vocabulary(lines)


# ---------------------------------------------------------------------------
# Feature file format: "VFEA", version u32, T u32, D u32, then T*D f32 LE
# ---------------------------------------------------------------------------

def write_feature_file(path, features: VideoFeatures) -> None:
    arr = np.ascontiguousarray(features.clips, dtype="<f4")
    header = FEATURE_MAGIC + struct.pack("<III", FEATURE_VERSION, arr.shape[0], arr.shape[1])
    Path(path).write_bytes(header + arr.tobytes())


def load_feature_file(path) -> VideoFeatures:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 16:
        raise IngestError(f"{path}: header truncated at byte {len(data)} (need 16 bytes)")
    if data[:4] != FEATURE_MAGIC:
        raise IngestError(f"{path}: bad magic at byte 0, expected {FEATURE_MAGIC!r}")
    version, t, d = struct.unpack("<III", data[4:16])
    if version != FEATURE_VERSION:
        raise IngestError(f"{path}: unsupported version {version} at byte 4")
    if t < 1 or d < 1:
        raise IngestError(f"{path}: invalid dimensions T={t}, D={d} in header")
    expected = 16 + 4 * t * d
    if len(data) != expected:
        raise IngestError(
            f"{path}: payload truncated at byte {len(data)}, expected {expected} bytes for T={t}, D={d}"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=16).reshape(t, d)
    bad = np.flatnonzero(~np.isfinite(arr.ravel()))
    if bad.size:
        raise IngestError(f"{path}: non-finite value at byte {16 + 4 * int(bad[0])}")
    return VideoFeatures(arr.copy())


# ---------------------------------------------------------------------------
# Annotation ingestion (tab-separated: id, path, start_s, end_s, split, text)
# ---------------------------------------------------------------------------

@dataclass
class SampleStub:
    """One parsed annotation record; features not yet resolved."""

    id: str
    feature_path: str
    start_sec: float
    end_sec: float
    split: str
    text: str


def load_annotations(path) -> list[SampleStub]:
    path = Path(path)
    stubs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise IngestError(f"{path}:{lineno}: expected 6 tab-separated fields, got {len(fields)}")
        sid, fpath, start_s, end_s, split, text = fields
        if split not in SPLITS:
            raise IngestError(f"{path}:{lineno}: unknown split {split!r}")
        try:
            start, end = float(start_s), float(end_s)
        except ValueError:
            raise IngestError(f"{path}:{lineno}: unparsable start/end seconds") from None
        stubs.append(SampleStub(sid, fpath, start, end, split, text))
    return stubs


def seconds_to_clip_span(start_sec: float, end_sec: float, clip_duration: float, num_clips: int):
    """Map a [start, end] second annotation onto inclusive clip indices.

    Each endpoint lands in the clip that contains it, then both are clamped
    into [0, T-1]. Returns None when start ends up after end.
    """
    tau_s = math.floor(start_sec / clip_duration)
    tau_e = math.floor(end_sec / clip_duration)
    if tau_s > tau_e:
        return None
    tau_s = min(max(tau_s, 0), num_clips - 1)
    tau_e = min(max(tau_e, 0), num_clips - 1)
    return tau_s, tau_e


def resolve_samples(stubs, root_dir, vocab: Vocabulary, clip_duration: float = 1.0) -> list[Sample]:
    """Load features for each stub and convert seconds to clip indices.

    Records whose converted start exceeds their end are dropped with a
    warning; a missing feature file is an error.
    """
    root = Path(root_dir)
    samples = []
    for stub in stubs:
        fpath = root / stub.feature_path
        if not fpath.exists():
            raise IngestError(f"sample {stub.id}: feature file {fpath} not found")
        video = load_feature_file(fpath)
        span = seconds_to_clip_span(stub.start_sec, stub.end_sec, clip_duration, video.num_clips)
        if span is None:
            logger.warning(
                "sample %s: start %.3fs after end %.3fs, record rejected",
                stub.id, stub.start_sec, stub.end_sec,
            )
            continue
        query = Query(tokens=vocab.encode(stub.text), raw_text=stub.text)
        samples.append(Sample(stub.id, video, query, Annotation(*span), stub.split))
    return samples


# ---------------------------------------------------------------------------
# Synthetic biased benchmark
# ---------------------------------------------------------------------------

@dataclass
class SyntheticConfig:
    """Generator knobs for the synthetic location-biased dataset.

    ``bias_lo``/``bias_hi`` bound the normalized moment-start band used for
    train/val/test_iid; test_ood draws from the band's complement.
    """

    n_actions: int = 12
    d_feat: int = 16
    t_min: int = 20
    t_max: int = 32
    moment_len_min: int = 4
    moment_len_max: int = 8
    bias_lo: float = 0.0
    bias_hi: float = 0.3
    noise_sigma: float = 0.4
    n_train: int = 2000
    n_val: int = 400
    n_test_iid: int = 400
    n_test_ood: int = 400
    seed: int = 0

    def validate(self) -> None:
        if not (0.0 <= self.bias_lo < self.bias_hi <= 1.0):
            raise SyntheticConfigError(f"need 0 <= bias_lo < bias_hi <= 1, got ({self.bias_lo}, {self.bias_hi})")
        if self.bias_lo == 0.0 and self.bias_hi == 1.0:
            raise SyntheticConfigError("bias band covers [0, 1]; the OOD complement is empty")
        if not (1 <= self.t_min <= self.t_max):
            raise SyntheticConfigError(f"need 1 <= t_min <= t_max, got ({self.t_min}, {self.t_max})")
        if not (1 <= self.moment_len_min <= self.moment_len_max <= self.t_min):
            raise SyntheticConfigError(
                f"moment lengths ({self.moment_len_min}, {self.moment_len_max}) must fit in t_min={self.t_min}"
            )
        if self.n_actions < 1 or self.d_feat < 1:
            raise SyntheticConfigError("n_actions and d_feat must be positive")

    @property
    def bias_band(self) -> tuple[float, float]:
        return (self.bias_lo, self.bias_hi)


def action_embeddings(cfg: SyntheticConfig) -> np.ndarray:
    """Fixed unit-norm embedding per action, plus a background row at index 0."""
    rng = np.random.default_rng([cfg.seed, 0xE11B])
    vecs = rng.standard_normal((cfg.n_actions + 1, cfg.d_feat))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs


def synthetic_vocab(cfg: SyntheticConfig) -> Vocabulary:
    return Vocabulary(["person", "performs"] + [f"action{i}" for i in range(cfg.n_actions)])


def _valid_starts(num_clips: int, moment_len: int, lo: float, hi: float, ood: bool) -> np.ndarray:
    starts = np.arange(0, num_clips - moment_len + 1)
    frac = starts / num_clips
    in_band = (frac >= lo) & (frac < hi)
    return starts[~in_band] if ood else starts[in_band]


def generate_synthetic_dataset(cfg: SyntheticConfig) -> list[Sample]:
    """Deterministically generate samples for all four splits.

    Clip rows outside the moment carry the background embedding plus noise;
    rows inside carry the drawn action's embedding plus noise. The query
    names the action.
    """
    cfg.validate()
    emb = action_embeddings(cfg)
    vocab = synthetic_vocab(cfg)
    counts = {"train": cfg.n_train, "val": cfg.n_val, "test_iid": cfg.n_test_iid, "test_ood": cfg.n_test_ood}
    samples = []
    for split_idx, split in enumerate(SPLITS):
        rng = np.random.default_rng([cfg.seed, 101 + split_idx])
        ood = split == "test_ood"
        for i in range(counts[split]):
            for _ in range(1000):
                t = int(rng.integers(cfg.t_min, cfg.t_max + 1))
                m = int(rng.integers(cfg.moment_len_min, cfg.moment_len_max + 1))
                starts = _valid_starts(t, m, cfg.bias_lo, cfg.bias_hi, ood)
                if starts.size:
                    break
            else:
                raise SyntheticConfigError(
                    f"no feasible {'OOD' if ood else 'in-band'} moment start for band {cfg.bias_band} "
                    f"with lengths in [{cfg.t_min}, {cfg.t_max}]"
                )
            tau_s = int(rng.choice(starts))
            action = int(rng.integers(cfg.n_actions))
            feats = emb[0] + cfg.noise_sigma * rng.standard_normal((t, cfg.d_feat))
            feats[tau_s:tau_s + m] += emb[action + 1] - emb[0]
            text = f"person performs action{action}"
            samples.append(
                Sample(
                    id=f"{split}-{i:05d}",
                    video=VideoFeatures(feats.astype(np.float32)),
                    query=Query(vocab.encode(text), text),
                    annotation=Annotation(tau_s, tau_s + m - 1),
                    split=split,
                )
            )
    return samples


def split_samples(samples) -> dict[str, list[Sample]]:
    by_split = {s: [] for s in SPLITS}
    for sample in samples:
        by_split[sample.split].append(sample)
    return by_split


# ---------------------------------------------------------------------------
# Dataset directory layout: features/<id>.vfea + annotations.tsv + vocab.txt
# ---------------------------------------------------------------------------

def write_dataset(samples, vocab: Vocabulary, out_dir) -> None:
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    lines = []
    for s in samples:
        rel = f"features/{s.id}.vfea"
        write_feature_file(out / rel, s.video)
        lines.append(
            f"{s.id}\t{rel}\t{float(s.annotation.tau_s)}\t{float(s.annotation.tau_e)}\t{s.split}\t{s.query.raw_text}"
        )
    (out / "annotations.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    vocab.save(out / "vocab.txt")


def load_dataset(data_dir, clip_duration: float = 1.0) -> tuple[dict[str, list[Sample]], Vocabulary]:
    data_dir = Path(data_dir)
    ann = data_dir / "annotations.tsv"
    voc = data_dir / "vocab.txt"
    if not ann.exists():
        raise IngestError(f"{ann} not found")
    if not voc.exists():
        raise IngestError(f"{voc} not found")
    vocab = Vocabulary.load(voc)
    stubs = load_annotations(ann)
    samples = resolve_samples(stubs, data_dir, vocab, clip_duration)
    return split_samples(samples), vocab


# ---------------------------------------------------------------------------
# Temporal-distribution diagnostics
# ---------------------------------------------------------------------------

@dataclass
class TemporalHistogram:
    """Binned distribution of normalized moment-start locations."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1 or (counts < 0).any():
            raise ValueError("counts must be a non-empty vector of non-negative integers")
        self.counts = counts

    @property
    def bins(self) -> int:
        return int(self.counts.size)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def bin_index(fraction: float, bins: int) -> int:
    """floor(B * x), with x = 1.0 mapped into the last bin."""
    return min(int(math.floor(bins * fraction)), bins - 1)


def compute_temporal_distribution(samples, bins: int) -> TemporalHistogram:
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not samples:
        raise ValueError("samples must be non-empty")
    counts = np.zeros(bins, dtype=np.int64)
    for s in samples:
        counts[bin_index(s.start_fraction, bins)] += 1
    return TemporalHistogram(counts)


def distribution_entropy(hist: TemporalHistogram) -> float:
    """Shannon entropy (nats) of the normalized histogram; 0-count bins contribute 0."""
    total = hist.total
    if total == 0:
        raise ValueError("cannot take the entropy of an all-zero histogram")
    p = hist.counts[hist.counts > 0] / total
    return float(-(p * np.log(p)).sum())


def render_histogram(hist: TemporalHistogram, label: str = "") -> str:
    """Fixed-width text rendering used by the stats CLI."""
    total = max(hist.total, 1)
    width = 40
    lines = [f"{label} (n={hist.total}, entropy={distribution_entropy(hist):.4f} nats)" if hist.total else label]
    for b, count in enumerate(hist.counts):
        lo, hi = b / hist.bins, (b + 1) / hist.bins
        bar = "#" * round(width * count / total)
        lines.append(f"  [{lo:4.2f},{hi:4.2f}) {count:6d} {bar}")
    return "\n".join(lines)
