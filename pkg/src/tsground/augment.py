"""Diversified video-length augmentation: shortening and lengthening.

Shortening truncates randomly many clips before the moment start, pulling
the moment toward the video head and shrinking the video. Lengthening
prepends randomly many all-zero blank clips, pushing the moment toward the
tail and growing the video. Both keep the moment's feature rows bit-exact
and its length unchanged, so the pair (original, variant) differs only in
video duration and moment location.

Shortening is withheld from queries that carry long-range context terms
("again", "first", ...) because cutting their lead-in breaks the semantics;
blank padding is always safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Annotation, Query, Sample, VideoFeatures

DEFAULT_KEYWORDS = frozenset(
    {"first", "after", "before", "then", "again", "continue", "continues", "second", "finally"}
)


class AugmentError(ValueError):
    """Transform preconditions violated (ineligible sample or bad delta)."""


@dataclass
class AugmentConfig:
    beta_sv: int = 10           # minimum truncation length, clips
    beta_lv: int = 10           # minimum padding length, clips
    keyword_list: frozenset = DEFAULT_KEYWORDS
    enable_sv: bool = True
    enable_lv: bool = True

    def __post_init__(self):
        if self.beta_sv < 1 or self.beta_lv < 1:
            raise ValueError("beta_sv and beta_lv must be >= 1")
        self.keyword_list = frozenset(w.lower() for w in self.keyword_list)


@dataclass
class AugmentedSample:
    """A transformed sample plus the provenance linking it to its origin."""

    sample: Sample
    kind: str                   # "sv" or "lv"
    delta: int
    origin_id: str


def eligible_for_shortening(sample: Sample, cfg: AugmentConfig) -> bool:
    """True iff tau_s > beta_sv and the query has no guarded keyword."""
    if sample.annotation.tau_s <= cfg.beta_sv:
        return False
    return not any(w in cfg.keyword_list for w in sample.query.words())


def sample_truncation_length(tau_s: int, beta_sv: int, rng: np.random.Generator) -> int:
    """Integer uniform on [beta_sv, tau_s - 1].

    The upper end is exclusive of tau_s so at least one pre-moment clip
    survives and the shifted start stays >= 1.
    """
    if tau_s <= beta_sv:
        raise AugmentError(f"shortening needs tau_s > beta_sv, got tau_s={tau_s}, beta_sv={beta_sv}")
    return int(rng.integers(beta_sv, tau_s))


def sample_padding_length(tau_s: int, beta_lv: int, rng: np.random.Generator) -> int:
    """Integer uniform on [beta_lv, tau_s + beta_lv]."""
    return int(rng.integers(beta_lv, tau_s + beta_lv + 1))


def shorten_video(sample: Sample, delta: int, beta_sv: int) -> AugmentedSample:
    """Drop the first ``delta`` clips; the annotation shifts down by delta."""
    tau_s, tau_e = sample.annotation.tau_s, sample.annotation.tau_e
    if not (beta_sv <= delta < tau_s):
        raise AugmentError(f"need beta_sv <= delta < tau_s, got delta={delta}, beta_sv={beta_sv}, tau_s={tau_s}")
    clips = sample.video.clips[delta:].copy()
    shifted = Sample(
        id=f"{sample.id}#sv{delta}",
        video=VideoFeatures(clips),
        query=sample.query,
        annotation=Annotation(tau_s - delta, tau_e - delta),
        split=sample.split,
    )
    return AugmentedSample(shifted, "sv", delta, sample.id)


def lengthen_video(sample: Sample, delta: int, beta_lv: int) -> AugmentedSample:
    """Prepend ``delta`` all-zero clips; the annotation shifts up by delta."""
    if delta < beta_lv:
        raise AugmentError(f"need delta >= beta_lv, got delta={delta}, beta_lv={beta_lv}")
    tau_s, tau_e = sample.annotation.tau_s, sample.annotation.tau_e
    blank = np.zeros((delta, sample.video.d_in), dtype=np.float32)
    clips = np.concatenate([blank, sample.video.clips], axis=0)
    shifted = Sample(
        id=f"{sample.id}#lv{delta}",
        video=VideoFeatures(clips),
        query=sample.query,
        annotation=Annotation(tau_s + delta, tau_e + delta),
        split=sample.split,
    )
    return AugmentedSample(shifted, "lv", delta, sample.id)


def augment_batch(
    batch,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    t_max: int | None = None,
) -> list[tuple[Sample, list[AugmentedSample]]]:
    """Pair each sample with its freshly drawn variants.

    A shortening variant is emitted for eligible samples when enabled; a
    lengthening variant for every sample when enabled, except when the padded
    length would exceed ``t_max`` (skipped, not re-drawn).
    """
    pairs = []
    skipped_lv = 0
    for sample in batch:
        variants = []
        if cfg.enable_sv and eligible_for_shortening(sample, cfg):
            delta = sample_truncation_length(sample.annotation.tau_s, cfg.beta_sv, rng)
            variants.append(shorten_video(sample, delta, cfg.beta_sv))
        if cfg.enable_lv:
            delta = sample_padding_length(sample.annotation.tau_s, cfg.beta_lv, rng)
            if t_max is not None and sample.video.num_clips + delta > t_max:
                skipped_lv += 1
            else:
                variants.append(lengthen_video(sample, delta, cfg.beta_lv))
        pairs.append((sample, variants))
    if skipped_lv:
        logger_debug = __import__("logging").getLogger(__name__).debug
        logger_debug("lengthening skipped for %d/%d samples (t_max=%s)", skipped_lv, len(batch), t_max)
    return pairs
