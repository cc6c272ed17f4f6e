"""Multimodal data curation and token budgeting."""

from ._capypipe import (
    FormatError,
    IoError,
    ValidationError,
    audio_budget,
    audio_profile,
    bleu,
    cer,
    compress_tokens,
    filter_manifest,
    flatten_with_row_breaks,
    image_budget,
    image_layout,
    interpolate_pos_embed,
    jaccard_shingles,
    log_mel,
    main,
    ngram_cosine,
    normalize_text,
    plan_tiles,
    resample_16k,
    resize_geometry,
    schedule,
    video_budget,
    wer,
)

__all__ = [
    "FormatError",
    "IoError",
    "ValidationError",
    "audio_budget",
    "audio_profile",
    "bleu",
    "cer",
    "compress_tokens",
    "filter_manifest",
    "flatten_with_row_breaks",
    "image_budget",
    "image_layout",
    "interpolate_pos_embed",
    "jaccard_shingles",
    "log_mel",
    "main",
    "ngram_cosine",
    "normalize_text",
    "plan_tiles",
    "resample_16k",
    "resize_geometry",
    "schedule",
    "video_budget",
    "wer",
]
