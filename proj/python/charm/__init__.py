"""Attention-steerable toy text-to-image engine."""

from ._core import (
    Catalog,
    CharmError,
    Engine,
    Service,
    decode_png,
    encode_png,
    mine,
    refine,
    ssim,
    tokenize,
)

__all__ = [
    "Catalog",
    "CharmError",
    "Engine",
    "Service",
    "decode_png",
    "encode_png",
    "mine",
    "refine",
    "ssim",
    "tokenize",
]
