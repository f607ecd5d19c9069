"""Deterministic RNG stream derivation.

Every random decision in the package draws from a Generator derived from
(base_seed, *tags) via SeedSequence, so any sample, fault draw, or weight
init can be reproduced in isolation and in any order.
"""

from __future__ import annotations

import numpy as np

# Stream tags. Fixed integers, never reordered, so that derived streams
# stay stable across versions.
TAG_WEIGHT_INIT = 1
TAG_SHUFFLE = 2
TAG_ENCODE = 3
TAG_FAULT = 4
TAG_ASTRO_INPUT = 5
TAG_ASTRO_FAULT = 6


def derive_rng(base_seed: int, *tags: int) -> np.random.Generator:
    """Return a Generator for the stream identified by (base_seed, *tags)."""
    entropy = [int(base_seed)] + [int(t) for t in tags]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def encode_rng(base_seed: int, sample_index: int, presentation: int = 0) -> np.random.Generator:
    """Stream for encoding one sample.

    presentation distinguishes re-presentations of the same image
    (epoch number during training, retry attempt during evaluation) so
    each presentation gets fresh spike noise while remaining reproducible
    in any order.
    """
    return derive_rng(base_seed, TAG_ENCODE, sample_index, presentation)
