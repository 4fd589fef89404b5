"""Seed derivation and stream splitting.

Every random draw in the package comes from a PCG64 generator seeded through
``numpy.random.SeedSequence`` with an entropy tuple ``(root_seed, *stream_ids)``.
The stream ids are small integers naming the consumer (a domain constant plus
per-item indices), so any item of any pipeline stage can be regenerated in
isolation and the result is independent of generation order or parallelism.
"""

from __future__ import annotations

import numpy as np

# Domain constants; never renumber, they are part of the reproducibility
# contract of saved datasets and models.
DOMAIN_PURE = 1        # band jitter of a pure spectrum
DOMAIN_DISTORTION = 2  # distortion parameter draws
DOMAIN_NOISE = 3       # additive measurement noise
DOMAIN_PRETRAIN = 4    # autoencoder layer training (init + shuffling)
DOMAIN_FINETUNE = 5    # regression finetuning (init + shuffling)
DOMAIN_DROPOUT = 6     # MC-dropout masks


def stream(root_seed: int, *stream_ids: int) -> np.random.Generator:
    """Return the PCG64 generator for the named stream."""
    entropy = (int(root_seed),) + tuple(int(i) for i in stream_ids)
    return np.random.default_rng(np.random.SeedSequence(entropy))
