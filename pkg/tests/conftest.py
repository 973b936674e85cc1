import os

# keep BLAS reductions single-threaded before numpy spins up its pools;
# small-matrix GEMM is faster that way and results are run-reproducible
os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import numpy as np
import pytest

from vibrodiag.net.config import ModelConfig
from vibrodiag.net.model import init_params
from vibrodiag.optim.trainer import TrainExample, collate
from vibrodiag.textcodec import build_prompt, target_mask


@pytest.fixture(scope="session")
def toy_params():
    return init_params(ModelConfig(), seed=1)


def make_batch(cfg: ModelConfig, texts, frames=49, seed=0):
    """Small collated batch with random mels for loss/gradient tests."""
    rng = np.random.default_rng(seed)
    n_audio = -(-frames // cfg.audio_downsample)
    examples = []
    for text in texts:
        ids = build_prompt(text, n_audio, "what is the bearing fault condition?")
        examples.append(
            TrainExample(
                mel=rng.standard_normal((frames, cfg.mel_bins)).astype(np.float32),
                tokens=np.asarray(ids, dtype=np.int64),
                mask=np.asarray(target_mask(ids), dtype=bool),
            )
        )
    return collate(examples)
