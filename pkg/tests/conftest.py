import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sstd.features import FeatureMatrix
from sstd.synth import SynthSpec, generate


def random_features(rng: np.random.Generator, n_frames: int, dim: int, name: str = "") -> FeatureMatrix:
    return FeatureMatrix(rng.standard_normal((n_frames, dim)), 0.01, 0.025, name)


@pytest.fixture(scope="session")
def noiseless_corpus(tmp_path_factory):
    """Small zero-noise synthetic corpus shared across tests."""
    out = tmp_path_factory.mktemp("noiseless")
    spec = SynthSpec(lexicon_size=12, utterance_count=40, seed=123)
    return spec, generate(spec, out)
