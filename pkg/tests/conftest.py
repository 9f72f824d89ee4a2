import numpy as np
import pytest

from mvdbench import synth
from mvdbench.plane_sweep import SweepConfig


@pytest.fixture(scope="session")
def plane_sample():
    """128x128 textured plane at 2 m, one other view 0.2 m to the side."""
    return synth.render(synth.plane_scene(depth=2.0, baseline=0.2, size=128, n_other=1))


@pytest.fixture(scope="session")
def plane_cfg():
    # 64 hypotheses over 1-4 m; 2 m is hypothesis 21 exactly
    return SweepConfig(1.0, 4.0, 64, 2)


@pytest.fixture(scope="session")
def small_plane_sample():
    return synth.render(synth.plane_scene(depth=2.0, baseline=0.2, size=48, n_other=2, focal=40.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
