import os

# the desk-scale GEMMs are too small for a thread pool; pin before numpy loads
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import numpy as np
import pytest

from steernca import patterns, targets
from steernca.targets import AuxSpec, TargetPattern


@pytest.fixture(scope="session")
def pinwheel_png(tmp_path_factory):
    path = tmp_path_factory.mktemp("assets") / "pinwheel.png"
    patterns.save_rgba_png(path, patterns.pinwheel(24))
    return path


@pytest.fixture(scope="session")
def swirl_target():
    """Prepared chiral target for loss tests."""
    pat = TargetPattern(rgba=patterns.chiral_swirl(48))
    return targets.prepare_target(pat, AuxSpec("none"), sharpen_amount=1.0,
                                  radius_bins=None, angle_bins=128)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
