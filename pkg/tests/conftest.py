import numpy as np
import pytest

from app.models.geometry import BoundingBox
from app.models.tracking import Detection, FrameInput
from app.services.synth_service import SynthService, crossing_spec, occlusion_reappear_spec
from app.utils.kalman_filter import KalmanFilter


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def kf():
    return KalmanFilter()


def random_box(rng, lo=0.0, hi=500.0, min_size=1.0, max_size=200.0) -> BoundingBox:
    x, y = rng.uniform(lo, hi, size=2)
    w, h = rng.uniform(min_size, max_size, size=2)
    return BoundingBox(float(x), float(y), float(w), float(h))


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def linear_sequence(num_frames=20, start=(100.0, 50.0), velocity=(3.0, 1.0), size=(40.0, 80.0), score=0.9, emb=None):
    """One detection per frame moving at constant velocity."""
    emb = unit([1.0, 0.0, 0.0, 0.0]) if emb is None else emb
    frames = []
    for f in range(1, num_frames + 1):
        x = start[0] + velocity[0] * (f - 1)
        y = start[1] + velocity[1] * (f - 1)
        frames.append(FrameInput(frame=f, detections=[Detection(BoundingBox(x, y, *size), score, emb.copy())]))
    return frames


@pytest.fixture(scope="session")
def crossing_scenario():
    return SynthService().generate(crossing_spec(seed=7))


@pytest.fixture(scope="session")
def occlusion_scenario():
    return SynthService().generate(occlusion_reappear_spec())
