import numpy as np
import pytest

from data.dataset import SyntheticSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_blobs():
    """40 points around (-2, 0) and (2, 0)."""
    gen = np.random.default_rng(7)
    left = gen.normal([-2.0, 0.0], 0.3, size=(20, 2))
    right = gen.normal([2.0, 0.0], 0.3, size=(20, 2))
    return np.vstack([left, right])


@pytest.fixture
def three_blobs():
    gen = np.random.default_rng(11)
    centers = np.array([[-4.0, 0.0], [0.0, 4.0], [4.0, 0.0]])
    return np.vstack([gen.normal(c, 0.4, size=(25, 2)) for c in centers])


@pytest.fixture
def small_synthetic():
    """20-point, two-blob synthetic spec."""
    return SyntheticSpec(
        blob_count=2,
        points_per_blob=10,
        blob_centers=[[-2.0, 0.0], [2.0, 0.0]],
        blob_stds=[0.5, 0.5],
        seed=3,
    )


@pytest.fixture
def write_csv(tmp_path):
    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
