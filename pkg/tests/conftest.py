import numpy as np
import pytest

from streetscape.mask import CanonicalClass, LabelMask

CANONICAL = [int(c) for c in CanonicalClass]


def random_mask(rng, h, w, ids=CANONICAL):
    return LabelMask(rng.choice(np.array(ids, dtype=np.uint8), size=(h, w)))


def random_image(rng, h, w):
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


@pytest.fixture
def rng():
    return np.random.default_rng(20230817)
