from pathlib import Path

import numpy as np
import pytest
from PIL import Image

DATA = Path(__file__).parent / "data"
IMAGES = ("cameraman", "barbara", "camera", "astronaut", "coins")


def load_image(name):
    return np.asarray(Image.open(DATA / f"{name}.png"), dtype=float)


@pytest.fixture(scope="session")
def cameraman():
    return load_image("cameraman")
