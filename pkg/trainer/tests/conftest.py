import numpy as np
import pytest
import torch

import mswiener as mw
from mswiener.cli import main as engine_cli


@pytest.fixture(autouse=True)
def _fixed_seed():
    torch.manual_seed(0)
    np.random.seed(0)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory):
    """4-image dataset written by the engine's make-dataset verb."""
    base = tmp_path_factory.mktemp("tiny")
    clean_dir = base / "clean"
    clean_dir.mkdir()
    for i in range(3):
        mw.save_png(mw.make_test_image(1500 + i, 160), clean_dir / f"{i}.png")
    out = base / "ds"
    rc = engine_cli(
        ["make-dataset", str(clean_dir), "--out", str(out), "--count", "4",
         "--patch", "64", "--seed", "17", "--clamp"]
    )
    assert rc == 0
    return out
