from pathlib import Path

import pytest

from echoscope.config import load_config

TOY_DIR = Path(__file__).parent / "data" / "toy"
GOLDEN_DIR = Path(__file__).parent / "golden" / "toy"


@pytest.fixture
def toy_config(tmp_path):
    return load_config(TOY_DIR / "toy.yaml", overrides={"out_dir": tmp_path / "out"})


@pytest.fixture
def tree_bytes():
    """Map of relative path -> file bytes for a directory, for tree equality checks."""

    def collect(root: Path) -> dict[str, bytes]:
        root = Path(root)
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file()
        }

    return collect
