from __future__ import annotations

import json
import shutil
import subprocess
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).parents[2]
VECTORS_PATH = REPO_ROOT / "tests" / "vectors" / "normalization_vectors.json"


def perioseed_cli(*args: str) -> subprocess.CompletedProcess:
    """Invoke the primary pipeline's CLI; the only way this package uses it."""
    exe = shutil.which("perioseed")
    if exe is None:
        pytest.skip("perioseed CLI not installed")
    return subprocess.run([exe, *args], capture_output=True, text=True)


@pytest.fixture(scope="session")
def normalization_vectors() -> list[dict]:
    with open(VECTORS_PATH, encoding="utf-8") as fh:
        return json.load(fh)["cases"]


@pytest.fixture(scope="session")
def seed_run(tmp_path_factory) -> dict:
    """Synthetic corpus + oracle-backend seed files, produced via the CLI."""
    root = tmp_path_factory.mktemp("seedrun")
    synth = perioseed_cli("synth", "--notes", "400", "--seed", "21",
                          "--out", str(root / "data"))
    assert synth.returncode == 0, synth.stderr
    seed = perioseed_cli(
        "seed", "--corpus", str(root / "data" / "notes.jsonl"),
        "--out", str(root / "run"), "--sample-size", "15", "--ratio", "1/4",
        "--seed", "7", "--backend", "mock",
    )
    assert seed.returncode == 0, seed.stderr
    counts = json.loads(seed.stdout.strip().splitlines()[-1])
    return {
        "root": root,
        "train": root / "run" / "train.json",
        "dev": root / "run" / "dev.json",
        "counts": counts,
    }
