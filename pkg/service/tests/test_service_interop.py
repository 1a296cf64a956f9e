"""End-to-end interoperation with the analysis pipeline's remote client.

Runs this service under uvicorn on a loopback port and points the real
pipeline at it: remote embeddings and stances must reproduce, byte for byte,
the golden output tree the pipeline produces with its in-process provider.
Only the run summary may differ, and only in the fields that name the
provider.
"""

import json
import threading
import time
from pathlib import Path

import numpy as np
import pytest
import uvicorn

from echoscope.config import load_config
from echoscope.pipeline import run_pipeline
from echoscope.providers import MockProvider, RemoteProvider, StanceItem

from nlp_provider_service import HashEncoder, MarkerStance, create_app

PRIMARY_ROOT = Path(__file__).resolve().parents[2]
TOY_YAML = PRIMARY_ROOT / "tests" / "data" / "toy" / "toy.yaml"
GOLDEN_DIR = PRIMARY_ROOT / "tests" / "golden" / "toy"

DIM = 16  # matches the toy config


@pytest.fixture(scope="module")
def base_url():
    app = create_app(HashEncoder(dim=DIM), stance=MarkerStance(), max_batch=256)
    server = uvicorn.Server(
        uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    )
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 15
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("uvicorn did not start")
        time.sleep(0.02)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=10)


def tree_files(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_health_advertises_configured_dim(base_url):
    provider = RemoteProvider(base_url, dim=DIM)
    try:
        health = provider.health()
    finally:
        provider.close()
    assert health["status"] == "ok"
    assert health["dim"] == DIM


def test_remote_embeddings_match_in_process_provider(base_url):
    texts = ["solar farms expand", "AGREE: valid point", "étude 漢字", "x" * 200]
    remote = RemoteProvider(base_url, dim=DIM)
    try:
        got = remote.embed_texts(texts)
    finally:
        remote.close()
    want = MockProvider(dim=DIM).embed_texts(texts)
    assert np.array_equal(got, want)


def test_remote_stances_match_in_process_provider(base_url):
    items = [
        StanceItem(post="p", parent="p", comment="AGREE: yes"),
        StanceItem(post="p", parent="q", comment="DISAGREE: no"),
        StanceItem(post="p", parent="q", comment="whatever"),
    ]
    remote = RemoteProvider(base_url, dim=DIM)
    try:
        got = remote.detect_stances(items)
    finally:
        remote.close()
    assert got == MockProvider(dim=DIM).detect_stances(items)


def test_full_run_reproduces_golden_tree(base_url, tmp_path):
    cfg = load_config(
        TOY_YAML,
        overrides={
            "out_dir": str(tmp_path / "out"),
            "provider": "remote",
            "remote_url": base_url,
        },
    )
    summary = run_pipeline(cfg)
    assert summary["provider"] == "remote"

    got = tree_files(tmp_path / "out")
    want = tree_files(GOLDEN_DIR)
    assert sorted(got) == sorted(want)
    for name in want:
        if name == "run_summary.json":
            continue
        assert got[name] == want[name], f"{name} diverged from golden output"

    got_summary = json.loads(got["run_summary.json"])
    want_summary = json.loads(want["run_summary.json"])
    assert got_summary.pop("provider") == "remote"
    assert want_summary.pop("provider") == "mock"
    # the config hash covers the provider kind, so it legitimately differs
    assert got_summary.pop("config_hash") == cfg.semantic_hash()
    want_summary.pop("config_hash")
    assert got_summary == want_summary
