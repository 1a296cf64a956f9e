import dataclasses
import json

import numpy as np
import pytest

from echoscope import pipeline
from echoscope._util import StagedWrites, canonical_json, fmt, roundtrip
from echoscope.config import load_config
from echoscope.errors import ClusteringError, MissingArtifactError

from conftest import TOY_DIR


def toy_cfg(out_dir, **changes):
    cfg = load_config(TOY_DIR / "toy.yaml", overrides={"out_dir": out_dir})
    return dataclasses.replace(cfg, **changes) if changes else cfg


class TestUtil:
    def test_fmt_and_roundtrip(self):
        assert fmt(None) == ""
        assert fmt(0.5) == "0.5"
        assert fmt(1 / 3) == "0.3333333333"
        assert roundtrip(None) is None
        assert roundtrip(1 / 3) == 0.3333333333

    def test_canonical_json_is_sorted_with_newline(self):
        assert canonical_json({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_staged_writes_commit_publishes_all(self, tmp_path):
        w = StagedWrites()
        w.add_text(tmp_path / "a.txt", "alpha")
        w.add_bytes(tmp_path / "sub" / "b.bin", b"beta")
        assert not (tmp_path / "a.txt").exists()
        assert (tmp_path / "a.txt.tmp").exists()
        w.commit()
        assert (tmp_path / "a.txt").read_text() == "alpha"
        assert (tmp_path / "sub" / "b.bin").read_bytes() == b"beta"
        assert not list(tmp_path.rglob("*.tmp"))

    def test_staged_writes_abort_leaves_previous_outputs(self, tmp_path):
        (tmp_path / "a.txt").write_text("old")
        w = StagedWrites()
        w.add_text(tmp_path / "a.txt", "new")
        w.abort()
        assert (tmp_path / "a.txt").read_text() == "old"
        assert not list(tmp_path.rglob("*.tmp"))


class TestFullRun:
    def test_full_run_matches_stage_by_stage(self, tmp_path, tree_bytes):
        full = toy_cfg(tmp_path / "full")
        pipeline.run_pipeline(full)
        staged = toy_cfg(tmp_path / "staged")
        for name in pipeline.STAGE_ORDER:
            pipeline.run_stage(staged, name)
        assert tree_bytes(full.out_dir) == tree_bytes(staged.out_dir)

    def test_repeat_runs_are_byte_identical(self, tmp_path, tree_bytes):
        a = toy_cfg(tmp_path / "a")
        b = toy_cfg(tmp_path / "b")
        pipeline.run_pipeline(a)
        pipeline.run_pipeline(b)
        assert tree_bytes(a.out_dir) == tree_bytes(b.out_dir)

    def test_no_temp_residue(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_pipeline(cfg)
        assert not list(cfg.out_dir.rglob("*.tmp"))

    def test_summary_contents(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        summary = pipeline.run_pipeline(cfg)
        assert summary["config_hash"] == cfg.semantic_hash()
        assert summary["corpus"]["posts"] == 30
        assert summary["corpus"]["comments"] == 351
        assert summary["corpus"]["users"] == 12
        assert summary["clustering"]["k_selected"] == 3
        on_disk = json.loads((cfg.out_dir / "run_summary.json").read_text())
        assert on_disk == json.loads(canonical_json(summary))

    def test_expected_files_present(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_pipeline(cfg)
        outputs = {p.name for p in cfg.out_dir.iterdir() if p.is_file()}
        assert outputs == {
            "profiles.csv",
            "clusters.csv",
            "report.csv",
            "user_scatter.csv",
            "alignment_costs.csv",
            "run_summary.json",
        }
        artifacts = {p.name for p in (cfg.out_dir / "artifacts").iterdir()}
        assert artifacts == {
            "corpus.json",
            "negation_model.bin",
            "negation_eval.json",
            "post_index.json",
            "post_embeddings.npy",
            "stances.json",
            "cluster_model.json",
        }


class TestResume:
    def test_stage_without_inputs_names_producer(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        with pytest.raises(MissingArtifactError, match="ingest"):
            pipeline.run_stage(cfg, "embed")
        with pytest.raises(MissingArtifactError, match="score"):
            pipeline.run_stage(cfg, "cluster")

    def test_no_resume_runs_prerequisite_chain(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "score", resume=False)
        assert (cfg.out_dir / "profiles.csv").is_file()
        assert (cfg.out_dir / "artifacts" / "post_embeddings.npy").is_file()
        assert not (cfg.out_dir / "clusters.csv").exists()

    def test_resumed_stage_reproduces_original_bytes(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_pipeline(cfg)
        before = (cfg.out_dir / "clusters.csv").read_bytes()
        (cfg.out_dir / "clusters.csv").unlink()
        pipeline.run_stage(cfg, "cluster")
        assert (cfg.out_dir / "clusters.csv").read_bytes() == before

    def test_unknown_stage(self, tmp_path):
        with pytest.raises(ValueError, match="unknown stage"):
            pipeline.run_stage(toy_cfg(tmp_path / "out"), "polish")


class TestArtifactValidation:
    def test_embedding_index_mismatch_detected(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "embed", resume=False)
        index_path = cfg.out_dir / "artifacts" / "post_index.json"
        ids = json.loads(index_path.read_text())
        index_path.write_text(canonical_json(ids[:-1]))
        with pytest.raises(MissingArtifactError, match="rows"):
            pipeline.load_post_vectors(cfg, "score")

    def test_negation_model_dim_mismatch_detected(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "embed", resume=False)
        wrong = dataclasses.replace(cfg, dim=24)
        pipeline.stage_embed(wrong)
        with pytest.raises(MissingArtifactError, match="dim"):
            pipeline.stage_score(wrong)

    def test_cluster_needs_enough_users(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "score", resume=False)
        profile_path = cfg.out_dir / "profiles.csv"
        lines = profile_path.read_text().splitlines()
        profile_path.write_text("\n".join(lines[:4]) + "\n")  # keep two users
        with pytest.raises(ClusteringError):
            pipeline.run_stage(cfg, "cluster")
        assert not (cfg.out_dir / "clusters.csv").exists()
        assert not list(cfg.out_dir.rglob("*.tmp"))

    def test_report_rejects_missing_labels(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_pipeline(cfg)
        clusters_path = cfg.out_dir / "clusters.csv"
        lines = clusters_path.read_text().splitlines()
        clusters_path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(MissingArtifactError, match="lacks labels"):
            pipeline.run_stage(cfg, "report")


class TestCorpusRoundTrip:
    def test_corpus_artifact_round_trips(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "ingest")
        corpus, data = pipeline.load_corpus(cfg, "embed")
        assert data["format"] == "echoscope-corpus-v1"
        assert len(corpus.posts) == data["prune_summary"]["retained_posts"]
        assert len(corpus.comments) == data["prune_summary"]["retained_comments"]
        assert set(corpus.ratings) <= set(corpus.posts)
        some_post = next(iter(corpus.posts.values()))
        assert some_post.title

    def test_rating_quantization_matches_text_format(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "ingest")
        data = json.loads((cfg.out_dir / "artifacts" / "corpus.json").read_text())
        for cred, bias in data["ratings"].values():
            assert cred == roundtrip(cred)
            assert bias == roundtrip(bias)


class TestStanceArtifact:
    def test_stance_labels_cover_all_comments(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "score", resume=False)
        stances = json.loads((cfg.out_dir / "artifacts" / "stances.json").read_text())
        corpus, _ = pipeline.load_corpus(cfg, "score")
        assert set(stances["link"]) == set(corpus.comments)
        assert set(stances["link"].values()) <= {"favor", "against", "none"}
        assert stances["fallbacks"] == 0

    def test_post_embeddings_are_unit_rows(self, tmp_path):
        cfg = toy_cfg(tmp_path / "out")
        pipeline.run_stage(cfg, "embed", resume=False)
        vectors = pipeline.load_post_vectors(cfg, "score")
        for v in vectors.values():
            assert np.sqrt(np.sum(v * v)) == pytest.approx(1.0, abs=1e-12)
