"""Pipeline stages wired together through persisted artifacts.

Every stage reads its inputs from files written by earlier stages and writes
its own outputs with a staged two-phase commit, even inside a full run.  That
quantizes all floating-point handoffs at the same boundaries no matter how
the pipeline is invoked, so a full run and a stage-by-stage run produce
byte-identical trees, and a resumed stage sees exactly what the original run
saw.
"""

from __future__ import annotations

import io
import json
import logging
from pathlib import Path

import numpy as np

from . import analysis, clustering, ingest, negation, semantics
from ._util import StagedWrites, canonical_json, fmt, roundtrip
from .config import RunConfig
from .errors import MissingArtifactError
from .providers import StanceItem, make_provider

log = logging.getLogger(__name__)

STAGE_ORDER = ("ingest", "fit-negation", "embed", "score", "cluster", "report")


def artifacts_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out_dir) / "artifacts"


def _artifact(cfg: RunConfig, name: str) -> Path:
    return artifacts_dir(cfg) / name


def _output(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.out_dir) / name


def _require(path: Path, stage: str, producer: str) -> Path:
    if not path.is_file():
        raise MissingArtifactError(
            f"stage {stage} needs {path.name}; run the {producer} stage first (or use --no-resume)"
        )
    return path


def build_provider(cfg: RunConfig):
    return make_provider(
        cfg.provider,
        cfg.dim,
        workers=cfg.workers,
        remote_url=cfg.remote_url,
        timeout=cfg.remote_timeout,
        retries=cfg.remote_retries,
        batch_size=cfg.batch_size,
        max_in_flight=cfg.max_in_flight,
    )


def stage_ingest(cfg: RunConfig) -> dict:
    """Parse posts, comments and ratings; prune; persist the corpus."""
    with open(cfg.posts_path, encoding="utf-8") as fh:
        post_result = ingest.parse_posts(fh, strict=cfg.strict)
    with open(cfg.comments_path, encoding="utf-8") as fh:
        comment_result = ingest.parse_comments(fh, strict=cfg.strict)
    with open(cfg.ratings_path, encoding="utf-8") as fh:
        ratings = ingest.load_ratings(fh, mode=cfg.ratings_mode)
    for issue in post_result.issues:
        log.warning("posts %s: %s", cfg.posts_path.name, f"line {issue.line_no}: {issue.message}")
    for issue in comment_result.issues:
        log.warning("comments %s: %s", cfg.comments_path.name, f"line {issue.line_no}: {issue.message}")
    corpus, summary = ingest.prune_corpus(
        post_result.posts,
        comment_result.comments,
        min_words=cfg.min_words,
        min_user_comments=cfg.min_user_comments,
        year_mode=cfg.year_mode,
        strict=cfg.strict,
    )
    corpus = corpus.with_ratings(ratings)
    payload = {
        "format": "echoscope-corpus-v1",
        "posts": [
            {
                "id": p.id,
                "subreddit": p.subreddit,
                "title": p.title,
                "created_at": p.created_at,
                "source_domain": p.source_domain,
            }
            for p in (corpus.posts[pid] for pid in sorted(corpus.posts))
        ],
        "comments": [
            {
                "id": c.id,
                "post_id": c.post_id,
                "parent_id": c.parent_id,
                "author": c.author,
                "body": c.body,
                "created_at": c.created_at,
            }
            for c in (corpus.comments[cid] for cid in sorted(corpus.comments))
        ],
        "ratings": {pid: [float(fmt(c)), float(fmt(b))] for pid, (c, b) in sorted(corpus.ratings.items())},
        "prune_summary": summary.as_dict(),
        "parse": {
            "post_issues": len(post_result.issues),
            "comment_issues": len(comment_result.issues),
            "deleted_posts": post_result.deleted,
            "deleted_comments": comment_result.deleted,
        },
    }
    writer = StagedWrites()
    try:
        writer.add_text(_artifact(cfg, "corpus.json"), canonical_json(payload))
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    log.info(
        "ingest: %d posts, %d comments, %d users retained",
        summary.retained_posts,
        summary.retained_comments,
        summary.retained_users,
    )
    return {"prune_summary": summary.as_dict(), "parse": payload["parse"]}


def load_corpus(cfg: RunConfig, stage: str) -> tuple[ingest.Corpus, dict]:
    path = _require(_artifact(cfg, "corpus.json"), stage, "ingest")
    data = json.loads(path.read_text(encoding="utf-8"))
    posts = {
        p["id"]: ingest.Post(
            id=p["id"],
            subreddit=p["subreddit"],
            title=p["title"],
            created_at=p["created_at"],
            source_domain=p.get("source_domain"),
        )
        for p in data["posts"]
    }
    comments = {
        c["id"]: ingest.Comment(
            id=c["id"],
            post_id=c["post_id"],
            parent_id=c["parent_id"],
            author=c["author"],
            body=c["body"],
            created_at=c["created_at"],
        )
        for c in data["comments"]
    }
    ratings = {pid: (cb[0], cb[1]) for pid, cb in data["ratings"].items()}
    return ingest.Corpus(posts=posts, comments=comments, ratings=ratings), data


def stage_fit_negation(cfg: RunConfig, provider=None) -> dict:
    """Fit the negation map on embedded triplet pairs and persist it."""
    provider = provider or build_provider(cfg)
    with open(cfg.triplets_path, encoding="utf-8") as fh:
        triplets, issues = negation.load_triplets(fh, strict=cfg.strict)
    for msg in issues:
        log.warning("triplets %s: %s", cfg.triplets_path.name, msg)
    train, held = negation.split_triplets(triplets, train_fraction=cfg.train_fraction, seed=cfg.seed)
    train_pairs = negation.triplets_to_pairs(train)
    held_pairs = negation.triplets_to_pairs(held)
    texts = sorted({t for pair in train_pairs + held_pairs for t in pair})
    vectors = provider.embed_texts(texts)
    lookup = {t: vectors[i] for i, t in enumerate(texts)}
    X = np.stack([lookup[a] for a, _ in train_pairs])
    Y = np.stack([lookup[b] for _, b in train_pairs])
    model = negation.fit_affine(X, Y, ridge_lambda=cfg.ridge_lambda)
    eval_payload = {
        "format": "echoscope-negation-eval-v1",
        "ridge_lambda": roundtrip(cfg.ridge_lambda),
        "n_train_pairs": len(train_pairs),
        "n_held_pairs": len(held_pairs),
        "triplet_issues": len(issues),
        "mse": None,
        "mean_cosine": None,
        "signflip_mean_cosine": None,
    }
    if held_pairs:
        Xh = np.stack([lookup[a] for a, _ in held_pairs])
        Yh = np.stack([lookup[b] for _, b in held_pairs])
        report = negation.evaluate(model, Xh, Yh)
        eval_payload["mse"] = roundtrip(report.mse)
        eval_payload["mean_cosine"] = roundtrip(report.mean_cosine)
        eval_payload["signflip_mean_cosine"] = roundtrip(report.signflip_mean_cosine)
    writer = StagedWrites()
    try:
        writer.add_bytes(_artifact(cfg, "negation_model.bin"), negation.save_model_bytes(model))
        writer.add_text(_artifact(cfg, "negation_eval.json"), canonical_json(eval_payload))
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    log.info("fit-negation: %d train pairs, %d held-out pairs", len(train_pairs), len(held_pairs))
    return eval_payload


def stage_embed(cfg: RunConfig, provider=None) -> dict:
    """Embed post titles and persist the matrix plus its row index."""
    provider = provider or build_provider(cfg)
    corpus, _ = load_corpus(cfg, "embed")
    post_ids = sorted(corpus.posts)
    titles = [corpus.posts[pid].title for pid in post_ids]
    vectors = provider.embed_texts(titles)
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(vectors, dtype=np.float64))
    writer = StagedWrites()
    try:
        writer.add_text(_artifact(cfg, "post_index.json"), canonical_json(post_ids))
        writer.add_bytes(_artifact(cfg, "post_embeddings.npy"), buf.getvalue())
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    log.info("embed: %d posts at dim %d", len(post_ids), cfg.dim)
    return {"posts": len(post_ids), "dim": cfg.dim}


def load_post_vectors(cfg: RunConfig, stage: str) -> dict[str, np.ndarray]:
    index_path = _require(_artifact(cfg, "post_index.json"), stage, "embed")
    matrix_path = _require(_artifact(cfg, "post_embeddings.npy"), stage, "embed")
    post_ids = json.loads(index_path.read_text(encoding="utf-8"))
    matrix = np.load(matrix_path)
    if matrix.shape[0] != len(post_ids):
        raise MissingArtifactError(
            f"post_embeddings.npy has {matrix.shape[0]} rows but post_index.json lists {len(post_ids)} posts"
        )
    return {pid: matrix[i] for i, pid in enumerate(post_ids)}


def stage_score(cfg: RunConfig, provider=None) -> dict:
    """Detect stances, compose them toward root posts, build user profiles."""
    provider = provider or build_provider(cfg)
    corpus, _ = load_corpus(cfg, "score")
    post_vectors = load_post_vectors(cfg, "score")
    model = negation.load_model(_require(_artifact(cfg, "negation_model.bin"), "score", "fit-negation"))
    if model.dim != cfg.dim:
        raise MissingArtifactError(
            f"negation model has dim {model.dim} but the run is configured for dim {cfg.dim}"
        )
    comment_ids = sorted(corpus.comments)
    items = []
    for cid in comment_ids:
        c = corpus.comments[cid]
        post = corpus.posts[c.post_id]
        parent_text = post.title if c.parent_id == c.post_id else corpus.comments[c.parent_id].body
        items.append(StanceItem(post=post.title, parent=parent_text, comment=c.body))
    stances = provider.detect_stances(items)
    link = {cid: stance for cid, stance in zip(comment_ids, stances)}
    assignment = semantics.compose_stances(corpus, link, mode=cfg.stance_mode)
    profiles = semantics.build_profiles(corpus, assignment, post_vectors, model)
    fallbacks = getattr(provider, "stance_fallbacks", 0)
    stance_payload = {
        "format": "echoscope-stances-v1",
        "link": {cid: link[cid].label for cid in comment_ids},
        "fallbacks": fallbacks,
    }
    writer = StagedWrites()
    try:
        writer.add_text(_artifact(cfg, "stances.json"), canonical_json(stance_payload))
        writer.add_text(_output(cfg, "profiles.csv"), semantics.write_profile_table(profiles))
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    log.info("score: %d users profiled, %d stance fallbacks", len(profiles), fallbacks)
    return {"users": len(profiles), "stance_fallbacks": fallbacks}


def load_profiles(cfg: RunConfig, stage: str) -> list[semantics.UserProfile]:
    path = _require(_output(cfg, "profiles.csv"), stage, "score")
    return semantics.read_profile_table(path.read_text(encoding="utf-8"))


def stage_cluster(cfg: RunConfig) -> dict:
    """Cluster user embeddings with the auto-sized spectral scan."""
    profiles = load_profiles(cfg, "cluster")
    X = np.stack([p.embedding for p in profiles])
    model = clustering.cluster_embeddings(
        X,
        neighbor_k=cfg.neighbor_k,
        k_min=cfg.k_min,
        k_max=cfg.k_max,
        assignment=cfg.assignment,
        seed=cfg.seed,
        max_sweeps=cfg.max_sweeps,
    )
    lines = ["#echoscope clusters v1", "user_id,cluster"]
    for p, lab in zip(profiles, model.labels):
        lines.append(f"{p.user_id},{int(lab)}")
    payload = {
        "format": "echoscope-cluster-model-v1",
        "k_selected": model.k_selected,
        "assignment": model.assignment,
        "costs": {str(k): roundtrip(v) for k, v in sorted(model.costs.items())},
        "converged": {str(k): bool(v) for k, v in sorted(model.converged.items())},
        "eigenvalues": [roundtrip(v) for v in model.eigenvalues],
        "empty_clusters": model.empty_clusters,
    }
    writer = StagedWrites()
    try:
        writer.add_text(_output(cfg, "clusters.csv"), "\n".join(lines) + "\n")
        writer.add_text(_artifact(cfg, "cluster_model.json"), canonical_json(payload))
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    log.info("cluster: selected k=%d over %d users", model.k_selected, len(profiles))
    return {"k_selected": model.k_selected, "empty_clusters": model.empty_clusters}


def load_cluster_labels(cfg: RunConfig, stage: str) -> dict[str, int]:
    path = _require(_output(cfg, "clusters.csv"), stage, "cluster")
    lines = path.read_text(encoding="utf-8").splitlines()
    labels = {}
    for line in lines[2:]:
        if line:
            user_id, _, label = line.rpartition(",")
            labels[user_id] = int(label)
    return labels


def stage_report(cfg: RunConfig) -> dict:
    """Aggregate statistics and write the user-facing outputs."""
    corpus, corpus_data = load_corpus(cfg, "report")
    profiles = load_profiles(cfg, "report")
    label_map = load_cluster_labels(cfg, "report")
    cluster_path = _require(_artifact(cfg, "cluster_model.json"), "report", "cluster")
    cluster_data = json.loads(cluster_path.read_text(encoding="utf-8"))
    eval_path = _require(_artifact(cfg, "negation_eval.json"), "report", "fit-negation")
    negation_eval = json.loads(eval_path.read_text(encoding="utf-8"))
    stances_path = _require(_artifact(cfg, "stances.json"), "report", "score")
    stance_data = json.loads(stances_path.read_text(encoding="utf-8"))

    missing = [p.user_id for p in profiles if p.user_id not in label_map]
    if missing:
        raise MissingArtifactError(f"clusters.csv lacks labels for users: {missing[:5]}")
    labels = np.array([label_map[p.user_id] for p in profiles], dtype=np.int64)
    rows = analysis.cluster_report(
        profiles,
        labels,
        high_bias_threshold=cfg.high_bias_threshold,
        low_cred_threshold=cfg.low_cred_threshold,
    )
    correlations = analysis.correlation_summary(rows)
    summary = {
        "format": "echoscope-run-summary-v1",
        "config_hash": cfg.semantic_hash(),
        "provider": cfg.provider,
        "seed": cfg.seed,
        "dim": cfg.dim,
        "corpus": {
            "posts": len(corpus.posts),
            "comments": len(corpus.comments),
            "users": len(profiles),
            "verifiable_posts": len(corpus.ratings),
            "verifiable_fraction": roundtrip(corpus.verifiable_fraction()),
        },
        "parse": corpus_data["parse"],
        "prune_summary": corpus_data["prune_summary"],
        "negation": {k: v for k, v in negation_eval.items() if k != "format"},
        "stance_fallbacks": stance_data["fallbacks"],
        "stance_mode": cfg.stance_mode,
        "clustering": {k: v for k, v in cluster_data.items() if k != "format"},
        "report": {
            "clusters": len(rows),
            "thresholds": {
                "high_bias": roundtrip(cfg.high_bias_threshold),
                "low_cred": roundtrip(cfg.low_cred_threshold),
            },
            "correlations": correlations,
        },
    }
    costs = {int(k): float(v) for k, v in cluster_data["costs"].items()}
    writer = StagedWrites()
    try:
        writer.add_text(_output(cfg, "report.csv"), analysis.render_report_csv(rows))
        writer.add_text(_output(cfg, "user_scatter.csv"), analysis.render_scatter_csv(profiles, labels))
        writer.add_text(_output(cfg, "alignment_costs.csv"), analysis.render_costs_csv(costs))
        writer.add_text(_output(cfg, "run_summary.json"), canonical_json(summary))
        writer.commit()
    except BaseException:
        writer.abort()
        raise
    log.info("report: %d clusters, %d users", len(rows), len(profiles))
    return summary


_STAGE_FUNCS = {
    "ingest": lambda cfg, provider=None: stage_ingest(cfg),
    "fit-negation": stage_fit_negation,
    "embed": stage_embed,
    "score": stage_score,
    "cluster": lambda cfg, provider=None: stage_cluster(cfg),
    "report": lambda cfg, provider=None: stage_report(cfg),
}


def run_stage(cfg: RunConfig, stage: str, *, resume: bool = True, provider=None):
    """Run one stage; with resume off, run its whole prerequisite chain."""
    if stage not in _STAGE_FUNCS:
        raise ValueError(f"unknown stage: {stage}")
    if resume:
        return _STAGE_FUNCS[stage](cfg, provider=provider)
    result = None
    for name in STAGE_ORDER:
        result = _STAGE_FUNCS[name](cfg, provider=provider)
        if name == stage:
            break
    return result


def run_pipeline(cfg: RunConfig, provider=None) -> dict:
    """Run every stage in order and return the final summary."""
    provider = provider or build_provider(cfg)
    summary = None
    for name in STAGE_ORDER:
        summary = _STAGE_FUNCS[name](cfg, provider=provider)
    return summary
