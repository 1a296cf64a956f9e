"""Stance-conditioned comment semantics and user profiles.

A comment inherits the embedding of the post it sits under, transformed by
its stance: favor keeps the post vector, against maps it through the learned
negation model, neutral takes the midpoint of the two.  Credibility and bias
propagate with the same sign convention, and a user is the plain average of
their comments.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ._util import fmt
from .errors import ParseError
from .ingest import Corpus
from .negation import NegationModel
from .providers import Stance

log = logging.getLogger(__name__)


def embed_comment(h_post: np.ndarray, sigma: int, model: NegationModel) -> np.ndarray:
    """Stance-conditioned comment embedding.

    sigma +1 returns the post vector unchanged, -1 its image under the
    negation map, and 0 the midpoint 0.5 * (h + negate(h)) of those two.
    """
    if sigma == 1:
        return np.array(h_post, dtype=np.float64, copy=True)
    if sigma == -1:
        return model.negate(np.asarray(h_post, dtype=np.float64))
    if sigma == 0:
        h = np.asarray(h_post, dtype=np.float64)
        return 0.5 * (h + model.negate(h))
    raise ValueError(f"sigma must be -1, 0 or +1, got {sigma}")


def comment_credibility(sigma: int, post_credibility: float) -> float:
    """Reflect credibility about 1/2 when the comment opposes the post."""
    return sigma * (post_credibility - 0.5) + 0.5


def comment_bias(sigma: int, post_bias: float) -> float:
    """Flip the sign of bias when the comment opposes the post."""
    return sigma * post_bias


@dataclass
class StanceAssignment:
    """Effective stance of each comment toward its root post.

    sigma_post composes the per-link stances down the reply chain by
    multiplication, so disagreement with disagreement reads as agreement and
    any neutral link absorbs the rest of the chain.  In top_level_only mode
    nested replies are treated as neutral for embedding purposes and excluded
    from credibility/bias scoring.
    """

    link: dict[str, int]
    toward_post: dict[str, int]
    scored: dict[str, bool]


def compose_stances(corpus: Corpus, link_stances: dict[str, Stance], mode: str = "chain") -> StanceAssignment:
    if mode not in ("chain", "top_level_only"):
        raise ValueError(f"unknown stance mode: {mode!r}")
    link = {cid: link_stances[cid].sigma for cid in corpus.comments}
    toward: dict[str, int] = {}
    scored: dict[str, bool] = {}

    def resolve(cid: str) -> int:
        if cid in toward:
            return toward[cid]
        c = corpus.comments[cid]
        if c.parent_id == c.post_id:
            value = link[cid]
        else:
            value = link[cid] * resolve(c.parent_id)
        toward[cid] = value
        return value

    for cid in corpus.comments:
        c = corpus.comments[cid]
        if mode == "chain":
            resolve(cid)
            scored[cid] = True
        else:
            top_level = c.parent_id == c.post_id
            toward[cid] = link[cid] if top_level else 0
            scored[cid] = top_level
    return StanceAssignment(link=link, toward_post=toward, scored=scored)


@dataclass
class UserProfile:
    user_id: str
    embedding: np.ndarray
    credibility: float | None
    bias: float | None
    comment_count: int
    scored_comment_count: int
    subreddit_counts: dict[str, int] = field(default_factory=dict)


def _mean_rows(rows: list[np.ndarray]) -> np.ndarray:
    acc = rows[0].astype(np.float64, copy=True)
    for r in rows[1:]:
        acc += r
    return acc / len(rows)


def _mean_scalars(values: list[float]) -> float:
    acc = 0.0
    for v in values:
        acc += v
    return acc / len(values)


def build_profiles(
    corpus: Corpus,
    stances: StanceAssignment,
    post_vectors: dict[str, np.ndarray],
    model: NegationModel,
) -> list[UserProfile]:
    """Aggregate comments into per-user profiles, sorted by user id.

    The embedding is the arithmetic mean of the user's comment embeddings,
    accumulated left to right over comments ordered by (created_at, id) so
    repeated runs produce bit-identical sums.  Credibility and bias average
    only comments on verifiable posts that the stance mode scores; users with
    none keep None.
    """
    profiles = []
    for user in corpus.users():
        comments = corpus.comments_of_user(user)
        vectors = []
        creds: list[float] = []
        biases: list[float] = []
        sub_counts: Counter = Counter()
        scored = 0
        for c in comments:
            post = corpus.posts[c.post_id]
            sigma = stances.toward_post[c.id]
            vectors.append(embed_comment(post_vectors[c.post_id], sigma, model))
            sub_counts[post.subreddit] += 1
            if stances.scored[c.id] and corpus.is_verifiable(c.post_id):
                cred_p, bias_p = corpus.ratings[c.post_id]
                creds.append(comment_credibility(sigma, cred_p))
                biases.append(comment_bias(sigma, bias_p))
                scored += 1
        profiles.append(
            UserProfile(
                user_id=user,
                embedding=_mean_rows(vectors),
                credibility=_mean_scalars(creds) if creds else None,
                bias=_mean_scalars(biases) if biases else None,
                comment_count=len(comments),
                scored_comment_count=scored,
                subreddit_counts=dict(sorted(sub_counts.items())),
            )
        )
    return profiles


PROFILE_HEADER = "#echoscope profiles v1"
_PROFILE_COLUMNS = "user_id,dim,embedding,credibility,bias,comment_count,scored_comment_count,subreddit_counts"


def write_profile_table(profiles: list[UserProfile]) -> str:
    """Render profiles as a small CSV with semicolon-packed vector columns.

    Floats carry 10 significant digits; downstream stages re-read this table,
    so the quantization here is the single precision boundary between scoring
    and clustering.
    """
    lines = [PROFILE_HEADER, _PROFILE_COLUMNS]
    for p in profiles:
        emb = ";".join(fmt(x) for x in p.embedding)
        subs = ";".join(f"{name}:{count}" for name, count in sorted(p.subreddit_counts.items()))
        lines.append(
            ",".join(
                [
                    p.user_id,
                    str(p.embedding.shape[0]),
                    emb,
                    fmt(p.credibility),
                    fmt(p.bias),
                    str(p.comment_count),
                    str(p.scored_comment_count),
                    subs,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def read_profile_table(text: str) -> list[UserProfile]:
    lines = text.splitlines()
    if not lines or lines[0] != PROFILE_HEADER:
        raise ParseError("profile table: unrecognized header")
    if len(lines) < 2 or lines[1] != _PROFILE_COLUMNS:
        raise ParseError("profile table: unexpected column list")
    profiles = []
    for line_no, line in enumerate(lines[2:], 3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise ParseError(f"profile table: expected 8 columns, got {len(parts)}", line_no=line_no)
        user_id, dim_s, emb_s, cred_s, bias_s, count_s, scored_s, subs_s = parts
        try:
            dim = int(dim_s)
            emb = np.array([float(x) for x in emb_s.split(";")], dtype=np.float64)
            if emb.shape[0] != dim:
                raise ValueError(f"embedding has {emb.shape[0]} entries, dim says {dim}")
            subs = {}
            if subs_s:
                for token in subs_s.split(";"):
                    name, _, count = token.rpartition(":")
                    subs[name] = int(count)
            profiles.append(
                UserProfile(
                    user_id=user_id,
                    embedding=emb,
                    credibility=float(cred_s) if cred_s else None,
                    bias=float(bias_s) if bias_s else None,
                    comment_count=int(count_s),
                    scored_comment_count=int(scored_s),
                    subreddit_counts=subs,
                )
            )
        except ValueError as exc:
            raise ParseError(f"profile table: {exc}", line_no=line_no)
    return profiles
