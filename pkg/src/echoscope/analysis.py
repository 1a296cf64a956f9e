"""Per-cluster susceptibility statistics and the exported report files.

Counting statistics (cluster sizes, threshold fractions, dominant subreddit)
are exact integer arithmetic.  Means and standard deviations run over users
in ascending user-id order with plain left-to-right accumulation, so repeated
runs agree bit for bit.  Statistics that are undefined for a sample (a lone
scored user, a zero-variance correlation) are reported as None, never NaN.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from ._util import fmt, roundtrip
from .errors import StatisticError
from .semantics import UserProfile

log = logging.getLogger(__name__)

DEFAULT_HIGH_BIAS = 0.5
DEFAULT_LOW_CRED = 0.5


def mean(values: list[float]) -> float:
    if not values:
        raise StatisticError("mean of an empty sample")
    acc = 0.0
    for v in values:
        acc += v
    return acc / len(values)


def sample_std(values: list[float]) -> float:
    """Two-pass sample standard deviation (n - 1 denominator)."""
    n = len(values)
    if n < 2:
        raise StatisticError("standard deviation needs at least two values")
    m = mean(values)
    acc = 0.0
    for v in values:
        acc += (v - m) ** 2
    return float(np.sqrt(acc / (n - 1)))


def pearson(xs: list[float], ys: list[float]) -> float:
    """Pearson correlation; raises for short or zero-variance samples."""
    if len(xs) != len(ys):
        raise ValueError("samples must have equal length")
    n = len(xs)
    if n < 2:
        raise StatisticError("correlation needs at least two points")
    mx = mean(xs)
    my = mean(ys)
    sxy = sxx = syy = 0.0
    for x, y in zip(xs, ys):
        dx = x - mx
        dy = y - my
        sxy += dx * dy
        sxx += dx * dx
        syy += dy * dy
    if sxx <= 0.0 or syy <= 0.0:
        raise StatisticError("correlation is undefined for a zero-variance sample")
    return sxy / float(np.sqrt(sxx) * np.sqrt(syy))


def pc_std(points: np.ndarray) -> float:
    """Standard deviation along the first principal component.

    The square root of the largest eigenvalue of the sample covariance
    (n - 1 denominator).  Needs at least two points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 2:
        raise StatisticError("principal-component spread needs at least two points")
    centered = pts - pts.mean(axis=0)
    cov = (centered.T @ centered) / (pts.shape[0] - 1)
    top = float(np.linalg.eigvalsh(cov)[-1])
    return float(np.sqrt(max(top, 0.0)))


@dataclass
class ClusterRow:
    cluster: int
    n_users: int
    n_scored_users: int
    dominant_subreddit: str
    dominant_share: float
    mean_bias: float | None
    std_bias: float | None
    mean_cred: float | None
    std_cred: float | None
    frac_high_bias: float | None
    frac_low_cred: float | None
    pc_std_latent: float | None
    pc_std_credbias: float | None


def cluster_report(
    profiles: list[UserProfile],
    labels: np.ndarray,
    *,
    high_bias_threshold: float = DEFAULT_HIGH_BIAS,
    low_cred_threshold: float = DEFAULT_LOW_CRED,
) -> list[ClusterRow]:
    """One row per cluster id, ascending.

    Score statistics cover only scored users (those with at least one comment
    on a rated post).  Threshold fractions count |bias| strictly above and
    credibility strictly below their cutoffs.  The dominant subreddit is the
    one with the most member comments, lexicographically smallest on ties.
    """
    if len(profiles) != len(labels):
        raise ValueError("profiles and labels must align")
    rows = []
    for cluster in sorted(set(int(l) for l in labels)):
        members = [p for p, l in zip(profiles, labels) if int(l) == cluster]
        scored = [p for p in members if p.credibility is not None]
        biases = [p.bias for p in scored]
        creds = [p.credibility for p in scored]
        sub_totals: Counter = Counter()
        for p in members:
            sub_totals.update(p.subreddit_counts)
        total_comments = sum(sub_totals.values())
        dominant, dom_count = min(sub_totals.items(), key=lambda kv: (-kv[1], kv[0]))
        latent = np.stack([p.embedding for p in members]) if len(members) >= 2 else None
        credbias = (
            np.array([[p.credibility, p.bias] for p in scored], dtype=np.float64)
            if len(scored) >= 2
            else None
        )
        rows.append(
            ClusterRow(
                cluster=cluster,
                n_users=len(members),
                n_scored_users=len(scored),
                dominant_subreddit=dominant,
                dominant_share=dom_count / total_comments,
                mean_bias=mean(biases) if biases else None,
                std_bias=sample_std(biases) if len(biases) >= 2 else None,
                mean_cred=mean(creds) if creds else None,
                std_cred=sample_std(creds) if len(creds) >= 2 else None,
                frac_high_bias=(
                    sum(1 for b in biases if abs(b) > high_bias_threshold) / len(scored)
                    if scored
                    else None
                ),
                frac_low_cred=(
                    sum(1 for c in creds if c < low_cred_threshold) / len(scored)
                    if scored
                    else None
                ),
                pc_std_latent=pc_std(latent) if latent is not None else None,
                pc_std_credbias=pc_std(credbias) if credbias is not None else None,
            )
        )
    return rows


def correlation_summary(rows: list[ClusterRow]) -> dict:
    """Cross-cluster correlations; None when fewer than two usable clusters
    or a zero-variance side makes the statistic undefined."""
    bias_cred = None
    spread = None
    scored_rows = [r for r in rows if r.mean_bias is not None and r.mean_cred is not None]
    if len(scored_rows) >= 2:
        try:
            bias_cred = pearson([abs(r.mean_bias) for r in scored_rows], [r.mean_cred for r in scored_rows])
        except StatisticError as exc:
            log.info("bias/credibility correlation undefined: %s", exc)
    spread_rows = [r for r in rows if r.pc_std_latent is not None and r.pc_std_credbias is not None]
    if len(spread_rows) >= 2:
        try:
            spread = pearson([r.pc_std_latent for r in spread_rows], [r.pc_std_credbias for r in spread_rows])
        except StatisticError as exc:
            log.info("spread correlation undefined: %s", exc)
    return {
        "abs_bias_vs_credibility": roundtrip(bias_cred),
        "latent_spread_vs_score_spread": roundtrip(spread),
        "clusters_with_scores": len(scored_rows),
        "clusters_with_spreads": len(spread_rows),
    }


REPORT_HEADER = "#echoscope report v1"
_REPORT_COLUMNS = (
    "cluster,n_users,dominant_subreddit,mean_bias,std_bias,mean_cred,std_cred,"
    "frac_high_bias,frac_low_cred,n_scored_users,dominant_share,pc_std_latent,pc_std_credbias"
)


def render_report_csv(rows: list[ClusterRow]) -> str:
    lines = [REPORT_HEADER, _REPORT_COLUMNS]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r.cluster),
                    str(r.n_users),
                    r.dominant_subreddit,
                    fmt(r.mean_bias),
                    fmt(r.std_bias),
                    fmt(r.mean_cred),
                    fmt(r.std_cred),
                    fmt(r.frac_high_bias),
                    fmt(r.frac_low_cred),
                    str(r.n_scored_users),
                    fmt(r.dominant_share),
                    fmt(r.pc_std_latent),
                    fmt(r.pc_std_credbias),
                ]
            )
        )
    return "\n".join(lines) + "\n"


SCATTER_HEADER = "#echoscope user-scatter v1"


def render_scatter_csv(profiles: list[UserProfile], labels: np.ndarray) -> str:
    """Per-user plot data: cluster plus credibility/bias (blank if unscored)."""
    lines = [SCATTER_HEADER, "user_id,cluster,credibility,bias"]
    for p, l in zip(profiles, labels):
        lines.append(",".join([p.user_id, str(int(l)), fmt(p.credibility), fmt(p.bias)]))
    return "\n".join(lines) + "\n"


COSTS_HEADER = "#echoscope alignment-costs v1"


def render_costs_csv(costs: dict[int, float]) -> str:
    lines = [COSTS_HEADER, "k,alignment_cost"]
    for k in sorted(costs):
        lines.append(f"{k},{fmt(costs[k])}")
    return "\n".join(lines) + "\n"
