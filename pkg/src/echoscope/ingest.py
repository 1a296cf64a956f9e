"""Corpus ingestion: JSONL posts and comments, a source-ratings table, pruning.

Parsing is line-oriented and fail-loud: in strict mode the first malformed
record raises with its line number; in lenient mode bad records are skipped
and collected as issues.  Pruning applies the activity rules repeatedly until
a fixed point, so the retained corpus always satisfies all of them at once.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from urllib.parse import urlsplit

from .errors import EmptyCorpusError, ParseError, RatingsError

log = logging.getLogger(__name__)

DELETION_SENTINELS = ("[deleted]", "[removed]")


@dataclass(frozen=True)
class Post:
    id: str
    subreddit: str
    title: str
    created_at: int
    source_domain: str | None = None


@dataclass(frozen=True)
class Comment:
    id: str
    post_id: str
    parent_id: str
    author: str
    body: str
    created_at: int


@dataclass(frozen=True)
class SourceRating:
    domain: str
    credibility: float
    bias: float


@dataclass
class ParseIssue:
    line_no: int
    message: str


@dataclass
class ParseResult:
    posts: list[Post] = field(default_factory=list)
    comments: list[Comment] = field(default_factory=list)
    issues: list[ParseIssue] = field(default_factory=list)
    deleted: int = 0


def _issue(result: ParseResult, strict: bool, line_no: int, message: str):
    if strict:
        raise ParseError(message, line_no=line_no)
    result.issues.append(ParseIssue(line_no, message))


def _get_str(record: dict, key: str, aliases: tuple[str, ...] = ()) -> str | None:
    for name in (key, *aliases):
        if name in record:
            value = record[name]
            if isinstance(value, str):
                return value
            return None
    return None


def _get_timestamp(record: dict) -> int | None:
    value = record.get("created_utc")
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return None
    return None


def source_domain_of(url: str | None) -> str | None:
    """Lowercased hostname of a URL, ports stripped; None when absent."""
    if not url:
        return None
    host = urlsplit(url).hostname
    return host.lower() if host else None


def parse_posts(lines, *, strict: bool = False) -> ParseResult:
    """Parse a JSONL post stream.

    Required fields: id, subreddit, title, created_utc.  Optional: url, from
    which the source domain is extracted.  Posts whose title is exactly
    "[deleted]" or "[removed]" are skipped and counted, not treated as errors.
    Duplicate ids are issues (fatal in strict mode).
    """
    result = ParseResult()
    seen: set[str] = set()
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            _issue(result, strict, line_no, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(record, dict):
            _issue(result, strict, line_no, "post record is not an object")
            continue
        pid = _get_str(record, "id")
        subreddit = _get_str(record, "subreddit")
        title = _get_str(record, "title")
        created = _get_timestamp(record)
        if not pid or not subreddit or title is None or created is None:
            _issue(result, strict, line_no, "post is missing id, subreddit, title or created_utc")
            continue
        if title in DELETION_SENTINELS:
            result.deleted += 1
            continue
        if not title.strip():
            _issue(result, strict, line_no, f"post {pid}: empty title")
            continue
        if pid in seen:
            _issue(result, strict, line_no, f"duplicate post id {pid}")
            continue
        seen.add(pid)
        result.posts.append(
            Post(
                id=pid,
                subreddit=subreddit,
                title=title,
                created_at=created,
                source_domain=source_domain_of(_get_str(record, "url")),
            )
        )
    return result


def parse_comments(lines, *, strict: bool = False) -> ParseResult:
    """Parse a JSONL comment stream.

    Required fields: id, post_id (alias link_id), parent_id, author, body,
    created_utc.  A top-level comment carries its post id as parent_id.
    Bodies that are exactly "[deleted]" or "[removed]" are skipped and counted.
    """
    result = ParseResult()
    seen: set[str] = set()
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            _issue(result, strict, line_no, f"invalid JSON: {exc.msg}")
            continue
        if not isinstance(record, dict):
            _issue(result, strict, line_no, "comment record is not an object")
            continue
        cid = _get_str(record, "id")
        post_id = _get_str(record, "post_id", aliases=("link_id",))
        parent_id = _get_str(record, "parent_id")
        author = _get_str(record, "author")
        body = _get_str(record, "body")
        created = _get_timestamp(record)
        if not cid or not post_id or not parent_id or not author or body is None or created is None:
            _issue(result, strict, line_no, "comment is missing a required field")
            continue
        if body in DELETION_SENTINELS:
            result.deleted += 1
            continue
        if cid in seen:
            _issue(result, strict, line_no, f"duplicate comment id {cid}")
            continue
        seen.add(cid)
        result.comments.append(
            Comment(id=cid, post_id=post_id, parent_id=parent_id, author=author, body=body, created_at=created)
        )
    return result


RAW_RELIABILITY_MAX = 64.0
RAW_BIAS_MAX = 42.0


def normalize_domain(domain: str) -> str:
    """Canonical ratings key: lowercase, no leading www."""
    d = domain.strip().lower().rstrip(".")
    if d.startswith("www."):
        d = d[4:]
    return d


def load_ratings(lines, *, mode: str = "raw") -> dict[str, SourceRating]:
    """Load the source-ratings CSV (columns: domain, reliability, bias).

    mode "raw" expects reliability in [0, 64] and bias in [-42, 42] and maps
    them onto credibility in [0, 1] and bias in [-1, 1] by dividing by the
    scale maxima.  mode "normalized" expects the mapped ranges directly.
    Out-of-range values and duplicate domains (after normalization) are fatal.
    """
    if mode not in ("raw", "normalized"):
        raise RatingsError(f"unknown ratings mode: {mode!r}")
    reader = csv.DictReader(lines)
    if reader.fieldnames is None:
        raise RatingsError("ratings table is empty")
    need = {"domain", "reliability", "bias"}
    have = {name.strip().lower() for name in reader.fieldnames}
    if not need <= have:
        raise RatingsError(f"ratings table is missing columns: {sorted(need - have)}")
    table: dict[str, SourceRating] = {}
    for row_no, row in enumerate(reader, 2):
        row = {(k or "").strip().lower(): (v or "").strip() for k, v in row.items()}
        domain = normalize_domain(row.get("domain", ""))
        if not domain:
            raise RatingsError(f"row {row_no}: empty domain")
        try:
            reliability = float(row["reliability"])
            bias = float(row["bias"])
        except (KeyError, ValueError):
            raise RatingsError(f"row {row_no} ({domain}): reliability and bias must be numbers")
        if mode == "raw":
            if not 0.0 <= reliability <= RAW_RELIABILITY_MAX:
                raise RatingsError(f"row {row_no} ({domain}): reliability {reliability} outside [0, 64]")
            if not -RAW_BIAS_MAX <= bias <= RAW_BIAS_MAX:
                raise RatingsError(f"row {row_no} ({domain}): bias {bias} outside [-42, 42]")
            credibility = reliability / RAW_RELIABILITY_MAX
            bias = bias / RAW_BIAS_MAX
        else:
            if not 0.0 <= reliability <= 1.0:
                raise RatingsError(f"row {row_no} ({domain}): credibility {reliability} outside [0, 1]")
            if not -1.0 <= bias <= 1.0:
                raise RatingsError(f"row {row_no} ({domain}): bias {bias} outside [-1, 1]")
            credibility = reliability
        if domain in table:
            raise RatingsError(f"row {row_no}: duplicate domain {domain}")
        table[domain] = SourceRating(domain=domain, credibility=credibility, bias=bias)
    return table


def denormalize_rating(rating: SourceRating) -> tuple[float, float]:
    """Map a normalized rating back onto the raw scales."""
    return rating.credibility * RAW_RELIABILITY_MAX, rating.bias * RAW_BIAS_MAX


def _domain_candidates(host: str) -> list[str]:
    host = host.lower()
    out = [host]
    if host.startswith("www."):
        out.append(host[4:])
    labels = host.split(".")
    if len(labels) > 2:
        tail = ".".join(labels[-2:])
        if tail not in out:
            out.append(tail)
    return out


def rate_post(post: Post, ratings: dict[str, SourceRating]) -> tuple[float, float] | None:
    """Look up (credibility, bias) for a post's source domain.

    Tries the exact host, the host without a leading www, then the last two
    labels as a registrable-domain fallback.  Posts without a source domain or
    without a match are unverifiable (None)."""
    if not post.source_domain:
        return None
    for candidate in _domain_candidates(post.source_domain):
        hit = ratings.get(normalize_domain(candidate))
        if hit is not None:
            return hit.credibility, hit.bias
    return None


@dataclass
class PruneSummary:
    invalid_comments: int = 0
    deleted_posts: int = 0
    deleted_comments: int = 0
    short_comments: int = 0
    orphaned_comments: int = 0
    low_activity_comments: int = 0
    low_activity_users: int = 0
    empty_posts: int = 0
    iterations: int = 0
    retained_posts: int = 0
    retained_comments: int = 0
    retained_users: int = 0

    def as_dict(self) -> dict:
        return dict(sorted(self.__dict__.items()))


@dataclass
class Corpus:
    """A pruned, internally consistent corpus plus per-post ratings."""

    posts: dict[str, Post]
    comments: dict[str, Comment]
    ratings: dict[str, tuple[float, float]] = field(default_factory=dict)

    def users(self) -> list[str]:
        return sorted({c.author for c in self.comments.values()})

    def comments_of_user(self, user: str) -> list[Comment]:
        mine = [c for c in self.comments.values() if c.author == user]
        mine.sort(key=lambda c: (c.created_at, c.id))
        return mine

    def is_verifiable(self, post_id: str) -> bool:
        return post_id in self.ratings

    def verifiable_fraction(self) -> float:
        if not self.posts:
            return 0.0
        return len(self.ratings) / len(self.posts)

    def with_ratings(self, table: dict[str, SourceRating]) -> "Corpus":
        rated = {}
        for pid in sorted(self.posts):
            hit = rate_post(self.posts[pid], table)
            if hit is not None:
                rated[pid] = hit
        return replace(self, ratings=rated)


def _year_of(timestamp: int) -> int:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).year


def _user_passes(comments: list[Comment], minimum: int, year_mode: str) -> bool:
    per_year = Counter(_year_of(c.created_at) for c in comments)
    if not per_year:
        return False
    if year_mode == "any":
        return max(per_year.values()) >= minimum
    return min(per_year.values()) >= minimum


def prune_corpus(
    posts: list[Post],
    comments: list[Comment],
    *,
    min_words: int = 3,
    min_user_comments: int = 10,
    year_mode: str = "any",
    strict: bool = False,
) -> tuple[Corpus, PruneSummary]:
    """Assemble and prune a corpus until every activity rule holds at once.

    Rules: comments need at least ``min_words`` whitespace-separated words;
    users need at least ``min_user_comments`` comments within one calendar
    year (mode "any") or within every calendar year they are active in (mode
    "every"); replies whose ancestor chain was broken by removal go too; posts
    with no surviving comments are dropped.  Rules are re-applied until
    nothing changes, so pruning is idempotent.  Comments with unknown posts,
    unknown parents or cyclic parent chains are invalid: fatal in strict mode,
    dropped and counted otherwise.
    """
    if year_mode not in ("any", "every"):
        raise ValueError(f"unknown year_mode: {year_mode!r}")
    summary = PruneSummary()
    post_map = {p.id: p for p in posts}
    if len(post_map) != len(posts):
        raise ParseError("duplicate post ids in input")

    comment_map: dict[str, Comment] = {}
    for c in comments:
        if c.id in comment_map:
            raise ParseError(f"duplicate comment id {c.id}")
        comment_map[c.id] = c

    # Validate reply structure: every parent chain must end at the post,
    # stay within the same post, and contain no cycles.
    valid: set[str] = set()
    for cid in comment_map:
        chain = []
        cur = cid
        ok = True
        why = ""
        while True:
            c = comment_map[cur]
            if c.post_id not in post_map:
                ok, why = False, f"comment {cur} references unknown post {c.post_id}"
                break
            if c.parent_id == c.post_id:
                break
            parent = comment_map.get(c.parent_id)
            if parent is None:
                ok, why = False, f"comment {cur} references unknown parent {c.parent_id}"
                break
            if parent.post_id != c.post_id:
                ok, why = False, f"comment {cur} replies across posts"
                break
            if parent.id in chain or parent.id == cid:
                ok, why = False, f"comment {cid} sits on a cyclic parent chain"
                break
            if parent.id in valid:
                break
            chain.append(cur)
            cur = parent.id
        if ok:
            valid.add(cid)
            valid.update(chain)
        else:
            if strict:
                raise ParseError(why)
            log.debug("dropping invalid comment: %s", why)
    summary.invalid_comments = len(comment_map) - len(valid)

    alive = {cid for cid in comment_map if cid in valid}
    for cid in sorted(alive):
        if len(comment_map[cid].body.split()) < min_words:
            alive.discard(cid)
            summary.short_comments += 1

    removed_users: set[str] = set()
    alive_posts = set(post_map)
    while True:
        summary.iterations += 1
        changed = False

        # replies whose parent was pruned (transitively, via repetition)
        for cid in sorted(alive):
            c = comment_map[cid]
            if c.parent_id != c.post_id and c.parent_id not in alive:
                alive.discard(cid)
                summary.orphaned_comments += 1
                changed = True

        by_user: dict[str, list[Comment]] = {}
        for cid in alive:
            c = comment_map[cid]
            by_user.setdefault(c.author, []).append(c)
        for user, cs in sorted(by_user.items()):
            if not _user_passes(cs, min_user_comments, year_mode):
                for c in cs:
                    alive.discard(c.id)
                summary.low_activity_comments += len(cs)
                if user not in removed_users:
                    removed_users.add(user)
                    summary.low_activity_users += 1
                changed = True

        posts_with_comments = {comment_map[cid].post_id for cid in alive}
        dead_posts = alive_posts - posts_with_comments
        if dead_posts:
            alive_posts -= dead_posts
            summary.empty_posts += len(dead_posts)
            changed = True

        if not changed:
            break

    kept_posts = {pid: post_map[pid] for pid in sorted(alive_posts)}
    kept_comments = {cid: comment_map[cid] for cid in sorted(alive)}
    corpus = Corpus(posts=kept_posts, comments=kept_comments)
    summary.retained_posts = len(kept_posts)
    summary.retained_comments = len(kept_comments)
    summary.retained_users = len(corpus.users())
    if not kept_posts or not kept_comments:
        raise EmptyCorpusError("no posts or comments survived pruning")
    return corpus, summary
