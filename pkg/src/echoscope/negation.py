"""Affine negation model: learns x -> Ax + b from entailment/negation pairs.

The fit minimizes mean squared residual plus a ridge penalty,
mean ||A x_i + b - y_i||^2 + lambda (||A||_F^2 + ||b||^2),
solved in closed form on homogeneous coordinates.  Training pairs come from
sentence triplets (premise, entailment, negation): premise->negation and
entailment->negation, so each triplet contributes two pairs.
"""

from __future__ import annotations

import io
import json
import logging
import random
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, SingularSystemError

log = logging.getLogger(__name__)

MODEL_MAGIC = b"ANMODEL1\n"


@dataclass(frozen=True)
class Triplet:
    premise: str
    entailment: str
    negation: str


@dataclass
class NegationModel:
    A: np.ndarray
    b: np.ndarray
    ridge_lambda: float
    pair_count: int

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def negate(self, x: np.ndarray) -> np.ndarray:
        """Apply the learned map to one vector or a stack of row vectors."""
        return x @ self.A.T + self.b


@dataclass
class EvalReport:
    mse: float
    mean_cosine: float
    signflip_mean_cosine: float
    n_pairs: int


def load_triplets(lines, *, strict: bool = False) -> tuple[list[Triplet], list[str]]:
    """Parse a JSONL triplet stream with fields premise, entailment, negation."""
    triplets: list[Triplet] = []
    issues: list[str] = []
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            if strict:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no=line_no)
            issues.append(f"line {line_no}: invalid JSON")
            continue
        fields = []
        for key in ("premise", "entailment", "negation"):
            value = record.get(key) if isinstance(record, dict) else None
            if not isinstance(value, str) or not value.strip():
                value = None
            fields.append(value)
        if any(f is None for f in fields):
            if strict:
                raise ParseError("triplet is missing premise, entailment or negation", line_no=line_no)
            issues.append(f"line {line_no}: incomplete triplet")
            continue
        triplets.append(Triplet(*fields))
    return triplets, issues


def split_triplets(triplets: list[Triplet], *, train_fraction: float = 0.9, seed: int = 0):
    """Shuffle triplets with a seeded RNG and split before pair expansion.

    Splitting at the triplet level keeps both pairs of a triplet on the same
    side, so the held-out score is not inflated by near-duplicates.
    """
    order = list(range(len(triplets)))
    random.Random(seed).shuffle(order)
    cut = int(round(train_fraction * len(order)))
    train = [triplets[i] for i in order[:cut]]
    held = [triplets[i] for i in order[cut:]]
    return train, held


def triplets_to_pairs(triplets: list[Triplet]) -> list[tuple[str, str]]:
    """Expand each triplet into (premise, negation) and (entailment, negation)."""
    pairs = []
    for t in triplets:
        pairs.append((t.premise, t.negation))
        pairs.append((t.entailment, t.negation))
    return pairs


def fit_affine(X: np.ndarray, Y: np.ndarray, ridge_lambda: float = 1e-6) -> NegationModel:
    """Closed-form ridge fit of Y ~= X A^T + b.

    Stacks [X, 1] and solves the regularized normal equations
    (Xh^T Xh / N + lambda I) W^T = Xh^T Y / N with W = [A, b].  A singular or
    non-finite system raises :class:`SingularSystemError`.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape != Y.shape:
        raise ValueError(f"X and Y must be matching 2-d arrays, got {X.shape} and {Y.shape}")
    n, d = X.shape
    if n == 0:
        raise SingularSystemError("cannot fit the negation map with zero pairs")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be nonnegative")
    Xh = np.hstack([X, np.ones((n, 1))])
    gram = (Xh.T @ Xh) / n + ridge_lambda * np.eye(d + 1)
    rhs = (Xh.T @ Y) / n
    if not np.all(np.isfinite(gram)) or not np.all(np.isfinite(rhs)):
        raise SingularSystemError("non-finite values in the normal equations")
    try:
        Wt = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"normal equations are singular: {exc}") from exc
    W = Wt.T
    return NegationModel(A=np.ascontiguousarray(W[:, :d]), b=np.ascontiguousarray(W[:, d]), ridge_lambda=ridge_lambda, pair_count=n)


def evaluate(model: NegationModel, X: np.ndarray, Y: np.ndarray) -> EvalReport:
    """Held-out diagnostics for a fitted map.

    mse is the element-wise mean squared residual (squared error summed over
    coordinates, divided by pairs times dimension).  mean_cosine compares
    predictions with targets; signflip_mean_cosine compares predictions with
    the inputs, a sanity check that the map does more than copy.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape or X.ndim != 2:
        raise ValueError("X and Y must be matching 2-d arrays")
    n, d = X.shape
    if n == 0:
        raise ValueError("cannot evaluate with zero pairs")
    pred = model.negate(X)
    resid = pred - Y
    mse = float(np.sum(resid * resid) / (n * d))
    mean_cos = float(np.mean(_row_cosines(pred, Y)))
    signflip = float(np.mean(_row_cosines(pred, X)))
    return EvalReport(mse=mse, mean_cosine=mean_cos, signflip_mean_cosine=signflip, n_pairs=n)


def _row_cosines(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    num = np.sum(P * Q, axis=1)
    den = np.sqrt(np.sum(P * P, axis=1)) * np.sqrt(np.sum(Q * Q, axis=1))
    out = np.zeros_like(num)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def save_model_bytes(model: NegationModel) -> bytes:
    """Serialize the model: magic, JSON header line, then A and b as
    little-endian float64 in row-major order."""
    header = json.dumps(
        {"dim": model.dim, "lambda": model.ridge_lambda, "pair_count": model.pair_count},
        sort_keys=True,
    )
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(header.encode("utf-8"))
    buf.write(b"\n")
    buf.write(np.ascontiguousarray(model.A, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(model.b, dtype="<f8").tobytes())
    return buf.getvalue()


def save_model(model: NegationModel, path):
    with open(path, "wb") as fh:
        fh.write(save_model_bytes(model))


def load_model(path) -> NegationModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MODEL_MAGIC):
        raise ParseError(f"{path}: not a negation model file")
    rest = blob[len(MODEL_MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise ParseError(f"{path}: truncated model header")
    try:
        header = json.loads(rest[:nl].decode("utf-8"))
        dim = int(header["dim"])
        lam = float(header["lambda"])
        pair_count = int(header["pair_count"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: bad model header: {exc}")
    body = rest[nl + 1:]
    expect = (dim * dim + dim) * 8
    if len(body) != expect:
        raise ParseError(f"{path}: model body is {len(body)} bytes, expected {expect}")
    A = np.frombuffer(body[: dim * dim * 8], dtype="<f8").reshape(dim, dim).copy()
    b = np.frombuffer(body[dim * dim * 8 :], dtype="<f8").copy()
    return NegationModel(A=A, b=b, ridge_lambda=lam, pair_count=pair_count)
