"""Reference check of the affine negation model on real encoder output.

Needs two things the repository cannot ship: a public negation-triplet
dataset and pretrained sentence-encoder weights.  Point
ECHOSCOPE_SNLI_TRIPLETS at the triplets JSONL (and optionally
ECHOSCOPE_SBERT_MODEL at an encoder name, default all-MiniLM-L6-v2) to run
it; otherwise it skips.  Reference values: held-out MSE near 5e-4, mean
cosine near 0.79, sign-flip baseline near -0.12.
"""

import os
from pathlib import Path

import numpy as np
import pytest

from nlp_provider_service import SbertEncoder

TRIPLETS_PATH = os.environ.get("ECHOSCOPE_SNLI_TRIPLETS")

pytestmark = pytest.mark.skipif(
    not TRIPLETS_PATH,
    reason="set ECHOSCOPE_SNLI_TRIPLETS to a negation-triplets JSONL file "
    "(and optionally ECHOSCOPE_SBERT_MODEL) to run the reference check",
)


def _embed_pairs(encoder, triplets):
    from echoscope.negation import triplets_to_pairs

    pairs = triplets_to_pairs(triplets)
    X = np.array(encoder.encode([a for a, _ in pairs]), dtype=np.float64)
    Y = np.array(encoder.encode([b for _, b in pairs]), dtype=np.float64)
    return X, Y


def test_negation_reference_bounds():
    from echoscope.negation import evaluate, fit_affine, load_triplets, split_triplets

    encoder = SbertEncoder(
        os.environ.get("ECHOSCOPE_SBERT_MODEL", "sentence-transformers/all-MiniLM-L6-v2")
    )
    lines = Path(TRIPLETS_PATH).read_text(encoding="utf-8").splitlines()
    triplets, issues = load_triplets(lines)
    assert triplets and not issues

    train, held = split_triplets(triplets, train_fraction=0.9, seed=0)
    X, Y = _embed_pairs(encoder, train)
    Xh, Yh = _embed_pairs(encoder, held)

    model = fit_affine(X, Y, ridge_lambda=1e-6)
    report = evaluate(model, Xh, Yh)
    assert 2e-4 <= report.mse <= 1e-3
    assert report.mean_cosine >= 0.70

    # baseline model x -> -x, compared against the true negation targets
    num = np.sum(-Xh * Yh, axis=1)
    den = np.linalg.norm(Xh, axis=1) * np.linalg.norm(Yh, axis=1)
    assert float(np.mean(num / den)) < 0.2
