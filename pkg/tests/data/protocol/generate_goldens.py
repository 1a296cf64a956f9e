"""Regenerate goldens.json from the in-process mock provider.

The mock is the reference implementation of the wire protocol; both the mock
HTTP stub and the standalone service are held to these fixtures.  Run from
the repository root:

    python3 tests/data/protocol/generate_goldens.py
"""

import json
from pathlib import Path

from echoscope.providers import MockProvider, StanceItem, hash_unit_vector

DIM = 8

EMBED_BATCHES = [
    ["solar farms expand nationwide"],
    ["AGREE: valid point", "DISAGREE: not even close", "just passing through"],
    ["a", "étude on grid fees 漢字", "x" * 300],
]

STANCE_BATCHES = [
    [
        {"post": "p", "parent": "p", "comment": "AGREE: sensible plan"},
        {"post": "p", "parent": "q", "comment": "DISAGREE: flawed numbers"},
        {"post": "p", "parent": "q", "comment": "who knows"},
    ],
    [
        {"post": "title", "parent": "AGREE: parent marker ignored",
         "comment": "   AGREE: markers survive leading space"},
        {"post": "title", "parent": "body", "comment": "AGREEABLE but no colon"},
    ],
]


def main() -> None:
    provider = MockProvider(dim=DIM)
    golden = {
        "dim": DIM,
        "embed": [
            {
                "request": {"texts": texts},
                "response": {
                    "embeddings": [hash_unit_vector(t, DIM).tolist() for t in texts],
                    "dim": DIM,
                },
            }
            for texts in EMBED_BATCHES
        ],
        "stance": [
            {
                "request": {"items": items},
                "response": {
                    "stances": [
                        s.label
                        for s in provider.detect_stances(
                            [StanceItem(**i) for i in items]
                        )
                    ]
                },
            }
            for items in STANCE_BATCHES
        ],
        "health": {
            "status": "ok",
            "dim": DIM,
            "models": {"embedding": "hash-v1", "stance": "marker-v1"},
        },
    }
    out = Path(__file__).with_name("goldens.json")
    out.write_text(json.dumps(golden, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
