"""Command line entry point: build the configured models and serve them."""

from __future__ import annotations

import click
import uvicorn

from .app import create_app
from .encoders import HashEncoder, SbertEncoder
from .stance import MarkerStance, build_hf_stance


@click.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--encoder", default="hash", show_default=True,
              help="'hash' for the weight-free hash encoder, anything else "
                   "is treated as a sentence-transformers model name.")
@click.option("--dim", default=768, show_default=True, type=int,
              help="Embedding width for the hash encoder (ignored for "
                   "model-backed encoders, which fix their own width).")
@click.option("--stance-model", default="marker", show_default=True,
              help="'marker' for the prefix-marker classifier, 'none' to "
                   "disable the stance endpoint, anything else is treated "
                   "as a causal LM name for prompted classification.")
@click.option("--adapter", default=None,
              help="Optional LoRA adapter path or name applied to the "
                   "stance model.")
@click.option("--max-batch", default=256, show_default=True, type=int,
              help="Largest accepted batch; bigger requests get 413.")
def main(host, port, encoder, dim, stance_model, adapter, max_batch):
    """Serve text embeddings and stance classification over HTTP."""
    if encoder == "hash":
        enc = HashEncoder(dim=dim)
    else:
        enc = SbertEncoder(encoder)

    if stance_model == "marker":
        stance = MarkerStance()
    elif stance_model == "none":
        stance = None
    else:
        stance = build_hf_stance(stance_model, adapter=adapter)

    app = create_app(enc, stance=stance, max_batch=max_batch)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
