"""HTTP service for text embeddings and stance classification."""

from .app import create_app
from .encoders import HashEncoder, ModelNotLoadedError, SbertEncoder
from .stance import (
    GenerativeStance,
    MarkerStance,
    PROMPT_TEMPLATE,
    build_hf_stance,
    parse_completion,
    render_prompt,
)

__all__ = [
    "create_app",
    "HashEncoder",
    "SbertEncoder",
    "ModelNotLoadedError",
    "MarkerStance",
    "GenerativeStance",
    "build_hf_stance",
    "render_prompt",
    "parse_completion",
    "PROMPT_TEMPLATE",
]
