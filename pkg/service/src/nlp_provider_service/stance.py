"""Stance classifiers served over the stance endpoint.

A classifier takes (post, parent, comment) triples and returns one of the four
labels ``favor``, ``against``, ``none``, ``unsure``.  The marker classifier is
deterministic and weight-free; the generative one renders each triple into a
fixed prompt, asks a causal language model for a short greedy completion, and
keyword-matches the result.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Callable

from .encoders import ModelNotLoadedError

LABELS = ("favor", "against", "none", "unsure")

_TEMPLATE_PATH = Path(__file__).with_name("prompt_template.txt")
PROMPT_TEMPLATE = _TEMPLATE_PATH.read_text(encoding="utf-8")

_LABEL_RE = re.compile(r"\b(favor|against|none|unsure)", re.IGNORECASE)


def render_prompt(post: str, parent: str, comment: str) -> str:
    """Substitute the three fields into the prompt template.

    Plain string replacement, not ``str.format``: field text is embedded
    as-is, so braces or newlines inside a comment cannot break rendering.
    """
    return (
        PROMPT_TEMPLATE
        .replace("{post}", post)
        .replace("{parent}", parent)
        .replace("{comment}", comment)
    )


def parse_completion(text: str) -> str | None:
    """First stance keyword in the text at a word boundary, or None.

    Matches are case-insensitive and ordered by position, so a completion
    like "not none but AGAINST" parses as none.  Returns the lowercase label.
    """
    m = _LABEL_RE.search(text or "")
    return m.group(1).lower() if m else None


class MarkerStance:
    """Reads the stance off an explicit marker prefix on the comment.

    ``AGREE:`` maps to favor, ``DISAGREE:`` to against, ``SHRUG:`` to unsure,
    anything else to none.  Leading whitespace is ignored.  Useful for tests
    and for exercising clients without model weights.
    """

    name = "marker-v1"

    def classify(self, post: str, parent: str, comment: str) -> str:
        body = comment.lstrip()
        if body.startswith("AGREE:"):
            return "favor"
        if body.startswith("DISAGREE:"):
            return "against"
        if body.startswith("SHRUG:"):
            return "unsure"
        return "none"


class GenerativeStance:
    """Prompted language-model classifier.

    ``generate`` maps a rendered prompt to the completion text (new tokens
    only).  Completions that contain no recognizable label, and generation
    calls that raise, both yield ``unsure``; ``errors`` counts the latter so
    operators can spot a broken model behind an otherwise healthy endpoint.
    """

    def __init__(self, generate: Callable[[str], str], name: str):
        self._generate = generate
        self.name = name
        self.errors = 0

    def classify(self, post: str, parent: str, comment: str) -> str:
        prompt = render_prompt(post, parent, comment)
        try:
            completion = self._generate(prompt)
        except Exception:
            self.errors += 1
            return "unsure"
        return parse_completion(completion) or "unsure"


def build_hf_stance(model_name: str, adapter: str | None = None,
                    max_new_tokens: int = 7) -> GenerativeStance:
    """Load a Hugging Face causal LM (optionally with a LoRA adapter).

    Decoding is greedy and capped at ``max_new_tokens`` new tokens, enough to
    spell any of the labels.  Raises :class:`ModelNotLoadedError` when the
    model, tokenizer, or adapter cannot be loaded.
    """
    try:
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        tokenizer = AutoTokenizer.from_pretrained(model_name)
        model = AutoModelForCausalLM.from_pretrained(model_name)
        if adapter is not None:
            try:
                from peft import PeftModel
            except ImportError as exc:
                raise ModelNotLoadedError(
                    "adapter support requires the peft package"
                ) from exc
            model = PeftModel.from_pretrained(model, adapter)
        model.eval()
    except ModelNotLoadedError:
        raise
    except Exception as exc:
        raise ModelNotLoadedError(
            f"stance model {model_name!r} is not loaded: {exc}"
        ) from exc

    pad_id = tokenizer.pad_token_id
    if pad_id is None:
        pad_id = tokenizer.eos_token_id

    def generate(prompt: str) -> str:
        inputs = tokenizer(prompt, return_tensors="pt")
        with torch.inference_mode():
            out = model.generate(
                **inputs,
                max_new_tokens=max_new_tokens,
                do_sample=False,
                num_beams=1,
                pad_token_id=pad_id,
            )
        new_tokens = out[0][inputs["input_ids"].shape[1]:]
        return tokenizer.decode(new_tokens, skip_special_tokens=True)

    label = model_name if adapter is None else f"{model_name}+{adapter}"
    return GenerativeStance(generate, name=label)
