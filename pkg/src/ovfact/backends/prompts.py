"""Versioned parser prompt templates.

The parse wire protocol sends only a ``prompt_id``; the serving side resolves
it to the full template. The registry here is the canonical mapping so that
operators can audit exactly what a given id asks the model to do, and so that
changing the wording forces a new id (and therefore new cache keys and a new
config fingerprint).

Never edit a released template in place. Add a new id.
"""

from __future__ import annotations

from ..errors import ConfigError

DEFAULT_PROMPT_ID = "entity-extraction-v1"

_PROMPTS: dict[str, str] = {
    "entity-extraction-v1": (
        "You will be given one image caption. List every concrete, visible "
        "object or visual entity the caption asserts is in the image, one "
        "per line.\n"
        "Keep attribute-qualified phrases intact (write \"red blanket\", not "
        "\"blanket\").\n"
        "Do not list abstract notions, moods, actions, or things the caption "
        "says are absent.\n"
        "Do not repeat an entity.\n"
        "Output only the list, one entity per line, with no numbering or "
        "extra text.\n"
        "\n"
        "Caption: {caption}\n"
    ),
}


def get_prompt(prompt_id: str) -> str:
    """Return the template for ``prompt_id``; unknown ids are config errors."""
    try:
        return _PROMPTS[prompt_id]
    except KeyError:
        raise ConfigError(
            f"unknown prompt id {prompt_id!r}; known: {sorted(_PROMPTS)}"
        ) from None


def known_prompt_ids() -> tuple[str, ...]:
    return tuple(sorted(_PROMPTS))
