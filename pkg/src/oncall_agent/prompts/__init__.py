"""Versioned prompt templates, loaded from package resources."""

from importlib import resources


def load_prompt(name: str) -> str:
    """Return the prompt template text for ``name`` (identify|generate|review)."""
    return (
        resources.files(__package__).joinpath(f"{name}.md").read_text(encoding="utf-8")
    )


IDENTIFY = load_prompt("identify")
GENERATE = load_prompt("generate")
REVIEW = load_prompt("review")
