"""Deterministic prompt construction from text templates.

Templates are plain text files with ``{name}`` placeholders and live next to a
manifest naming the placeholders each template may use. Files are parsed once
into literal/placeholder segments; binding values are inserted literally and
never re-scanned, so braces inside requirement text cannot open a placeholder.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Union

from .errors import PromptError
from .model import QualityCharacteristic, Requirement

PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

EVALUATION = "Evaluation"
GENERATION = "Generation"


@dataclass(frozen=True)
class PromptText:
    text: str
    template_id: str
    variable_bindings: tuple[tuple[str, str], ...]

    def binding(self, name: str) -> str:
        return dict(self.variable_bindings)[name]


@dataclass(frozen=True)
class _Template:
    template_id: str
    segments: tuple[Union[str, tuple[str]], ...]  # str literal or 1-tuple (placeholder,)
    placeholders: frozenset[str]

    def render(self, bindings: Mapping[str, str]) -> PromptText:
        missing = self.placeholders - set(bindings)
        if missing:
            raise PromptError(
                "missing-binding",
                f"template {self.template_id} needs values for {sorted(missing)}",
            )
        parts: list[str] = []
        for segment in self.segments:
            if isinstance(segment, str):
                parts.append(segment)
            else:
                parts.append(bindings[segment[0]])
        return PromptText(
            text="".join(parts),
            template_id=self.template_id,
            variable_bindings=tuple(sorted((k, bindings[k]) for k in self.placeholders)),
        )


def _parse_template(template_id: str, raw: str, allowed: set[str]) -> _Template:
    segments: list[Union[str, tuple[str]]] = []
    pos = 0
    for match in PLACEHOLDER_RE.finditer(raw):
        name = match.group(1)
        if name not in allowed:
            raise PromptError(
                "unknown-placeholder",
                f"template {template_id} uses {{{name}}} which the manifest does not declare",
            )
        if match.start() > pos:
            segments.append(raw[pos : match.start()])
        segments.append((name,))
        pos = match.end()
    if pos < len(raw):
        segments.append(raw[pos:])
    literal = "".join(s for s in segments if isinstance(s, str))
    if "{" in literal or "}" in literal:
        raise PromptError(
            "stray-brace",
            f"template {template_id} contains a brace outside any declared placeholder",
        )
    used = frozenset(s[0] for s in segments if isinstance(s, tuple))
    undeclared = allowed - used
    if undeclared:
        raise PromptError(
            "unused-placeholder",
            f"template {template_id} never uses declared placeholders {sorted(undeclared)}",
        )
    return _Template(template_id=template_id, segments=tuple(segments), placeholders=used)


class TemplateSet:
    """The loaded evaluation and generation templates."""

    def __init__(self, templates: dict[str, _Template]) -> None:
        self._templates = templates

    @classmethod
    def load(cls, directory: Optional[Path] = None) -> "TemplateSet":
        """Load from a template directory; defaults to the bundled templates."""
        if directory is None:
            root = resources.files("reqqa.data").joinpath("templates")
            read = lambda name: root.joinpath(name).read_text("utf-8")
        else:
            read = lambda name: (directory / name).read_text("utf-8")
        try:
            manifest = json.loads(read("manifest.json"))
        except FileNotFoundError as exc:
            raise PromptError("manifest-missing", f"template manifest not found: {exc}") from exc
        templates: dict[str, _Template] = {}
        for template_id, entry in manifest["templates"].items():
            raw = read(entry["file"])
            templates[template_id] = _parse_template(template_id, raw, set(entry["placeholders"]))
        for required in (EVALUATION, GENERATION):
            if required not in templates:
                raise PromptError("template-missing", f"manifest does not define {required}")
        return cls(templates)

    def build_evaluation_prompt(
        self,
        scope: str,
        characteristic: QualityCharacteristic,
        requirement: Requirement,
    ) -> PromptText:
        if not scope.strip():
            raise PromptError("empty-scope", "project scope must be non-empty")
        if not requirement.text.strip():
            raise PromptError("empty-requirement", f"requirement {requirement.id!r} has empty text")
        return self._templates[EVALUATION].render(
            {
                "project_scope": scope,
                "characteristic_name": characteristic.key.value,
                "characteristic_definition": characteristic.definition,
                "requirement_text": requirement.text,
            }
        )

    def build_generation_prompt(
        self, scope: str, n_functional: int, n_nonfunctional: int
    ) -> PromptText:
        if not scope.strip():
            raise PromptError("empty-scope", "project scope must be non-empty")
        if n_functional < 0 or n_nonfunctional < 0:
            raise PromptError("negative-count", "requirement counts must be non-negative")
        if n_functional + n_nonfunctional < 1:
            raise PromptError("zero-requirements", "at least one requirement must be requested")
        return self._templates[GENERATION].render(
            {
                "project_scope": scope,
                "n_functional": str(n_functional),
                "n_nonfunctional": str(n_nonfunctional),
            }
        )


_default_templates: Optional[TemplateSet] = None


def default_templates() -> TemplateSet:
    global _default_templates
    if _default_templates is None:
        _default_templates = TemplateSet.load()
    return _default_templates


def build_evaluation_prompt(
    scope: str, characteristic: QualityCharacteristic, requirement: Requirement
) -> PromptText:
    return default_templates().build_evaluation_prompt(scope, characteristic, requirement)


def build_generation_prompt(scope: str, n_functional: int, n_nonfunctional: int) -> PromptText:
    return default_templates().build_generation_prompt(scope, n_functional, n_nonfunctional)
