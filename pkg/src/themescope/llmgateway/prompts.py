"""Versioned prompt templates with strict slot rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources


class TemplateError(KeyError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: str
    body: str

    def render(self, **slots: str) -> str:
        # Byte-stable for identical inputs; a missing slot is an error.
        def sub(match: re.Match) -> str:
            name = match.group(1)
            if name not in slots:
                raise TemplateError(
                    f"template {self.template_id} v{self.version}: "
                    f"missing slot {name!r}")
            return str(slots[name])

        return re.sub(r"\{([a-z_0-9]+)\}", sub, self.body)

    def slot_names(self) -> set[str]:
        return set(re.findall(r"\{([a-z_0-9]+)\}", self.body))


_CACHE: dict[str, PromptTemplate] = {}

ROLES = ("coherency", "summarize", "theme_label", "assign", "judge",
         "stance_txt", "stance_thm", "stance_txt_thm")


def load_template(role: str, version: str = "v1") -> PromptTemplate:
    key = f"{role}_{version}"
    if key not in _CACHE:
        if role not in ROLES:
            raise TemplateError(f"unknown template role {role!r}")
        path = resources.files(__package__).joinpath(f"templates/{key}.txt")
        _CACHE[key] = PromptTemplate(role, version, path.read_text("utf-8"))
    return _CACHE[key]


def template_versions() -> dict[str, str]:
    return {role: "v1" for role in ROLES}
