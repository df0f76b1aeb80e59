"""Line-oriented key/value files shared by materials, stacks, geometries and sweeps.

Grammar::

    # comment
    [section optional-name]
    key = value
    key = value, value, value   # repeated keys allowed

Whitespace around tokens is ignored.  Values are returned as raw strings;
callers convert and validate.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Malformed input file.  ``line`` is 1-based, or None when not tied to a line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Entry:
    key: str
    value: str
    line: int


@dataclass
class Section:
    kind: str
    name: str | None
    line: int
    entries: list[Entry] = field(default_factory=list)

    def values(self, key: str) -> list[Entry]:
        return [e for e in self.entries if e.key == key]

    def single(self, key: str, required: bool = True) -> Entry | None:
        found = self.values(key)
        if len(found) > 1:
            raise ConfigError(f"duplicate key {key!r} in [{self.kind}]", found[1].line)
        if not found:
            if required:
                raise ConfigError(f"missing key {key!r} in [{self.kind}]", self.line)
            return None
        return found[0]


_HEADER = re.compile(r"^\[\s*([A-Za-z_][\w-]*)(?:\s+([^\]]+?))?\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][\w-]*)\s*=\s*(.*)$")


def parse_sections(text: str) -> list[Section]:
    sections: list[Section] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            kind, name = m.group(1).lower(), m.group(2)
            sections.append(Section(kind, name.strip() if name else None, lineno))
            continue
        m = _ENTRY.match(line)
        if m is None:
            raise ConfigError(f"cannot parse {raw.strip()!r}", lineno)
        if not sections:
            raise ConfigError("key/value line before any [section] header", lineno)
        value = m.group(2).strip()
        if not value:
            raise ConfigError(f"empty value for {m.group(1)!r}", lineno)
        sections[-1].entries.append(Entry(m.group(1).lower(), value, lineno))
    return sections


def to_float(entry: Entry) -> float:
    try:
        return float(entry.value)
    except ValueError:
        raise ConfigError(f"{entry.key}: expected a number, got {entry.value!r}", entry.line) from None


def split_fields(entry: Entry, n: int) -> list[str]:
    parts = [p.strip() for p in entry.value.split(",")]
    if len(parts) != n or not all(parts):
        raise ConfigError(f"{entry.key}: expected {n} comma-separated fields, got {entry.value!r}", entry.line)
    return parts


def check_keys(section: Section, allowed: set[str]) -> None:
    for e in section.entries:
        if e.key not in allowed:
            raise ConfigError(f"unknown key {e.key!r} in [{section.kind}]", e.line)
