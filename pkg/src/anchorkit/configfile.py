"""Plain-text run-configuration records.

One ``key = value`` pair per line; ``#`` starts a comment.  Dotted keys nest
(``op.kind = rotation2d``) and values are parsed as JSON where possible
(numbers, quoted strings, ``[[0, 1], [-1, 0]]`` style nested lists for
matrices), falling back to the bare string.
"""

from __future__ import annotations

import json
import re

from .errors import ConfigParseError

_KEY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_config(text: str) -> dict:
    """Parse a config record into a nested dict."""
    result: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if not _KEY_RE.match(key):
            raise ConfigParseError(f"bad key {key!r}", line=lineno)
        node = result
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigParseError(f"key {key!r} collides with a scalar",
                                       line=lineno, field=part)
        leaf = parts[-1]
        if leaf in node and isinstance(node[leaf], dict):
            raise ConfigParseError(f"key {key!r} collides with a section",
                                   line=lineno, field=leaf)
        node[leaf] = _parse_value(value.strip())
    return result


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigParseError(f"cannot read config file {path!r}: {exc}")
