"""Flat ``key = value`` run configuration.

Lines are ``key = value``; blank lines and text after ``#`` are ignored.
A value containing a comma is a list. Each scalar is read as ``none``,
``true``/``false``, an int, a float, or otherwise kept as a string.
Dotted keys group settings, e.g. ``gbdt.max_leaves`` or ``tune.gbdt.l2_leaf``.
"""
from __future__ import annotations

import re
from importlib import resources

_KEY = re.compile(r"^[a-z_][a-z0-9_]*(\.[a-z_][a-z0-9_]*)*$")
_INT = re.compile(r"^[+-]?\d+$")
_SECTIONS = ("corpus", "split", "logistic", "svm_linear", "gbdt", "bilstm", "tune")


class ConfigError(ValueError):
    pass


def parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low == "none":
        return None
    if low in ("true", "false"):
        return low == "true"
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not _KEY.match(key):
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if "." in key and key.split(".", 1)[0] not in _SECTIONS:
            raise ConfigError(f"{source}:{lineno}: unknown section in {key!r}")
        if "," in value:
            out[key] = [parse_scalar(v) for v in value.split(",")]
        else:
            out[key] = parse_scalar(value)
    return out


def defaults() -> dict:
    text = resources.files("sentibench.data").joinpath("default.cfg").read_text(encoding="utf-8")
    return parse_config(text, "default.cfg")


def load_config(path=None, overrides=None) -> dict:
    """Shipped defaults, then the file at ``path``, then ``overrides``."""
    cfg = defaults()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            cfg.update(parse_config(fh.read(), str(path)))
    cfg.update(overrides or {})
    return cfg


def section(cfg: dict, prefix: str) -> dict:
    """Keys under ``prefix.`` with the prefix removed (direct children only)."""
    head = prefix + "."
    return {k[len(head):]: v for k, v in cfg.items() if k.startswith(head) and "." not in k[len(head):]}


def as_list(value) -> list:
    return list(value) if isinstance(value, list) else [value]
