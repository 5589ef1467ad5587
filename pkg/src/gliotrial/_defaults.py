"""Packaged default settings, deep-merged under user configs."""

from __future__ import annotations

import copy
from functools import lru_cache
from importlib import resources

import yaml


@lru_cache(maxsize=1)
def _raw() -> dict:
    text = resources.files("gliotrial").joinpath("defaults.yaml").read_text()
    return yaml.safe_load(text)


def load_defaults() -> dict:
    """A fresh copy of the packaged defaults tree."""
    return copy.deepcopy(_raw())


def deep_merge(base: dict, override: dict) -> dict:
    """Return base with override laid on top, recursing into dicts."""
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out
