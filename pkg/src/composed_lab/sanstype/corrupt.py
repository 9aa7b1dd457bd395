"""Line-level perturbations of SansType code, used to build denoiser training pairs."""

from __future__ import annotations

import re

import numpy as np

from ..errors import InvalidInput
from .program import TYPES

CORRUPTIONS = ("type_replace", "type_delete", "type_insert", "drop_arrows", "reverse_arrows", "drop_cout")

_DECL = re.compile(r"^(\s*)(int|string|bool) (?!main\b)(\w+)")
_ASSIGN = re.compile(r"^(\s*)(?!(?:int|string|bool|cin|cout|if|return)\b)(\w+) = ")
_COUT = re.compile(r"^(\s*)cout << ")
_CIN = re.compile(r"^(\s*)cin >> ")


def _sites(lines: list[str], kind: str) -> list[int]:
    if kind in ("type_replace", "type_delete"):
        pattern = _DECL
    elif kind == "type_insert":
        pattern = _ASSIGN
    elif kind == "drop_cout":
        pattern = _COUT
    else:
        return [i for i, line in enumerate(lines) if _COUT.match(line) or _CIN.match(line)]
    return [i for i, line in enumerate(lines) if pattern.match(line)]


def applicable(code: str) -> list[str]:
    """Corruption kinds that have at least one site in code."""
    lines = code.split("\n")
    return [k for k in CORRUPTIONS if _sites(lines, k)]


def _apply(line: str, kind: str, rng: np.random.Generator) -> str:
    if kind == "type_replace":
        m = _DECL.match(line)
        new = [t for t in TYPES if t != m.group(2)][int(rng.integers(len(TYPES) - 1))]
        return f"{m.group(1)}{new} {m.group(3)}{line[m.end():]}"
    if kind == "type_delete":
        m = _DECL.match(line)
        return f"{m.group(1)}{m.group(3)}{line[m.end():]}"
    if kind == "type_insert":
        m = _ASSIGN.match(line)
        ty = TYPES[int(rng.integers(len(TYPES)))]
        return f"{m.group(1)}{ty} {line[len(m.group(1)):]}"
    if kind == "drop_arrows":
        return line.replace("<< ", "", 1) if _COUT.match(line) else line.replace(">> ", "", 1)
    if kind == "reverse_arrows":
        return line.replace("<<", ">>", 1) if _COUT.match(line) else line.replace(">>", "<<", 1)
    if kind == "drop_cout":
        return line.replace("cout ", "", 1)
    raise InvalidInput(f"unknown corruption {kind!r}")


def corrupt_with_kind(code: str, rng: np.random.Generator, kind: str | None = None) -> tuple[str, str]:
    """Apply one perturbation at a uniformly chosen site.

    Without kind, the kind is drawn uniformly from those applicable to code.
    Returns the corrupted text and the kind used.
    """
    lines = code.split("\n")
    if kind is None:
        kinds = applicable(code)
        if not kinds:
            raise InvalidInput("code has no site any corruption applies to")
        kind = kinds[int(rng.integers(len(kinds)))]
    elif kind not in CORRUPTIONS:
        raise InvalidInput(f"unknown corruption {kind!r}; expected one of {CORRUPTIONS}")
    sites = _sites(lines, kind)
    if not sites:
        raise InvalidInput(f"corruption {kind!r} has no site in this code")
    i = sites[int(rng.integers(len(sites)))]
    lines[i] = _apply(lines[i], kind, rng)
    return "\n".join(lines), kind


def corrupt(code: str, rng: np.random.Generator, kind: str | None = None) -> str:
    """Corrupted copy of code; always differs from the input."""
    return corrupt_with_kind(code, rng, kind)[0]
