"""Reader for exported model distribution files.

Format (UTF-8, LF line endings, ``#`` starts a comment)::

    space 4
    unsafe 2 3
    safe 0 1            # optional; must be the exact complement of unsafe
    model qwen-7b 0.7 0.2 0.05 0.05
    model qwen-0.5b 0.5 0.4 0.1 0.0

Each ``model`` row carries exactly ``size`` non-negative decimals summing to 1
within 1e-6; rows are renormalised on load.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..dist import FiniteDistribution, OutputSpace
from ..errors import ParseError, ValidationError

INPUT_TOL = 1e-6


def _indices(tokens: list[str], size: int, lineno: int, what: str) -> list[int]:
    out = []
    for tok in tokens:
        try:
            i = int(tok)
        except ValueError:
            raise ParseError(f"{what}: {tok!r} is not an integer index", lineno) from None
        if not 0 <= i < size:
            raise ParseError(f"{what}: index {i} outside space of size {size}", lineno)
        if i in out:
            raise ParseError(f"{what}: index {i} listed twice", lineno)
        out.append(i)
    return out


def parse_distributions(text: str) -> tuple[OutputSpace, list[FiniteDistribution], list[str]]:
    if "\r" in text:
        line = text[: text.index("\r")].count("\n") + 1
        raise ParseError("carriage return found; LF line endings required", line)
    lines = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body.split()))
    if not lines:
        raise ParseError("empty document")

    lineno, toks = lines[0]
    if toks[0] != "space" or len(toks) != 2:
        raise ParseError("first line must be 'space <size>'", lineno, 1)
    try:
        size = int(toks[1])
    except ValueError:
        raise ParseError(f"space size {toks[1]!r} is not an integer", lineno, 7) from None
    if size < 1:
        raise ParseError("space size must be positive", lineno, 7)

    if len(lines) < 2 or lines[1][1][0] != "unsafe":
        raise ParseError("second line must be 'unsafe <indices>'", lines[1][0] if len(lines) > 1 else lineno, 1)
    lineno, toks = lines[1]
    unsafe = _indices(toks[1:], size, lineno, "unsafe")
    rest = lines[2:]
    if rest and rest[0][1][0] == "safe":
        lineno, toks = rest[0]
        safe = _indices(toks[1:], size, lineno, "safe")
        overlap = sorted(set(safe) & set(unsafe))
        if overlap:
            raise ParseError(f"partition header: indices {overlap} are both safe and unsafe", lineno)
        missing = sorted(set(range(size)) - set(safe) - set(unsafe))
        if missing:
            raise ParseError(f"partition header: indices {missing} are neither safe nor unsafe", lineno)
        rest = rest[1:]
    space = OutputSpace(size, frozenset(unsafe))

    dists, ids = [], []
    for row, (lineno, toks) in enumerate(rest, start=1):
        if toks[0] != "model":
            raise ParseError(f"expected 'model <id> <probabilities>', got {toks[0]!r}", lineno, 1)
        if len(toks) != size + 2:
            raise ParseError(f"model row needs an id and {size} probabilities, got {len(toks) - 1} fields",
                             lineno)
        ident = toks[1]
        if ident in ids:
            raise ParseError(f"duplicate model id {ident!r}", lineno)
        try:
            probs = np.array([float(t) for t in toks[2:]])
        except ValueError as exc:
            raise ParseError(f"bad probability: {exc}", lineno) from None
        if not np.all(np.isfinite(probs)):
            raise ValidationError(f"model {ident!r} has a non-finite probability", row)
        if np.any(probs < 0):
            raise ValidationError(f"model {ident!r} has a negative probability", row)
        total = probs.sum()
        if abs(total - 1.0) > INPUT_TOL:
            raise ValidationError(f"model {ident!r} sums to {total:.9g}, not 1", row)
        dists.append(FiniteDistribution(probs / total))
        ids.append(ident)
    if not dists:
        raise ParseError("no model rows")
    return space, dists, ids


def ingest_distributions(path: str | Path) -> tuple[OutputSpace, list[FiniteDistribution]]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
    space, dists, _ = parse_distributions(text)
    return space, dists
