# -*- coding: utf-8 -*-
from __future__ import annotations

import re
from typing import Dict, Iterable, List

from src.utils.utils_errors import ArgumentError, ParseError

_RANGE_RE = re.compile(r"^\s*(-?\d+)\s*-\s*(-?\d+)\s*$")
_TRUE_TOKENS = {"1", "true", "yes", "y", "on"}
_FALSE_TOKENS = {"0", "false", "no", "n", "off"}


# ============================ PARSING ============================

def normalize_csv_list(text: str) -> str:
    """Normalize a comma-separated text into 'a,b,c' without extra spaces/empties."""
    if not text:
        return ""
    items = [t.strip() for t in text.split(",")]
    items = [t for t in items if t]
    return ",".join(items)


def parse_csv_list(text: str, upper: bool = False) -> List[str]:
    norm = normalize_csv_list(text)
    items = norm.split(",") if norm else []
    return [t.upper() for t in items] if upper else items


def parse_int_list(text: str, label: str = "value") -> List[int]:
    """
    Parse '1-5', '0', '1,3,5' or mixes such as '0,2-4' into an ordered,
    de-duplicated list of integers.
    """
    values: List[int] = []
    for token in parse_csv_list(text):
        m = _RANGE_RE.match(token)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            if hi < lo:
                raise ArgumentError(f"Invalid {label} range '{token}' (end before start)")
            values.extend(range(lo, hi + 1))
            continue
        try:
            values.append(int(token))
        except ValueError as exc:
            raise ArgumentError(f"Invalid {label} '{token}'") from exc
    seen = set()
    ordered = []
    for v in values:
        if v not in seen:
            seen.add(v)
            ordered.append(v)
    return ordered


def parse_overrides(tokens: Iterable[str] | None) -> Dict[str, str]:
    """Turn ['lr=1e-3', 'denoiser.heads=4'] into {'lr': '1e-3', 'denoiser.heads': '4'}."""
    overrides: Dict[str, str] = {}
    for token in tokens or []:
        if "=" not in token:
            raise ParseError(f"Override '{token}' must look like key=value")
        key, value = token.split("=", 1)
        key = key.strip()
        if not key:
            raise ParseError(f"Override '{token}' has an empty key")
        overrides[key] = value.strip()
    return overrides


def coerce_value(raw: str, default, key: str = ""):
    """
    Convert a raw config string to the type of 'default'.
    Tuples/lists of numbers are written comma-separated; bools accept yes/no/true/false/1/0.
    """
    text = str(raw).strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in _TRUE_TOKENS:
                return True
            if low in _FALSE_TOKENS:
                return False
            raise ValueError(text)
        if isinstance(default, int):
            try:
                return int(text)
            except ValueError:
                number = float(text)
                if not number.is_integer():
                    raise
                return int(number)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = parse_csv_list(text.strip("()[]"))
            if default and isinstance(default[0], float):
                return tuple(float(t) for t in items)
            if default and isinstance(default[0], int):
                return tuple(parse_int_list(text.strip("()[]"), key or "value"))
            return tuple(items)
        if default is None:
            return text if text else None
        return text
    except ValueError as exc:
        expected = type(default).__name__
        raise ParseError(f"Value '{text}' for '{key}' is not a valid {expected}") from exc
