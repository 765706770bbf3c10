"""Plain-text ``key = value`` files (``#`` starts a comment)."""

from __future__ import annotations


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def read_kv(path) -> dict[str, str]:
    with open(path) as f:
        return parse_kv(f.read())


def format_kv(items: dict) -> str:
    return "".join(f"{k} = {v}\n" for k, v in items.items())


def parse_floats(value: str) -> list[float]:
    return [float(tok) for tok in value.replace(",", " ").split()]
