"""Reading and writing concept classes and distributions.

Text class format::

    n m [pm|01]
    p_0 p_1 ... p_{n-1}          (optional; "-" or absent means no distribution)
    c_00 c_01 ... c_0{n-1}
    ...

Labels are ``+1``/``-1`` by default; the header flag ``01`` reads ``0`` as
``-1``.  The JSON form uses the keys ``domain_size``, ``probs`` (optional)
and ``concepts``.  A distribution file is either a single line of
probabilities or JSON with a ``probs`` key.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import ConceptClass, Distribution
from .errors import ParameterError


def _parse_labels(tokens, zero_one: bool) -> list[int]:
    out = []
    for tok in tokens:
        v = int(tok)
        if zero_one:
            if v not in (0, 1):
                raise ParameterError(f"expected 0/1 label, got {tok}")
            v = 1 if v == 1 else -1
        out.append(v)
    return out


def parse_class_text(text: str) -> tuple[ConceptClass, Distribution | None]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ParameterError("empty class file")
    head = lines[0].split()
    if len(head) < 2:
        raise ParameterError("header must be 'n m [pm|01]'")
    n, m = int(head[0]), int(head[1])
    zero_one = len(head) > 2 and head[2] == "01"
    body = lines[1:]
    dist = None
    if len(body) == m + 1:
        if body[0] != "-":
            dist = Distribution([float(t) for t in body[0].split()])
        body = body[1:]
    if len(body) != m:
        raise ParameterError(f"expected {m} concept lines, found {len(body)}")
    rows = [_parse_labels(ln.split(), zero_one) for ln in body]
    if any(len(r) != n for r in rows):
        raise ParameterError(f"every concept line needs {n} entries")
    if dist is not None and dist.size != n:
        raise ParameterError("distribution length differs from n")
    return ConceptClass(rows), dist


def parse_class_json(data: dict) -> tuple[ConceptClass, Distribution | None]:
    cls = ConceptClass(data["concepts"])
    if "domain_size" in data and int(data["domain_size"]) != cls.domain_size:
        raise ParameterError("domain_size does not match the concept length")
    dist = Distribution(data["probs"]) if data.get("probs") is not None else None
    return cls, dist


def load_class(path) -> tuple[ConceptClass, Distribution | None]:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return parse_class_json(json.loads(text))
    return parse_class_text(text)


def load_distribution(path) -> Distribution:
    text = Path(path).read_text().strip()
    if text.startswith("{"):
        return Distribution(json.loads(text)["probs"])
    if text.startswith("["):
        return Distribution(json.loads(text))
    return Distribution([float(t) for t in text.split()])


def class_to_json(cls: ConceptClass, dist: Distribution | None = None) -> dict:
    return {
        "domain_size": cls.domain_size,
        "probs": None if dist is None else dist.probs.tolist(),
        "concepts": cls.matrix.astype(int).tolist(),
    }


def class_to_text(cls: ConceptClass, dist: Distribution | None = None) -> str:
    lines = [f"{cls.domain_size} {len(cls)} pm"]
    lines.append("-" if dist is None else " ".join(repr(float(p)) for p in dist.probs))
    for row in cls.matrix:
        lines.append(" ".join(f"{int(v):+d}" for v in row))
    return "\n".join(lines) + "\n"


def save_class(path, cls: ConceptClass, dist: Distribution | None = None) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(class_to_json(cls, dist)))
    else:
        path.write_text(class_to_text(cls, dist))


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays for ``json.dump``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Distribution):
        return obj.probs.tolist()
    return obj
