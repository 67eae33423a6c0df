"""Named concept-class generators.

Spec strings:

* ``parity:n``            all ``2^n`` characters ``x -> (-1)^<c,x>`` on ``{0,1}^n``
* ``sparse_parity:n:k``   the ``2^k`` characters supported on the first ``k`` bits
* ``threshold:N``         the ``N + 1`` step functions on ``N`` ordered points
* ``random:m:n:seed``     ``m`` concepts of i.i.d. fair ±1 labels over ``n`` points

Every generator pairs the class with the uniform distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConceptClass, Distribution
from .errors import ParameterError

MAX_PARITY_BITS = 14


@dataclass(frozen=True)
class GenSpec:
    kind: str
    params: tuple[int, ...]

    @classmethod
    def parse(cls, text: str) -> "GenSpec":
        parts = text.strip().split(":")
        kind = parts[0]
        arity = {"parity": 1, "sparse_parity": 2, "threshold": 1, "random": 3}
        if kind not in arity:
            raise ParameterError(f"unknown generator {kind!r}; expected one of {sorted(arity)}")
        if len(parts) - 1 != arity[kind]:
            raise ParameterError(f"{kind} takes {arity[kind]} parameter(s), got {text!r}")
        try:
            params = tuple(int(p) for p in parts[1:])
        except ValueError as exc:
            raise ParameterError(f"non-integer parameter in {text!r}") from exc
        return cls(kind, params)

    def __str__(self) -> str:
        return ":".join([self.kind, *map(str, self.params)])


def _bits_matrix(n: int) -> np.ndarray:
    """Row ``x`` holds the binary digits of ``x`` (least significant first)."""
    x = np.arange(2 ** n)
    return (x[:, None] >> np.arange(n)) & 1


def parity_class(n: int, k: int | None = None) -> ConceptClass:
    k = n if k is None else k
    if not 1 <= n <= MAX_PARITY_BITS:
        raise ParameterError(f"parity needs 1 <= n <= {MAX_PARITY_BITS}, got {n}")
    if not 0 <= k <= n:
        raise ParameterError(f"sparse parity needs 0 <= k <= n, got k={k}")
    X = _bits_matrix(n)
    Cs = _bits_matrix(k) if k else np.zeros((1, 0), dtype=int)
    inner = (Cs @ X[:, :k].T) % 2
    names = ["".join(map(str, row)) for row in Cs]
    return ConceptClass(1 - 2 * inner, names=names)


def threshold_class(N: int) -> ConceptClass:
    """``h_a(x) = +1`` iff ``x < a`` for ``a = 0..N``."""
    if N < 1:
        raise ParameterError(f"threshold needs N >= 1, got {N}")
    x = np.arange(N)
    a = np.arange(N + 1)
    return ConceptClass(np.where(x[None, :] < a[:, None], 1, -1), names=[f"a={i}" for i in a])


def random_class(m: int, n: int, seed: int) -> ConceptClass:
    if m < 1 or n < 1:
        raise ParameterError("random classes need m, n >= 1")
    rng = np.random.default_rng(seed)
    return ConceptClass(rng.choice(np.array([-1, 1], dtype=np.int8), size=(m, n)))


def generate(spec: GenSpec | str) -> tuple[ConceptClass, Distribution]:
    if isinstance(spec, str):
        spec = GenSpec.parse(spec)
    if spec.kind == "parity":
        cls = parity_class(spec.params[0])
    elif spec.kind == "sparse_parity":
        cls = parity_class(*spec.params)
    elif spec.kind == "threshold":
        cls = threshold_class(spec.params[0])
    else:
        cls = random_class(*spec.params)
    return cls, Distribution.uniform(cls.domain_size)
