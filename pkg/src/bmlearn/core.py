"""Finite-domain distributions, ±1 concepts, correlations and losses.

Points of a domain of size ``n`` are the integers ``0..n-1``.  A concept is a
read-only ``int8`` vector over ``{-1, +1}``; a distribution is a read-only
float vector.  Everything here is an exact finite sum, so there is no
stochastic tolerance anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .config import get_config
from .errors import DimensionError, ParameterError, StreamExhaustedError

PROB_ATOL = 1e-12


@dataclass(frozen=True)
class Domain:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if int(self.size) < 1:
            raise ParameterError(f"domain size must be >= 1, got {self.size}")
        if self.labels is not None:
            if len(self.labels) != self.size:
                raise ParameterError("need exactly one label per point")
            if len(set(self.labels)) != len(self.labels):
                raise ParameterError("point labels must be unique")


class LabeledExample(NamedTuple):
    point: int
    label: int


def as_concept(values, n: int | None = None) -> np.ndarray:
    """Validate ``values`` as a ±1 vector (optionally of length ``n``)."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DimensionError(f"concept must be 1-D, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionError(f"concept has length {arr.shape[0]}, domain has {n}")
    if not np.all((arr == 1) | (arr == -1)):
        raise ParameterError("concept entries must be -1 or +1")
    out = arr.astype(np.int8)
    out.setflags(write=False)
    return out


class Distribution:
    """Probability vector over a finite domain, stored exactly as given."""

    __slots__ = ("probs",)

    def __init__(self, probs, *, atol: float = PROB_ATOL):
        p = np.array(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DimensionError(f"distribution must be a non-empty vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ParameterError("probabilities must be finite and non-negative")
        total = float(p.sum())
        if abs(total - 1.0) > atol:
            raise ParameterError(f"probabilities sum to {total!r}, not 1")
        p.setflags(write=False)
        self.probs = p

    @classmethod
    def uniform(cls, n: int) -> "Distribution":
        if n < 1:
            raise ParameterError("domain size must be >= 1")
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, weights) -> "Distribution":
        w = np.asarray(weights, dtype=float)
        z = w.sum()
        if not z > 0:
            raise ParameterError("weights must have positive total mass")
        return cls(w / z)

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    def __len__(self) -> int:
        return self.size

    def __getitem__(self, i):
        return self.probs[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())

    def __repr__(self) -> str:
        return f"Distribution({np.array2string(self.probs, precision=4)})"

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Draw ``k`` i.i.d. point indices."""
        cdf = np.cumsum(self.probs)
        idx = np.searchsorted(cdf, rng.random(k) * cdf[-1], side="right")
        # guards the u == cdf[-1] corner; the last positive-mass point absorbs it
        last = self.support()[-1]
        return np.minimum(idx, last)


def _check_same(*vectors) -> int:
    n = len(vectors[0])
    for v in vectors[1:]:
        if len(v) != n:
            raise DimensionError(f"length mismatch: {n} vs {len(v)}")
    return n


def correlation(h, c, P: Distribution) -> float:
    """``E_{x~P}[h(x) c(x)]``."""
    _check_same(h, c, P)
    return float(np.dot(P.probs, np.asarray(h, dtype=float) * np.asarray(c, dtype=float)))


def loss(h, c, P: Distribution) -> float:
    """``Pr_{x~P}(h(x) != c(x))``."""
    _check_same(h, c, P)
    return float(P.probs[np.asarray(h) != np.asarray(c)].sum())


def is_mu_close(P: Distribution, Q: Distribution, mu: float, rtol: float | None = None) -> bool:
    """True iff ``P(x)/mu <= Q(x) <= mu P(x)`` at every point.

    The test is written symmetrically in P and Q.  Zero against zero is
    compatible; zero against positive mass never is.  ``rtol`` absorbs the
    last-bit rounding of products such as ``(1/mu) * P``.
    """
    if mu < 1:
        raise ParameterError(f"mu must be >= 1, got {mu}")
    _check_same(P, Q)
    if rtol is None:
        rtol = get_config().close_rtol
    p, q = P.probs, Q.probs
    slack = 1.0 + rtol
    return bool(np.all(mu * q * slack >= p) and np.all(mu * p * slack >= q))


def mix(P: Distribution, R: Distribution, delta: float) -> Distribution:
    """Pointwise ``delta * P + (1 - delta) * R``."""
    if not 0.0 <= delta <= 1.0:
        raise ParameterError(f"delta must lie in [0, 1], got {delta}")
    _check_same(P, R)
    return Distribution(delta * P.probs + (1.0 - delta) * R.probs)


class ConceptClass:
    """Ordered, non-empty list of ±1 concepts over one domain."""

    def __init__(self, concepts, domain: Domain | None = None, names: Sequence[str] | None = None):
        M = np.array(concepts)
        if M.ndim != 2 or M.shape[0] == 0 or M.shape[1] == 0:
            raise DimensionError(f"concept class needs a non-empty 2-D matrix, got shape {M.shape}")
        if not np.all((M == 1) | (M == -1)):
            raise ParameterError("concept entries must be -1 or +1")
        M = M.astype(np.int8)
        M.setflags(write=False)
        self.matrix = M
        self.domain = domain or Domain(M.shape[1])
        if self.domain.size != M.shape[1]:
            raise DimensionError("domain size does not match concept length")
        self.names = tuple(names) if names is not None else None

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def __getitem__(self, i) -> np.ndarray:
        return self.matrix[i]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.matrix)

    def __repr__(self) -> str:
        return f"ConceptClass({len(self)} concepts over {self.domain_size} points)"

    @property
    def domain_size(self) -> int:
        return self.matrix.shape[1]

    def gram(self, P: Distribution) -> np.ndarray:
        """Matrix of pairwise correlations under ``P``."""
        _check_same(self.matrix[0], P)
        M = self.matrix.astype(float)
        return (M * P.probs) @ M.T

    def duplicates(self) -> list[list[int]]:
        """Groups of indices holding identical concepts (the dedup report)."""
        groups: dict[bytes, list[int]] = {}
        for i, row in enumerate(self.matrix):
            groups.setdefault(row.tobytes(), []).append(i)
        return [g for g in groups.values() if len(g) > 1]

    def dedup(self) -> "ConceptClass":
        _, first = np.unique(self.matrix, axis=0, return_index=True)
        return self.subset(sorted(first))

    def subset(self, indices: Iterable[int]) -> "ConceptClass":
        idx = list(indices)
        names = [self.names[i] for i in idx] if self.names else None
        return ConceptClass(self.matrix[idx], self.domain, names)

    def index_of(self, h) -> int | None:
        hits = np.flatnonzero(np.all(self.matrix == np.asarray(h), axis=1))
        return int(hits[0]) if hits.size else None

    def signed_size(self) -> int:
        """``|C ∪ -C|``, the number of distinct weak-hypothesis references."""
        both = np.concatenate([self.matrix, -self.matrix])
        return int(np.unique(both, axis=0).shape[0])

    def fingerprint(self) -> str:
        import hashlib

        return hashlib.sha256(self.matrix.tobytes() + bytes(self.matrix.shape)).hexdigest()


class ExampleStream:
    """Source of i.i.d. examples ``(x, c(x))`` with ``x ~ P``.

    ``draw`` hands out blocks; ``push_back`` returns the unexamined tail of a
    block so that ``consumed`` counts exactly the examples a learner looked
    at.  ``limit`` caps the total and raises ``StreamExhaustedError``.
    """

    def __init__(self, P: Distribution, target, seed=None, limit: int | None = None):
        self.P = P
        self.target = as_concept(target, P.size)
        self.rng = np.random.default_rng(seed)
        self.limit = limit
        self.consumed = 0
        self._back: list[np.ndarray] = []

    def _check_limit(self, k: int) -> None:
        if self.limit is not None and self.consumed + k > self.limit:
            raise StreamExhaustedError(
                f"stream limit {self.limit} reached after {self.consumed} examples"
            )

    def draw(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        self._check_limit(k)
        parts = []
        need = k
        while need and self._back:
            head = self._back.pop()
            take, rest = head[:need], head[need:]
            if rest.size:
                self._back.append(rest)
            parts.append(take)
            need -= take.size
        if need:
            parts.append(self.P.sample(self.rng, need))
        pts = np.concatenate(parts) if len(parts) > 1 else parts[0]
        self.consumed += k
        return pts, self.target[pts]

    def push_back(self, points: np.ndarray) -> None:
        if points.size:
            self._back.append(np.asarray(points))
            self.consumed -= points.size

    def __iter__(self) -> Iterator[LabeledExample]:
        while True:
            pts, labels = self.draw(1)
            yield LabeledExample(int(pts[0]), int(labels[0]))

    def draw_agreement_count(self, h, k: int) -> int:
        """Number of the next ``k`` examples on which ``h`` agrees with the label.

        Distributionally identical to drawing the ``k`` examples and counting,
        but O(1): the count is Binomial(k, Pr_P[h = c]).
        """
        self._check_limit(k)
        p_agree = 1.0 - loss(h, self.target, self.P)
        self.consumed += k
        return int(self.rng.binomial(k, min(max(p_agree, 0.0), 1.0)))
