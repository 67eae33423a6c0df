"""Statistical-query oracles with query accounting.

Only correlation queries ``(h, tau)`` are served.  A general query
``chi(x, c(x)) = g1(x) c(x) + g2(x)`` reduces to a correlation query on
``g1`` because the ``g2`` part is an expectation under the known
distribution.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ConceptClass, Distribution, as_concept, correlation
from .errors import DimensionError, ParameterError, ProtocolError

# slack for |corr - nu| <= tau when nu sits exactly on an interval endpoint
_CONSISTENCY_ATOL = 1e-12


@dataclass(frozen=True)
class SQQuery:
    hypothesis: np.ndarray
    tolerance: float

    def __post_init__(self):
        if not 0.0 < self.tolerance <= 1.0:
            raise ParameterError(f"tolerance must lie in (0, 1], got {self.tolerance}")
        object.__setattr__(self, "hypothesis", as_concept(self.hypothesis))


@dataclass
class OracleAccount:
    query_count: int = 0
    min_tolerance_used: float = math.inf
    sample_budget_spent: int = 0

    def record(self, tau: float, k: int = 1, samples: int = 0) -> None:
        self.query_count += k
        self.min_tolerance_used = min(self.min_tolerance_used, tau)
        self.sample_budget_spent += samples

    def snapshot(self) -> dict:
        return {
            "query_count": self.query_count,
            "min_tolerance_used": None if math.isinf(self.min_tolerance_used) else self.min_tolerance_used,
            "sample_budget_spent": self.sample_budget_spent,
        }


@dataclass
class VersionSpace:
    alive: set[int] = field(default_factory=set)

    @classmethod
    def full(cls, size: int) -> "VersionSpace":
        return cls(set(range(size)))

    def __len__(self) -> int:
        return len(self.alive)

    def indices(self) -> list[int]:
        return sorted(self.alive)


def sample_size(tau: float, fail_prob: float) -> int:
    """Hoeffding count ``ceil(ln(2/fail_prob) / (2 tau^2))``."""
    if not 0.0 < fail_prob < 1.0:
        raise ParameterError(f"fail_prob must lie in (0, 1), got {fail_prob}")
    return math.ceil(math.log(2.0 / fail_prob) / (2.0 * tau * tau))


# above this many draws the empirical mean is drawn from its exact binomial law
DIRECT_SAMPLE_LIMIT = 1 << 20
_BINOMIAL_CHUNK = 1 << 62  # numpy binomial counts are int64


def binomial_mean(rng: np.random.Generator, n: int, p_agree) -> np.ndarray:
    """Empirical mean of ``n`` i.i.d. ±1 draws with ``Pr[+1] = p_agree``.

    Same distribution as drawing and averaging, at O(1) cost; counts above
    ``2**62`` are split into chunks.
    """
    p = np.clip(np.asarray(p_agree, dtype=float), 0.0, 1.0)
    full, rest = divmod(int(n), _BINOMIAL_CHUNK)
    agree = np.asarray(rng.binomial(rest, p), dtype=float)
    for _ in range(full):
        agree = agree + rng.binomial(_BINOMIAL_CHUNK, p)
    return 2.0 * agree / n - 1.0


def exact_answer(q: SQQuery, c, P: Distribution, account: OracleAccount | None = None) -> float:
    """The true correlation, the tightest legal answer."""
    nu = correlation(q.hypothesis, c, P)
    if account is not None:
        account.record(q.tolerance)
    return nu


def sampling_answer(
    q: SQQuery,
    c,
    P: Distribution,
    fail_prob: float,
    rng_seed=None,
    account: OracleAccount | None = None,
    strict: bool = False,
) -> float:
    """Empirical mean of ``h(x) c(x)`` over ``sample_size(tau, fail_prob)`` draws.

    That count puts the agreement rate within ``tau`` of its mean, so the
    ±1 mean is only within ``2 tau``.  ``strict`` sizes the sample at
    ``tau / 2`` instead, which makes the answer legal at ``tau`` with
    probability ``1 - fail_prob``.  Past ``DIRECT_SAMPLE_LIMIT`` draws the
    mean comes from :func:`binomial_mean`.
    """
    n = sample_size(q.tolerance / 2 if strict else q.tolerance, fail_prob)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    c = np.asarray(c)
    if c.shape[0] != P.size or q.hypothesis.shape[0] != P.size:
        raise DimensionError("query, target and distribution lengths differ")
    if n > DIRECT_SAMPLE_LIMIT:
        nu = float(binomial_mean(rng, n, (1.0 + correlation(q.hypothesis, c, P)) / 2.0))
    else:
        pts = P.sample(rng, n)
        nu = float(np.mean(q.hypothesis[pts].astype(float) * c[pts]))
    if account is not None:
        account.record(q.tolerance, samples=n)
    return nu


def _adversary_choice(corrs: np.ndarray, tau: float) -> float:
    """Answer consistent with the most concepts; ties go to the smallest |nu|."""
    cands = np.unique(np.concatenate([corrs - tau, corrs + tau, [0.0]]))
    counts = (np.abs(corrs[None, :] - cands[:, None]) <= tau + _CONSISTENCY_ATOL).sum(axis=1)
    best = cands[counts == counts.max()]
    mags = np.abs(best)
    tied = best[mags == mags.min()]
    return float(tied.max())


def adversarial_answer(
    q: SQQuery,
    vs: VersionSpace,
    cls: ConceptClass,
    P: Distribution,
    account: OracleAccount | None = None,
) -> tuple[float, int]:
    """Answer adversarially and shrink ``vs`` in place.

    Returns ``(nu, eliminated_count)``.  The candidate answers are the
    interval endpoints ``<h, c'> ± tau`` plus 0; the feasible set of any
    maximum count is a union of closed intervals with endpoints among them,
    so the scan is exact.  Once a single concept survives there is nothing
    left to hide and the answer is its true correlation.
    """
    if not vs.alive:
        raise ProtocolError("version space is empty")
    alive = np.array(vs.indices())
    corrs = (cls.matrix[alive].astype(float) * P.probs) @ q.hypothesis.astype(float)
    nu = float(corrs[0]) if alive.size == 1 else _adversary_choice(corrs, q.tolerance)
    dead = alive[np.abs(corrs - nu) > q.tolerance + _CONSISTENCY_ATOL]
    vs.alive.difference_update(int(i) for i in dead)
    if account is not None:
        account.record(q.tolerance)
    return nu, int(dead.size)


class SQOracle:
    """Base class: callable as ``oracle(h, tau)``, with an account and optional trace."""

    def __init__(self, trace: bool = False, cls: ConceptClass | None = None):
        self.account = OracleAccount()
        self.trace_enabled = trace
        self.trace: list[dict] = []
        self._cls = cls

    def __call__(self, h, tau: float) -> float:
        return self.answer(SQQuery(h, tau))

    def answer(self, q: SQQuery) -> float:
        raise NotImplementedError

    def answer_many(self, H: np.ndarray, tau: float) -> np.ndarray:
        return np.array([self(h, tau) for h in H])

    def _log(self, h, tau, nu, eliminated=0, index=None) -> None:
        if not self.trace_enabled:
            return
        if index is None:
            index = self.account.query_count - 1
        entry = {"query_index": index, "tolerance": tau, "answer": nu,
                 "eliminated_count": eliminated}
        idx = self._cls.index_of(h) if self._cls is not None else None
        if idx is not None:
            entry["hypothesis_id"] = idx
        else:
            entry["labels"] = [int(v) for v in h]
        self.trace.append(entry)

    def write_trace(self, path) -> None:
        with open(path, "w") as fh:
            for entry in self.trace:
                fh.write(json.dumps(entry) + "\n")


class ExactOracle(SQOracle):
    def __init__(self, target, P: Distribution, **kw):
        super().__init__(**kw)
        self.target = as_concept(target, P.size)
        self.P = P
        self._signed = P.probs * self.target

    def answer(self, q: SQQuery) -> float:
        nu = exact_answer(q, self.target, self.P, self.account)
        self._log(q.hypothesis, q.tolerance, nu)
        return nu

    def answer_many(self, H, tau: float) -> np.ndarray:
        H = np.asarray(H)
        if not 0.0 < tau <= 1.0:
            raise ParameterError(f"tolerance must lie in (0, 1], got {tau}")
        out = H.astype(float) @ self._signed
        self.account.record(tau, k=H.shape[0])
        if self.trace_enabled:
            base = self.account.query_count - H.shape[0]
            for i, (h, nu) in enumerate(zip(H, out)):
                self._log(h, tau, float(nu), index=base + i)
        return out


class SamplingOracle(SQOracle):
    """Honest oracle: each answer is a fresh empirical mean, legal at ``tau`` w.p. ``1 - fail_prob``."""

    def __init__(self, target, P: Distribution, fail_prob: float, seed=None, **kw):
        super().__init__(**kw)
        self.target = as_concept(target, P.size)
        self.P = P
        self.fail_prob = fail_prob
        self.rng = np.random.default_rng(seed)

    def answer(self, q: SQQuery) -> float:
        nu = sampling_answer(q, self.target, self.P, self.fail_prob, self.rng, self.account, strict=True)
        self._log(q.hypothesis, q.tolerance, nu)
        return nu


class AdversarialOracle(SQOracle):
    """Version-space adversary over ``cls``; keeps as many concepts alive as it can."""

    def __init__(self, cls: ConceptClass, P: Distribution, **kw):
        kw.setdefault("cls", cls)
        super().__init__(**kw)
        self.cls = cls
        self.P = P
        self.version_space = VersionSpace.full(len(cls))
        self.survivors: list[int] = []

    def answer(self, q: SQQuery) -> float:
        nu, dead = adversarial_answer(q, self.version_space, self.cls, self.P, self.account)
        self.survivors.append(len(self.version_space))
        self._log(q.hypothesis, q.tolerance, nu, dead)
        return nu


class EmpiricalOracle(SQOracle):
    """Answers from one fixed labeled sample (used by sample-based weak learners)."""

    def __init__(self, points: np.ndarray, labels: np.ndarray, n: int, **kw):
        super().__init__(**kw)
        if len(points) == 0:
            raise ProtocolError("empirical oracle needs at least one example")
        self._signed = np.bincount(points, weights=labels.astype(float), minlength=n) / len(points)
        self.sample_size = len(points)

    def answer(self, q: SQQuery) -> float:
        nu = float(q.hypothesis.astype(float) @ self._signed)
        self.account.record(q.tolerance)
        self._log(q.hypothesis, q.tolerance, nu)
        return nu

    def answer_many(self, H, tau: float) -> np.ndarray:
        self.account.record(tau, k=len(H))
        return np.asarray(H, dtype=float) @ self._signed
