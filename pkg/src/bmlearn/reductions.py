"""Reductions between PAC, SQ and bounded-memory learning on a finite domain.

* :func:`pac_rejection_learn` turns a learner for ``P`` into one for a close
  ``Q`` by accepting each ``Q``-example with probability ``eps P(x)/Q(x)``.
* :func:`sq_rejection_learn` does the same for SQ learners by rewriting each
  query into ±1 queries about ``Q`` (:func:`quantize_signs` per point).
* :func:`properify` turns an improper hypothesis into a class member.
* :func:`exact_identify` snaps a proper hypothesis onto a near-orthogonal set.
* :func:`sq_to_bounded_memory` runs an SQ learner on a stream, keeping only a
  running sum between examples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import get_config
from .core import ConceptClass, Distribution, ExampleStream, LabeledExample, as_concept, is_mu_close, loss
from .errors import (
    IdentificationError,
    ParameterError,
    PreconditionError,
    ProtocolError,
    StreamExhaustedError,
    WitnessViolationError,
)
from .memory import RunningSumLearner, StreamingLearner, width_for
from .oracle import SQOracle, binomial_mean
from .sqdim import SQWitness, verify_witness

# an acceptance probability this far above 1 is rounding, not a violated precondition
_ACCEPT_ATOL = 1e-12


# ---------------------------------------------------------------- quantization


@dataclass(frozen=True)
class QuantizedQuery:
    signs: tuple[int, ...]
    n: int
    target_gamma: float
    tau: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.signs))

    @property
    def k(self) -> int:
        return sum(1 for s in self.signs if s < 0)


def _quantize_k(gamma: np.ndarray, n: int) -> np.ndarray:
    """Number of ``-1`` entries whose mean ``(n - 2k)/n`` is nearest ``gamma``; ties to smaller ``k``."""
    raw = n * (1.0 - gamma) / 2.0
    lo = np.clip(np.floor(raw), 0, n)
    hi = np.clip(lo + 1, 0, n)
    err_lo = np.abs((n - 2 * lo) / n - gamma)
    err_hi = np.abs((n - 2 * hi) / n - gamma)
    return np.where(err_hi < err_lo, hi, lo).astype(np.int64)


def quantize_signs(gamma: float, tau: float) -> QuantizedQuery:
    """``n = floor(1/tau) + 1`` signs whose mean is within ``1/n < tau`` of ``gamma``."""
    if not -1.0 <= gamma <= 1.0:
        raise ParameterError(f"gamma must lie in [-1, 1], got {gamma}")
    if not 0.0 < tau <= 1.0:
        raise ParameterError(f"tau must lie in (0, 1], got {tau}")
    n = math.floor(1.0 / tau) + 1
    k = int(_quantize_k(np.array([gamma]), n)[0])
    return QuantizedQuery(tuple([-1] * k + [1] * (n - k)), n, gamma, tau)


@dataclass
class RewrittenQueryFamily:
    queries: np.ndarray  # n x |X| matrix of ±1 rows
    scale: float
    tau: float

    @property
    def n(self) -> int:
        return self.queries.shape[0]


def acceptance_probabilities(P: Distribution, Q: Distribution, epsilon: float) -> np.ndarray:
    """``eps P(x)/Q(x)`` (zero where ``Q`` has no mass); errors if any exceeds 1."""
    if not 0.0 < epsilon <= 1.0:
        raise ParameterError(f"epsilon must lie in (0, 1], got {epsilon}")
    p, q = P.probs, Q.probs
    if np.any((q == 0) & (p > 0)):
        raise PreconditionError("Q has zero mass where P does not")
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = np.where(q > 0, epsilon * p / np.where(q > 0, q, 1.0), 0.0)
    if np.any(acc > 1.0 + _ACCEPT_ATOL):
        x = int(np.argmax(acc))
        raise PreconditionError(f"acceptance probability {acc[x]!r} > 1 at point {x}; Q is not 1/eps-close to P")
    return np.minimum(acc, 1.0)


def accepted_distribution(P: Distribution, Q: Distribution, epsilon: float) -> Distribution:
    """Distribution of accepted examples: ``Q(x) acc(x)`` renormalized."""
    mass = Q.probs * acceptance_probabilities(P, Q, epsilon)
    return Distribution(mass / mass.sum(), atol=1e-9)


def rewrite_query(psi, P: Distribution, Q: Distribution, epsilon: float, tau: float) -> RewrittenQueryFamily:
    """Replace a ``P``-query on ``psi`` by ±1 queries about ``Q``.

    With ``psi'(x) = (P(x)/Q(x)) psi(x)`` (zero where ``Q(x) = 0``), every
    point's value ``eps psi'(x)`` is quantized at tolerance ``eps tau / 2``
    and the ``i``-th sign of every point forms the ``i``-th query.  Then
    ``<psi, c>_P = (1/eps) mean_i <psi_i, c>_Q`` up to ``tau / 2``.
    """
    psi = as_concept(psi, P.size)
    scaled = acceptance_probabilities(P, Q, epsilon) * psi
    qt = epsilon * tau / 2
    n = math.floor(1.0 / qt) + 1
    ks = _quantize_k(np.clip(scaled, -1.0, 1.0), n)
    rows = np.arange(n)[:, None]
    queries = np.where(rows < ks[None, :], -1, 1).astype(np.int8)
    return RewrittenQueryFamily(queries, 1.0 / epsilon, qt)


class RewritingOracle(SQOracle):
    """Answers ``P``-queries of a strong SQ learner using an oracle for ``Q``."""

    def __init__(self, q_oracle: SQOracle, P: Distribution, Q: Distribution, epsilon: float):
        super().__init__()
        if not is_mu_close(P, Q, 1.0 / epsilon):
            raise PreconditionError("Q is not 1/eps-close to P")
        self.q_oracle = q_oracle
        self.P, self.Q, self.epsilon = P, Q, epsilon

    def __call__(self, h, tau: float) -> float:
        fam = rewrite_query(h, self.P, self.Q, self.epsilon, tau)
        self.account.record(tau)
        answers = self.q_oracle.answer_many(fam.queries, fam.tau)
        return float(np.clip(fam.scale * np.mean(answers), -1.0, 1.0))

    def answer_many(self, H, tau: float) -> np.ndarray:
        return np.array([self(h, tau) for h in np.atleast_2d(H)])


@dataclass
class ReductionResult:
    output_hypothesis: np.ndarray | None
    samples_or_queries: int
    tolerance: float | None
    bits: int | None
    success: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        h = self.output_hypothesis
        return {
            "output_hypothesis": None if h is None else [int(v) for v in h],
            "samples_or_queries": self.samples_or_queries,
            "tolerance": self.tolerance,
            "bits": self.bits,
            "success": self.success,
            **self.details,
        }


def sq_rejection_learn(strong_sq: Callable, q_oracle: SQOracle, P: Distribution, Q: Distribution,
                       epsilon: float) -> ReductionResult:
    """Run ``strong_sq(oracle)`` (a learner for ``P``) against an oracle for ``Q``."""
    oracle = RewritingOracle(q_oracle, P, Q, epsilon)
    h = strong_sq(oracle)
    h = None if h is None else as_concept(h, P.size)
    qa = q_oracle.account
    mt = None if math.isinf(qa.min_tolerance_used) else qa.min_tolerance_used
    details = {"strong_queries": oracle.account.query_count}
    return ReductionResult(h, qa.query_count, mt, None, h is not None, details)


def pac_rejection_learn(strong: StreamingLearner, P: Distribution, Q: Distribution, target,
                        epsilon: float, m: int, rng_seed=None, limit: int | None = None,
                        chunk: int = 4096) -> ReductionResult:
    """Feed ``m`` accepted ``Q``-examples to a streaming learner built for ``P``.

    Accepted examples are exactly ``P``-distributed.  The wrapper adds an
    acceptance counter to the learner's state bits.
    """
    acc = acceptance_probabilities(P, Q, epsilon)
    if limit is None:
        # far beyond the m / eps expected draws; only a broken setup hits it
        limit = max(1000, math.ceil(50 * m / epsilon))
    stream = ExampleStream(Q, target, rng_seed, limit=limit)
    rng = np.random.default_rng(None if rng_seed is None else np.random.SeedSequence(rng_seed).spawn(1)[0])
    state = strong.initial_state()
    strong.round_trip(state, 0)
    got = 0
    try:
        while got < m:
            pts, labels = stream.draw(min(chunk, limit - stream.consumed) or 1)
            keep = np.flatnonzero(rng.random(len(pts)) < acc[pts])
            take = keep[: m - got]
            for i in take:
                state = strong.update(state, LabeledExample(int(pts[i]), int(labels[i])), got)
                got += 1
                strong.round_trip(state, got)
            if got >= m and take.size:
                stream.push_back(pts[take[-1] + 1:])
    except StreamExhaustedError as exc:
        exc.partial = {"accepted": got, "consumed": stream.consumed}
        raise
    h = as_concept(strong.output(state), P.size)
    bits = strong.state_width + width_for(m)
    details = {"accepted": got, "loss_P": loss(h, target, P), "loss_Q": loss(h, target, Q)}
    return ReductionResult(h, stream.consumed, None, bits, True, details)


# ---------------------------------------------------------------- proper / exact


def properify(h, cls: ConceptClass, P: Distribution, epsilon: float, rng_seed=None) -> ReductionResult:
    """First class member agreeing with ``h`` on at least ``(1 - 2 eps) N`` fresh points.

    The points are unlabeled draws from ``P`` labeled by ``h`` itself, so no
    labeled examples are spent.
    """
    h = as_concept(h, P.size)
    if not 0.0 < epsilon < 0.5:
        raise ParameterError(f"epsilon must lie in (0, 1/2), got {epsilon}")
    cfg = get_config()
    N = math.ceil(cfg.c_p * math.log(max(len(cls), 2)) / epsilon ** 2)
    pts = P.sample(np.random.default_rng(rng_seed), N)
    agree = (cls.matrix[:, pts] == h[pts]).sum(axis=1)
    passing = np.flatnonzero(agree >= (1 - 2 * epsilon) * N)
    bits = width_for(len(cls) - 1) + width_for(N)
    if passing.size == 0:
        return ReductionResult(None, N, None, bits, False, {"best_agreement": int(agree.max()) / N})
    i = int(passing[0])
    return ReductionResult(cls.matrix[i], N, None, bits, True, {"index": i, "agreement": int(agree[i]) / N})


def exact_identify(proper_h, H: ConceptClass, Q: Distribution, radius: float | None = None) -> tuple[np.ndarray, int]:
    """The unique member of the near-orthogonal set ``H`` within ``radius`` of ``proper_h``.

    Needs ``H`` to be a valid witness of size ``d = |H|`` with
    ``1/2 - 1/(2d) > radius``: members then disagree on at least
    ``1/2 - 1/(2d)`` mass, which is what makes the answer unique.
    """
    radius = get_config().identify_radius if radius is None else radius
    d = len(H)
    if not verify_witness(H, Q, SQWitness(d, tuple(range(d)))):
        raise PreconditionError("H is not a near-orthogonal witness under Q")
    if not 0.5 - 0.5 / d > radius:
        raise PreconditionError(f"d={d} gives separation {0.5 - 0.5 / d:.4f} <= radius {radius}")
    h = as_concept(proper_h, Q.size)
    dist = Q.probs @ (H.matrix != h).T
    close = np.flatnonzero(dist <= radius)
    if close.size == 0:
        raise IdentificationError(f"no member within {radius} (nearest at {dist.min():.4f})")
    if close.size > 1:
        raise WitnessViolationError(f"members {close.tolist()} are all within {radius}")
    i = int(close[0])
    return H.matrix[i], i


# ---------------------------------------------------------------- SQ -> streaming


def simulation_sample_size(q: int, tau: float) -> int:
    """Examples per query so that all ``q`` answers are legal at ``tau`` w.p. 5/6.

    Each batch's agreement rate lands within ``tau/2`` except with
    probability ``2 exp(-ln(12q)) = 1/(6q)``; the ±1 answer is twice that
    deviation, and a union bound over ``q`` queries gives 1/6.
    """
    return math.ceil(math.log(12 * q) / (2 * (tau / 2) ** 2))


class StreamSQOracle(SQOracle):
    """SQ oracle answered from an example stream, one fresh batch per query.

    ``mode="stream"`` walks the examples one by one through a
    :class:`RunningSumLearner` (and checks its state round trip at each
    step).  ``mode="aggregate"`` draws the number of agreements in the batch
    directly, which is the same random variable and costs O(1) per query.
    """

    def __init__(self, stream: ExampleStream, q: int, mode: str = "aggregate"):
        super().__init__()
        if mode not in ("stream", "aggregate"):
            raise ParameterError(f"mode must be 'stream' or 'aggregate', got {mode!r}")
        if q < 1:
            raise ParameterError("query budget q must be >= 1")
        self.stream = stream
        self.q = q
        self.mode = mode
        self.max_batch = 0

    def _batch(self, tau: float, k: int) -> int:
        if self.account.query_count + k > self.q:
            raise ProtocolError(f"query budget q={self.q} exceeded")
        N = simulation_sample_size(self.q, tau)
        self.max_batch = max(self.max_batch, N)
        return N

    def __call__(self, h, tau: float) -> float:
        return float(self.answer_many(np.atleast_2d(h), tau)[0])

    def answer_many(self, H, tau: float) -> np.ndarray:
        H = np.atleast_2d(np.asarray(H))
        if not 0.0 < tau <= 1.0:
            raise ParameterError(f"tolerance must lie in (0, 1], got {tau}")
        N = self._batch(tau, H.shape[0])
        if self.mode == "stream":
            out = np.array([self._walk(h, N) for h in H])
        else:
            out = self._aggregate(H, N)
        self.account.record(tau, k=H.shape[0], samples=N * H.shape[0])
        return out

    def _walk(self, h, N: int) -> float:
        learner = RunningSumLearner(h, N)
        state = learner.initial_state()
        pts, labels = self.stream.draw(N)
        for j in range(N):
            state = learner.update(state, LabeledExample(int(pts[j]), int(labels[j])), j)
            learner.round_trip(state, j + 1)
        return learner.estimate(state)

    def _aggregate(self, H, N: int) -> np.ndarray:
        s = self.stream
        if s.limit is not None and s.consumed + N * H.shape[0] > s.limit:
            raise StreamExhaustedError(f"stream limit {s.limit} reached after {s.consumed} examples")
        corr = H.astype(float) @ (s.P.probs * s.target)
        out = binomial_mean(s.rng, N, (1.0 + corr) / 2.0)
        s.consumed += N * H.shape[0]
        return out

    def state_bits(self) -> int:
        N = self.max_batch
        return width_for(2 * N) + width_for(N) + width_for(self.q)


def sq_to_bounded_memory(sq_learner: Callable, cls: ConceptClass, P: Distribution, target, q: int,
                         rng_seed=None, mode: str = "aggregate", stream: ExampleStream | None = None,
                         ) -> ReductionResult:
    """Run ``sq_learner(oracle)`` with every query answered from fresh stream examples.

    ``sq_learner`` returns a hypothesis, or ``(hypothesis, own_state_bits)``.
    Between examples only the running sum, the batch counter, the query
    index and the learner's own state are kept; that total is the bit count.
    """
    stream = stream or ExampleStream(P, target, rng_seed)
    oracle = StreamSQOracle(stream, q, mode)
    out = sq_learner(oracle)
    alg_bits = 0
    if isinstance(out, tuple):
        out, alg_bits = out
    h = as_concept(out, P.size)
    bits = oracle.state_bits() + int(alg_bits)
    acct = oracle.account
    mt = None if math.isinf(acct.min_tolerance_used) else acct.min_tolerance_used
    details = {
        "queries": acct.query_count,
        "samples": stream.consumed,
        "per_query_samples": oracle.max_batch,
        "loss": loss(h, target, P),
        "alg_bits": int(alg_bits),
    }
    return ReductionResult(h, stream.consumed, mt, bits, True, details)


def weak_learner_bits(cls: ConceptClass, N: int) -> int:
    """State of the cover-and-query weak learner: best index, its sign and its answer."""
    return width_for(len(cls) - 1) + 1 + width_for(2 * N)
