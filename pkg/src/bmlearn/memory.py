"""Streaming learners with an explicit b-bit state.

A learner's state is a tuple of non-negative integer fields with fixed bit
widths; ``encode`` packs it into one integer below ``2**b``.  The driver
checks the pack/unpack round trip after every update, so a learner that
quietly needs more memory than it declared fails loudly at the step where
it happens.  The update and output maps are code and are not charged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boosting import BoostParams, round_weights
from .config import get_config
from .core import ConceptClass, Distribution, ExampleStream, LabeledExample, as_concept, loss
from .errors import ParameterError, StateWidthError


def width_for(k: int) -> int:
    """Bits for an integer in ``[0, k]``."""
    return max(int(k), 0).bit_length()


def pack(values, widths) -> int:
    code, shift = 0, 0
    for v, w in zip(values, widths):
        v = int(v)
        if v < 0 or v >> w:
            raise ValueError(f"value {v} does not fit in {w} bits")
        code |= v << shift
        shift += w
    return code


def unpack(code: int, widths) -> tuple[int, ...]:
    out = []
    for w in widths:
        out.append(code & ((1 << w) - 1))
        code >>= w
    return tuple(out)


class StreamingLearner:
    """Base class.  Subclasses set ``widths`` and ``declared_m``."""

    name = "learner"
    widths: list[int] = []
    declared_m: int = 0

    @property
    def state_width(self) -> int:
        return sum(self.widths)

    def initial_state(self) -> tuple:
        return tuple(0 for _ in self.widths)

    def update(self, state: tuple, example: LabeledExample, step: int) -> tuple:
        raise NotImplementedError

    def output(self, state: tuple) -> np.ndarray:
        raise NotImplementedError

    def event(self, old: tuple, new: tuple, step: int) -> dict | None:
        return None

    def encode(self, state: tuple) -> int:
        if len(state) != len(self.widths):
            raise ValueError(f"state has {len(state)} fields, expected {len(self.widths)}")
        return pack(state, self.widths)

    def decode(self, code: int) -> tuple:
        return unpack(code, self.widths)

    def round_trip(self, state: tuple, step: int) -> int:
        """Encode and decode ``state``; returns the number of bits the code uses."""
        try:
            code = self.encode(state)
        except ValueError as exc:
            raise StateWidthError(f"{self.name}: {exc}", step) from exc
        if code.bit_length() > self.state_width or self.decode(code) != tuple(int(v) for v in state):
            raise StateWidthError(f"{self.name}: state does not round-trip through {self.state_width} bits", step)
        return code.bit_length()


@dataclass
class RunTrace:
    samples_consumed: int
    bits_declared: int
    bits_max_observed: int
    final_loss: float
    success: bool
    events: list[dict] = field(default_factory=list)
    hypothesis: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "samples_consumed": self.samples_consumed,
            "bits_declared": self.bits_declared,
            "bits_max_observed": self.bits_max_observed,
            "final_loss": self.final_loss,
            "success": self.success,
            "events": self.events,
        }


def run_stream(learner: StreamingLearner, P: Distribution, c, m: int, rng_seed=None,
               epsilon: float | None = None) -> RunTrace:
    """Feed ``m`` examples of ``c`` under ``P`` through ``learner``.

    ``success`` means final loss at most ``epsilon`` (zero loss if no
    ``epsilon`` is given).
    """
    c = as_concept(c, P.size)
    stream = ExampleStream(P, c, rng_seed)
    state = learner.initial_state()
    seen = learner.round_trip(state, 0)
    events = []
    if m > 0:
        pts, labels = stream.draw(m)
        for step in range(m):
            ex = LabeledExample(int(pts[step]), int(labels[step]))
            new = learner.update(state, ex, step)
            seen = max(seen, learner.round_trip(new, step + 1))
            ev = learner.event(state, new, step)
            if ev is not None:
                events.append({"step": step, **ev})
            state = new
    h = as_concept(learner.output(state), P.size)
    final = loss(h, c, P)
    ok = final <= (0.0 if epsilon is None else epsilon)
    return RunTrace(stream.consumed, learner.state_width, seen, final, ok, events, h)


# ---------------------------------------------------------------- built-ins


class FixedHypothesisLearner(StreamingLearner):
    """Ignores the stream and outputs a fixed hypothesis; zero state bits."""

    name = "fixed"

    def __init__(self, h):
        self.h = as_concept(h)
        self.widths = []

    def update(self, state, example, step):
        return state

    def output(self, state):
        return self.h


class IndexAdvanceLearner(StreamingLearner):
    """Stores one class index; on a mistake jumps to the next concept that fits the example.

    The target fits every example, so the index never passes it; on ordered
    classes such as thresholds this is a one-index ERM.
    """

    name = "index_advance"

    def __init__(self, cls: ConceptClass, declared_m: int = 0):
        self.cls = cls
        self.widths = [width_for(len(cls) - 1)]
        self.declared_m = declared_m

    def update(self, state, example, step):
        (i,) = state
        M = self.cls.matrix
        if M[i, example.point] == example.label:
            return state
        later = np.flatnonzero(M[i + 1:, example.point] == example.label)
        # unrealizable stream: stay put rather than fall off the end
        return (i + 1 + int(later[0]),) if later.size else state

    def output(self, state):
        return self.cls.matrix[state[0]]

    def event(self, old, new, step):
        return {"index": new[0]} if new != old else None


class EnumerationTester(StreamingLearner):
    """Goes through the class in order, testing each concept on ``k`` examples.

    A concept that labels ``k`` consecutive examples correctly is kept for
    good; a mistake moves on to the next concept.  State: index and streak.
    """

    name = "enumeration"

    def __init__(self, cls: ConceptClass, epsilon: float):
        self.cls = cls
        self.k = max(1, math.ceil(math.log(max(len(cls), 2) * 3) / epsilon))
        self.widths = [width_for(len(cls) - 1), width_for(self.k)]
        self.declared_m = len(cls) * self.k

    def update(self, state, example, step):
        i, streak = state
        if streak >= self.k:
            return state
        if self.cls.matrix[i, example.point] == example.label:
            return (i, streak + 1)
        return ((i + 1) % len(self.cls), 0)

    def output(self, state):
        return self.cls.matrix[state[0]]


class StoreAllERM(StreamingLearner):
    """Keeps every example it sees and outputs the first consistent concept."""

    name = "store_all_erm"

    def __init__(self, cls: ConceptClass, m: int):
        self.cls = cls
        self.m = m
        n = cls.domain_size
        self.widths = [width_for(m)] + [width_for(n - 1) + 1] * m
        self.declared_m = m

    def update(self, state, example, step):
        count = state[0]
        if count >= self.m:
            return state
        slots = list(state[1:])
        slots[count] = (example.point << 1) | (1 if example.label > 0 else 0)
        return (count + 1, *slots)

    def output(self, state):
        count = state[0]
        ok = np.ones(len(self.cls), dtype=bool)
        for code in state[1:1 + count]:
            x, y = code >> 1, 1 if code & 1 else -1
            ok &= self.cls.matrix[:, x] == y
        hits = np.flatnonzero(ok)
        return self.cls.matrix[int(hits[0]) if hits.size else 0]


class RunningSumLearner(StreamingLearner):
    """Estimates ``<h, c>_P`` from ``N`` examples with a counter and a running sum.

    The sum is stored with offset ``N`` so it is non-negative.  The output is
    the sign of the estimate (a one-query learner); :meth:`estimate` exposes
    the number itself.
    """

    name = "running_sum"

    def __init__(self, h, N: int):
        self.h = as_concept(h)
        self.N = N
        self.widths = [width_for(2 * N), width_for(N)]
        self.declared_m = N

    def initial_state(self):
        return (self.N, 0)

    def update(self, state, example, step):
        s, j = state
        if j >= self.N:
            return state
        return (s + int(self.h[example.point]) * example.label, j + 1)

    def estimate(self, state) -> float:
        s, j = state
        return (s - self.N) / j if j else 0.0

    def output(self, state):
        sign = 1 if self.estimate(state) >= 0 else -1
        return self.h * np.int8(sign)


class BBMStreamingLearner(StreamingLearner):
    """Boost-By-Majority run one example at a time.

    State fields: round ``t``, accepted count, rejection streak, one
    ``(index, sign)`` slot per round, and one running correlation sum per
    class member over the round's accepted examples.  The weak learner at
    the end of a round takes the member with the largest absolute sum.
    Acceptance coins are fixed per step from ``seed`` so the update map is
    a deterministic function of ``(state, example, step)``.
    """

    name = "bbm_stream"

    def __init__(self, cls: ConceptClass, params: BoostParams, m0: int, declared_m: int, seed=None):
        self.cls = cls
        self.params = params
        self.m0 = m0
        self.declared_m = declared_m
        self.coins = np.random.default_rng(seed).random(declared_m)
        k = len(cls)
        self.ref_w = width_for(2 * k - 1)
        self.widths = ([width_for(params.T), width_for(m0), width_for(params.abort_window), 1]
                       + [self.ref_w] * params.T + [width_for(2 * m0)] * k)
        self._tables: dict[int, np.ndarray] = {}

    def initial_state(self):
        k = len(self.cls)
        return (0, 0, 0, 0) + (0,) * self.params.T + (self.m0,) * k

    def _refs(self, state, t):
        base = 4
        return [divmod(state[base + i], 2) for i in range(t)]

    def _votes_at(self, state, t, x) -> int:
        M = self.cls.matrix
        return sum(int(M[i, x]) * (1 if s else -1) for i, s in self._refs(state, t))

    def _table(self, t):
        if t not in self._tables:
            p = self.params
            self._tables[t] = round_weights(p.T, t, p.gamma, np.arange(-t, t + 1))
        return self._tables[t]

    def update(self, state, example, step):
        t, acc, streak, done = state[:4]
        if done or t >= self.params.T:
            return state
        T = self.params.T
        refs = list(state[4:4 + T])
        sums = list(state[4 + T:])
        margin = example.label * self._votes_at(state, t, example.point)
        if self.coins[step % len(self.coins)] >= self._table(t)[margin + t]:
            streak += 1
            if streak >= self.params.abort_window:
                done = 1
            return (t, acc, streak, done, *refs, *sums)
        col = self.cls.matrix[:, example.point].astype(int) * example.label
        sums = [s + int(v) for s, v in zip(sums, col)]
        acc += 1
        streak = 0
        if acc == self.m0:
            dev = np.abs(np.array(sums) - self.m0)
            i = int(np.argmax(dev))
            sign = 1 if sums[i] >= self.m0 else 0
            refs[t] = 2 * i + sign
            t += 1
            acc = 0
            sums = [self.m0] * len(sums)
            if t >= T:
                done = 1
        return (t, acc, streak, done, *refs, *sums)

    def output(self, state):
        t = state[0]
        M = self.cls.matrix.astype(np.int64)
        votes = np.zeros(self.cls.domain_size, dtype=np.int64)
        for i, s in self._refs(state, t):
            votes += M[i] * (1 if s else -1)
        return np.where(votes > 0, 1, -1)

    def event(self, old, new, step):
        if new[0] != old[0] or (new[3] and not old[3]):
            return {"round": new[0], "aborted": bool(new[3] and new[0] < self.params.T)}
        return None


# ---------------------------------------------------------------- triviality


@dataclass(frozen=True)
class TrivialityVerdict:
    m_bound: float
    b_bound: float
    m: float
    b: float
    slack: float
    nontrivial: bool
    advisory: bool = True

    def to_dict(self) -> dict:
        return {"m_bound": self.m_bound, "b_bound": self.b_bound, "m": self.m, "b": self.b,
                "slack": self.slack, "nontrivial": self.nontrivial, "advisory": self.advisory}


def triviality_check(m, b, class_size: int, domain_size: int, epsilon: float,
                     slack: float | None = None) -> TrivialityVerdict:
    """Compare ``(m, b)`` with the two trivial learners' budgets.

    The enumeration learner pays ``|C| log|C| / epsilon`` samples; the
    store-the-sample learner pays ``log|C| (log|X| + log(1/epsilon))`` bits.
    A run is reported nontrivial when ``slack * m`` is below the first and
    ``slack * b`` below the second.  The definition being imitated is
    asymptotic, so the verdict is advisory.
    """
    if class_size < 1 or domain_size < 1 or not 0 < epsilon < 1:
        raise ParameterError("need positive sizes and epsilon in (0, 1)")
    slack = get_config().triviality_slack if slack is None else slack
    lc = math.log2(max(class_size, 2))
    m_bound = class_size * lc / epsilon
    b_bound = lc * (math.log2(max(domain_size, 2)) + math.log2(1 / epsilon))
    nontrivial = bool(m * slack < m_bound and b * slack < b_bound)
    return TrivialityVerdict(m_bound, b_bound, float(m), float(b), slack, nontrivial)
