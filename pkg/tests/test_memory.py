import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmlearn.boosting import BoostParams
from bmlearn.core import Distribution, LabeledExample, loss
from bmlearn.errors import StateWidthError
from bmlearn.generators import generate, threshold_class
from bmlearn.memory import (
    BBMStreamingLearner,
    EnumerationTester,
    FixedHypothesisLearner,
    IndexAdvanceLearner,
    RunningSumLearner,
    StoreAllERM,
    StreamingLearner,
    pack,
    run_stream,
    triviality_check,
    unpack,
    width_for,
)


@given(st.lists(st.tuples(st.integers(0, 2**20), st.integers(0, 24)), max_size=12))
def test_pack_unpack_round_trip(fields):
    values = [v & ((1 << w) - 1) for v, w in fields]
    widths = [w for _, w in fields]
    code = pack(values, widths)
    assert code.bit_length() <= sum(widths)
    assert unpack(code, widths) == tuple(values)


def test_pack_rejects_overflow():
    with pytest.raises(ValueError):
        pack([4], [2])


def test_width_for():
    assert [width_for(k) for k in (0, 1, 2, 3, 4, 255, 256)] == [0, 1, 2, 2, 3, 8, 9]


def test_fixed_learner_loss():
    P = Distribution([0.1, 0.2, 0.3, 0.4])
    h, c = np.array([1, 1, -1, -1]), np.array([1, -1, -1, 1])
    tr = run_stream(FixedHypothesisLearner(h), P, c, 25, rng_seed=0)
    assert tr.final_loss == loss(h, c, P)
    assert tr.bits_declared == 0 and tr.samples_consumed == 25


def test_index_learner_reaches_zero_loss():
    cls, P = generate("threshold:16")
    learner = IndexAdvanceLearner(cls)
    tr = run_stream(learner, P, cls[11], 400, rng_seed=3)
    assert tr.final_loss == 0.0 and tr.success
    assert tr.bits_declared == math.ceil(math.log2(len(cls)))
    assert tr.events and tr.events[-1]["index"] == 11


def test_zero_examples_outputs_initial_state():
    cls, P = generate("threshold:8")
    learner = IndexAdvanceLearner(cls)
    tr = run_stream(learner, P, cls[5], 0, rng_seed=0)
    assert tr.hypothesis.tolist() == cls[0].tolist()
    assert tr.samples_consumed == 0


class Leaky(StreamingLearner):
    """Declares 2 bits and counts examples past 3."""

    name = "leaky"

    def __init__(self):
        self.widths = [2]

    def update(self, state, example, step):
        return (state[0] + 1,)

    def output(self, state):
        return np.array([1, 1])


def test_width_violation_names_the_step():
    with pytest.raises(StateWidthError) as info:
        run_stream(Leaky(), Distribution.uniform(2), [1, 1], 10, rng_seed=0)
    assert info.value.step == 4


def _learners():
    cls, P = generate("threshold:12")
    p = BoostParams.auto(1 / 12, 0.1, T=30)
    return cls, P, [
        IndexAdvanceLearner(cls),
        EnumerationTester(cls, 0.1),
        StoreAllERM(cls, 40),
        RunningSumLearner(cls[3], 64),
        BBMStreamingLearner(cls, p, m0=20, declared_m=3000, seed=1),
    ]


@pytest.mark.parametrize("which", range(5))
def test_builtin_learners_round_trip_and_stay_within_width(which):
    cls, P, learners = _learners()
    learner = learners[which]
    for seed in range(3):
        c = cls[(5 * seed + 2) % len(cls)]
        tr = run_stream(learner, P, c, max(learner.declared_m, 50), rng_seed=seed)
        assert tr.bits_max_observed <= tr.bits_declared


def test_run_stream_reproducible():
    cls, P, learners = _learners()
    a = run_stream(learners[4], P, cls[6], 3000, rng_seed=9).to_dict()
    b = run_stream(learners[4], P, cls[6], 3000, rng_seed=9).to_dict()
    assert a == b


def test_running_sum_estimate():
    h = np.array([1, 1, -1, -1])
    c = np.array([1, -1, -1, 1])
    learner = RunningSumLearner(h, 4)
    state = learner.initial_state()
    for i, x in enumerate([0, 1, 2, 3]):
        state = learner.update(state, LabeledExample(x, int(c[x])), i)
    assert learner.estimate(state) == 0.0
    assert learner.round_trip(state, 4) <= learner.state_width


def test_bbm_stream_declares_refs_and_counters():
    cls = threshold_class(12)
    p = BoostParams.auto(1 / 12, 0.1, T=30)
    learner = BBMStreamingLearner(cls, p, m0=20, declared_m=3000, seed=1)
    k = len(cls)
    want = (width_for(p.T) + width_for(20) + width_for(p.abort_window) + 1
            + p.T * width_for(2 * k - 1) + k * width_for(40))
    assert learner.state_width == want


def test_triviality_examples():
    C, X, eps = 64, 64, 0.05
    lc = math.log2(C)
    erm = triviality_check(lc / eps, lc * (math.log2(X) + math.log2(1 / eps)), C, X, eps, slack=1.0)
    assert not erm.nontrivial
    enum = triviality_check(C * lc / eps, lc, C, X, eps, slack=1.0)
    assert not enum.nontrivial
    small = triviality_check(10, 3, C, X, eps, slack=1.0)
    assert small.nontrivial and small.advisory
    assert small.m_bound == pytest.approx(C * lc / eps)
    assert small.b_bound == pytest.approx(lc * (math.log2(X) + math.log2(1 / eps)))
