import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bmlearn.boosting import (
    BoostParams,
    BoostState,
    MajorityHypothesis,
    QuerySimulator,
    SampleWeakLearner,
    bbm_boost,
    bbm_distribution,
    bbm_weight,
    binom_pmf,
    majority_eval,
    reweight,
    round_weights,
    sq_bbm_boost,
    sq_bbm_params,
    sq_simulate_query,
    state_weights,
    weak_sq_learn,
)
from bmlearn.core import ConceptClass, Distribution, ExampleStream, correlation, loss
from bmlearn.errors import DegenerateRoundError, ParameterError, StreamExhaustedError
from bmlearn.generators import generate, parity_class, threshold_class
from bmlearn.oracle import ExactOracle
from bmlearn.sqdim import sq_dim_exact

from reference import ref_bbm_weight, ref_binom_pmf, ref_reweight


def params(gamma=0.1, eps=0.1, T=10, window=50):
    return BoostParams(gamma, eps, T, window, 3.0)


def state_with(p, cls, refs):
    s = BoostState(p, cls.domain_size, cls)
    for r in refs:
        s.append(r)
    return s


# ---------------------------------------------------------------- weights


def test_binom_pmf_examples():
    assert binom_pmf(4, 2, 0.5) == pytest.approx(0.375, abs=1e-15)
    assert binom_pmf(3, -1, 0.7) == 0.0
    assert binom_pmf(3, 4, 0.7) == 0.0
    assert binom_pmf(3, 1, 0.6) == pytest.approx(float(ref_binom_pmf(3, 1, Fraction(3, 5))), abs=1e-15)
    assert binom_pmf(3, 1, 0.6) == pytest.approx(0.288)
    with pytest.raises(ParameterError):
        binom_pmf(3, 1, 1.2)


@given(st.integers(0, 60), st.integers(-3, 63), st.fractions(0, 1))
def test_binom_pmf_matches_exact(n, k, p):
    pf = float(p)
    assert binom_pmf(n, k, pf) == pytest.approx(float(ref_binom_pmf(n, k, Fraction(pf))), rel=1e-9, abs=1e-300)


def test_bbm_weight_examples():
    assert bbm_weight(3, 0, 0, 0.1) == pytest.approx(0.288)
    # floor((T - t - r)/2) < 0 gives zero weight
    assert bbm_weight(4, 3, 3, 0.1) == 0.0
    with pytest.raises(ParameterError):
        bbm_weight(4, 1, 3, 0.1)
    with pytest.raises(ParameterError):
        bbm_weight(4, 5, 0, 0.1)


@pytest.mark.parametrize("T", [1, 2, 3, 6])
def test_bbm_weight_point_mass_at_half(T):
    for t in range(T + 1):
        for r in range(-t, t + 1):
            want = 1.0 if (T - t - r) // 2 == T - t else 0.0
            assert bbm_weight(T, t, r, 0.5) == want


@given(st.integers(1, 40), st.data(), st.fractions(Fraction(1, 100), Fraction(1, 2)))
def test_bbm_weight_in_unit_interval_and_exact(T, data, gamma):
    t = data.draw(st.integers(0, T))
    r = data.draw(st.integers(-t, t))
    w = bbm_weight(T, t, r, float(gamma))
    assert 0.0 <= w <= 1.0
    assert w == pytest.approx(float(ref_bbm_weight(T, t, r, gamma)), rel=1e-9, abs=1e-300)


@given(st.integers(1, 300), st.data(), st.floats(0.005, 0.49))
@settings(max_examples=60)
def test_round_weights_normalized(T, data, gamma):
    t = data.draw(st.integers(0, T))
    w = round_weights(T, t, gamma, np.arange(-t, t + 1))
    assert np.all((w >= 0) & (w <= 1))
    assert w.max() == 1.0


def test_round_weights_degenerate_round():
    # gamma = 1/2 puts all binomial mass on k = T - t, which no margin reaches here
    with pytest.raises(DegenerateRoundError):
        round_weights(1, 0, 0.5, [0])


def test_round_weights_survive_huge_T():
    # raw weights underflow double precision here; the ratios must not
    w = round_weights(200_000, 10, 0.01, np.arange(-10, 11))
    assert w.max() == 1.0 and np.all(w > 0)


# ---------------------------------------------------------------- round distributions


def test_bbm_distribution_round_zero_is_P():
    cls = threshold_class(6)
    P = Distribution([0.1, 0.2, 0.1, 0.3, 0.2, 0.1])
    s = BoostState(params(T=10), 6, cls)
    assert np.allclose(bbm_distribution(P, s, cls[2]).probs, P.probs, atol=1e-15)


def test_reweight_examples():
    out = reweight(Distribution([0.5, 0.5]), [0.2, 0.8])
    assert out.probs.tolist() == pytest.approx([0.2, 0.8], abs=1e-15)
    with pytest.raises(DegenerateRoundError):
        reweight(Distribution([0.5, 0.5]), [0.0, 0.0])


@given(st.integers(0, 2**31), st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_bbm_distribution_matches_exact_reweighting(seed, t):
    rng = np.random.default_rng(seed)
    cls = threshold_class(7)
    w = rng.integers(1, 6, size=7)
    P = Distribution(w / w.sum())
    p = params(gamma=0.15, T=8)
    refs = [(int(rng.integers(len(cls))), int(rng.choice([-1, 1]))) for _ in range(t)]
    s = state_with(p, cls, refs)
    c = cls[int(rng.integers(len(cls)))]
    votes = s.votes()
    weights = [ref_bbm_weight(8, t, int(ci * vi), Fraction(3, 20)) for ci, vi in zip(c, votes)]
    if not any(weights):
        with pytest.raises(DegenerateRoundError):
            bbm_distribution(P, s, c)
        return
    ref = ref_reweight([Fraction(int(v), int(w.sum())) for v in w], weights)
    got = bbm_distribution(P, s, c).probs
    assert got == pytest.approx([float(x) for x in ref], abs=1e-12)


def test_rejection_sampling_induces_round_distribution():
    cls = threshold_class(5)
    P = Distribution([0.3, 0.1, 0.2, 0.25, 0.15])
    c = cls[2]
    s = state_with(params(gamma=0.2, T=6), cls, [(1, 1), (4, 1), (3, 1)])
    Pt = bbm_distribution(P, s, c)
    # analytic identity: P(x) * acceptance(x), renormalized, is the round distribution
    acc = state_weights(s, c)
    assert (P.probs * acc / (P.probs * acc).sum()) == pytest.approx(Pt.probs, abs=1e-15)
    # and the sampler realizes it
    from bmlearn.boosting import _rejection_round

    stream = ExampleStream(P, c, seed=0)
    pts, _, aborted = _rejection_round(stream, s, 40_000, 10_000, np.random.default_rng(1), 4096)
    assert not aborted and len(pts) == 40_000
    freq = np.bincount(pts, minlength=5) / len(pts)
    assert freq == pytest.approx(Pt.probs, abs=0.01)


def test_rejection_round_counts_only_what_it_read():
    cls = threshold_class(5)
    P = Distribution.uniform(5)
    s = BoostState(params(T=6), 5, cls)
    stream = ExampleStream(P, cls[2], seed=0)
    pts, _, _ = _rr(stream, s, 100)
    # round zero accepts everything, so exactly 100 examples were read
    assert stream.consumed == 100


def _rr(stream, s, need):
    from bmlearn.boosting import _rejection_round

    return _rejection_round(stream, s, need, 50, np.random.default_rng(0), 4096)


# ---------------------------------------------------------------- majority


def test_majority_examples():
    h = np.array([1, -1, 1])
    assert [majority_eval(MajorityHypothesis([h]), x) for x in range(3)] == [1, -1, 1]
    assert [majority_eval(MajorityHypothesis([h, -h]), x) for x in range(3)] == [-1, -1, -1]
    three = MajorityHypothesis([np.array([1]), np.array([1]), np.array([-1])])
    assert majority_eval(three, 0) == 1


@given(st.lists(st.lists(st.sampled_from([-1, 1]), min_size=5, max_size=5), min_size=1, max_size=9))
def test_majority_tie_rule(rows):
    m = MajorityHypothesis([np.array(r) for r in rows])
    sums = np.sum(rows, axis=0)
    for x in range(5):
        assert majority_eval(m, x) == (1 if sums[x] > 0 else -1)
    assert m.as_concept().tolist() == [1 if v > 0 else -1 for v in sums]


# ---------------------------------------------------------------- weak learner


def test_weak_learner_examples():
    U = Distribution.uniform(4)
    c = np.array([1, -1, -1, 1])
    assert weak_sq_learn(ExactOracle(c, U), ConceptClass([c]), U, 1).tolist() == c.tolist()
    pair = ConceptClass([c, -c])
    for target in (c, -c):
        assert weak_sq_learn(ExactOracle(target, U), pair, U, 1).tolist() == target.tolist()


def test_weak_learner_threshold_guarantee():
    cls = threshold_class(8)
    U = Distribution.uniform(8)
    d = sq_dim_exact(cls, U).dim
    for c in cls:
        h = weak_sq_learn(ExactOracle(c, U), cls, U, d)
        assert abs(correlation(h, c, U)) >= 1 / (3 * d) - 1e-12


def test_sample_weak_learner_sizes():
    cls = threshold_class(16)
    wl = SampleWeakLearner(cls, 4, fail_prob=0.1)
    # every empirical correlation within 1/12 of the truth: agreement rates within 1/24
    assert wl.m0 == math.ceil(math.log(2 * 17 / 0.1) / (2 * (1 / 24) ** 2))


# ---------------------------------------------------------------- sample BBM


class PerfectWeak:
    m0 = 5

    def __init__(self, c):
        self.c = c

    def __call__(self, points, labels):
        return self.c


def test_bbm_boost_perfect_weak_learner():
    cls = threshold_class(10)
    P = Distribution.uniform(10)
    c = cls[4]
    p = BoostParams.auto(0.45, 0.1)
    res = bbm_boost(ExampleStream(P, c, seed=0), PerfectWeak(c), p, 0, cls=cls)
    assert res.rounds_used == 1
    assert res.majority.as_concept().tolist() == c.tolist()
    assert res.final_loss == 0.0


def test_bbm_boost_threshold_64_success_rate():
    cls, P = generate("threshold:64")
    eps, d = 0.05, 2
    wins = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        c = cls.matrix[int(rng.integers(len(cls)))]
        res = bbm_boost(ExampleStream(P, c, rng), SampleWeakLearner(cls, d), BoostParams.auto(1 / (6 * d), eps), rng)
        wins += res.final_loss is not None and res.final_loss <= eps
    assert wins >= 67


def test_bbm_boost_abort_path():
    # after one perfect round every margin is +1, accepted with probability ~0.007
    cls = ConceptClass([[1, 1], [1, -1]])
    P = Distribution([0.5, 0.5])
    c = np.array([1, 1])
    p = BoostParams(0.49, 0.1, 5, 20, 3.0)
    assert round_weights(5, 1, 0.49, [1])[0] < 0.01
    res = bbm_boost(ExampleStream(P, c, seed=0), PerfectWeak(c), p, 0, cls=cls, validate=False)
    assert res.aborted and res.reason == "rejection_window"
    assert res.rounds_used == 1
    assert res.majority.as_concept().tolist() == c.tolist()


def test_bbm_boost_degenerate_round_stops_cleanly():
    # gamma = 1/2 with T = 1: the only weight is a point mass the margin 0 misses
    cls = ConceptClass([[1, 1], [1, -1]])
    P = Distribution([0.5, 0.5])
    c = np.array([1, 1])
    p = BoostParams(0.5, 0.1, 1, 20, 3.0)
    res = bbm_boost(ExampleStream(P, c, seed=0), PerfectWeak(c), p, 0, cls=cls, validate=False)
    assert res.aborted and res.reason == "degenerate_round"
    assert res.rounds_used == 0 and res.samples_consumed == 0


def test_bbm_boost_stream_exhaustion_carries_partial():
    cls, P = generate("threshold:16")
    c = cls[5]
    with pytest.raises(StreamExhaustedError) as info:
        bbm_boost(ExampleStream(P, c, seed=0, limit=50), SampleWeakLearner(cls, 8), BoostParams.auto(1 / 48, 0.1), 0)
    assert info.value.partial is not None
    assert info.value.partial.reason == "stream_exhausted"


def test_bbm_boost_bits_count_refs_and_counters():
    cls, P = generate("threshold:16")
    c = cls[7]
    wl = SampleWeakLearner(cls, 2)
    p = BoostParams.auto(1 / 12, 0.1)
    res = bbm_boost(ExampleStream(P, c, seed=3), wl, p, 3)
    ref_width = math.ceil(math.log2(cls.signed_size()))
    assert res.bits_counted >= res.rounds_used * ref_width
    assert res.bits_counted < res.rounds_used * ref_width + 4 * 64


# ---------------------------------------------------------------- SQ simulation


def test_simulation_round_zero_is_the_base_answer():
    cls = threshold_class(6)
    P = Distribution([0.1, 0.2, 0.1, 0.3, 0.2, 0.1])
    c = cls[3]
    s = BoostState(params(T=9), 6, cls)
    psi = np.array([1, -1, 1, 1, -1, 1])
    assert sq_simulate_query(psi, s, P, ExactOracle(c, P), 0.1) == pytest.approx(correlation(psi, c, P), abs=1e-15)


@given(st.integers(0, 2**31), st.integers(0, 7))
@settings(max_examples=50, deadline=None)
def test_simulation_exact_with_exact_base(seed, t):
    rng = np.random.default_rng(seed)
    cls = threshold_class(9)
    w = rng.integers(1, 6, size=9)
    P = Distribution(w / w.sum())
    s = state_with(params(gamma=0.1, T=12), cls, [(int(rng.integers(10)), int(rng.choice([-1, 1]))) for _ in range(t)])
    c = cls[int(rng.integers(10))]
    psi = rng.choice([-1, 1], size=9)
    truth = correlation(psi, c, bbm_distribution(P, s, c))
    assert sq_simulate_query(psi, s, P, ExactOracle(c, P), 0.05) == pytest.approx(truth, abs=1e-9)


def test_simulation_two_regions_by_hand():
    # votes (2, 2, 0, 0) after two rounds on a 4-point domain
    cls = ConceptClass([[1, 1, 1, -1], [1, 1, -1, 1]])
    P = Distribution.uniform(4)
    c = np.array([1, -1, 1, -1])
    p = params(gamma=0.25, T=4)
    s = state_with(p, cls, [(0, 1), (1, 1)])
    assert s.votes().tolist() == [2, 2, 0, 0]
    w = [Fraction(ref_bbm_weight(4, 2, int(m), Fraction(1, 4))) for m in c * s.votes()]
    psi = np.array([1, 1, -1, 1])
    want = sum(wi * pi * ci for wi, pi, ci in zip(w, psi, c)) / sum(w)
    assert sq_simulate_query(psi, s, P, ExactOracle(c, P), 0.1) == pytest.approx(float(want), abs=1e-12)
    sim = QuerySimulator(ExactOracle(c, P), P, s)
    assert len(sim.levels) == 2


def test_simulation_base_tolerance():
    s = BoostState(params(eps=0.1, T=10), 4)
    for _ in range(3):
        s.hyp_refs.append(np.array([1, 1, -1, -1], dtype=np.int8))
    sim = QuerySimulator(ExactOracle([1, 1, 1, 1], Distribution.uniform(4)), Distribution.uniform(4), s, c_sim=4)
    assert sim.base_tolerance(0.2) == pytest.approx(0.2 * 0.1**3 / (2 * 4 * 4))


# ---------------------------------------------------------------- SQ BBM


def test_sq_bbm_singleton():
    c = np.array([1, -1, -1, 1, 1])
    cls = ConceptClass([c])
    P = Distribution.uniform(5)
    res = sq_bbm_boost(ExactOracle(c, P), cls, P, 1, 0.1)
    assert res.rounds_used == 1
    assert res.majority.as_concept().tolist() == c.tolist()


@pytest.mark.parametrize("target", [0, 5, 9, 16])
def test_sq_bbm_threshold_16(target):
    cls, P = generate("threshold:16")
    c = cls[target]
    d = sq_dim_exact(cls.subset(range(0, 17, 2)), P).dim
    res = sq_bbm_boost(ExactOracle(c, P), cls, P, d, 0.1)
    assert loss(res.majority.as_concept(), c, P) <= 0.1
    assert res.min_tolerance is not None and res.queries_consumed > 0


def test_sq_bbm_parity_honest_dimension():
    cls = parity_class(3)
    P = Distribution.uniform(8)
    c = cls[5]
    p = sq_bbm_params(8, 0.1)
    assert p.gamma == pytest.approx(1 / (6 * 32))
    res = sq_bbm_boost(ExactOracle(c, P), cls, P, 8, 0.1)
    assert res.rounds_used >= 1
    assert loss(res.majority.as_concept(), c, P) <= 0.1
    # weak learner tolerance at dimension 4d
    assert res.state.params.T == BoostParams.rounds_for(1 / 192, 0.1, 2.0)


def test_sq_bbm_rejects_bad_d():
    cls, P = generate("threshold:4")
    with pytest.raises(ParameterError):
        sq_bbm_boost(ExactOracle(cls[0], P), cls, P, 0, 0.1)
