"""Boost-By-Majority: weights, rejection sampling, and the SQ variant.

Weights follow the binomial potential ``Binom(T - t, floor((T - t - r)/2), 1/2 + gamma)``.
Here ``r`` is the label-signed margin ``c(x) * sum_i h_i(x)``: the number of
correct votes minus the number of wrong ones.  Points with many correct votes
get small weight, which is what concentrates later rounds on the errors.
Weights are used relative to the round maximum ``w_max(t)``, so the best
possible point is always accepted with probability one.

The SQ variant never sees examples.  Every query the weak learner asks
about the round distribution ``P_t`` is rewritten into a handful of base
queries about ``P``; see :class:`QuerySimulator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import Config, get_config
from .core import ConceptClass, Distribution, ExampleStream, as_concept, loss
from .errors import DegenerateRoundError, ParameterError, StreamExhaustedError
from .oracle import EmpiricalOracle, SQOracle, sample_size


def _bits(k: int) -> int:
    """Bits needed to store an integer in ``[0, k]``."""
    return max(int(k), 0).bit_length()


# ---------------------------------------------------------------- weights


def binom_pmf(n: int, k: int, p: float) -> float:
    """``C(n,k) p^k (1-p)^(n-k)``; zero when ``k`` is out of ``[0, n]``."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"p must lie in [0, 1], got {p}")
    if n < 0:
        raise ParameterError(f"n must be >= 0, got {n}")
    if k < 0 or k > n:
        return 0.0
    if p == 0.0:
        return 1.0 if k == 0 else 0.0
    if p == 1.0:
        return 1.0 if k == n else 0.0
    log_c = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    return math.exp(log_c + k * math.log(p) + (n - k) * math.log1p(-p))


def _log_binom_pmf(n: int, ks: np.ndarray, p: float) -> np.ndarray:
    ks = np.asarray(ks)
    out = np.full(ks.shape, -np.inf)
    ok = (ks >= 0) & (ks <= n)
    if p == 0.0:
        out[ok & (ks == 0)] = 0.0
        return out
    if p == 1.0:
        out[ok & (ks == n)] = 0.0
        return out
    k = ks[ok].astype(float)
    lg = np.vectorize(math.lgamma, otypes=[float])
    out[ok] = (math.lgamma(n + 1) - lg(k + 1) - lg(n - k + 1)
               + k * math.log(p) + (n - k) * math.log1p(-p))
    return out


def _check_round(T: int, t: int, gamma: float) -> None:
    if T < 1 or not 0 <= t <= T:
        raise ParameterError(f"need 0 <= t <= T and T >= 1, got t={t}, T={T}")
    if not 0.0 < gamma <= 0.5:
        raise ParameterError(f"gamma must lie in (0, 1/2], got {gamma}")


def bbm_weight(T: int, t: int, r: int, gamma: float) -> float:
    """Raw weight of a point with margin ``r`` entering round ``t + 1``."""
    _check_round(T, t, gamma)
    if abs(r) > t:
        raise ParameterError(f"|r| must be <= t, got r={r}, t={t}")
    return binom_pmf(T - t, (T - t - r) // 2, 0.5 + gamma)


def round_weights(T: int, t: int, gamma: float, margins) -> np.ndarray:
    """Weights ``w(r) / w_max(t)`` for an array of margins, all in ``[0, 1]``.

    Computed in log space so that rounds with astronomically small raw
    weights (large ``T``) keep their relative sizes.
    """
    _check_round(T, t, gamma)
    margins = np.asarray(margins, dtype=np.int64)
    levels = np.arange(-t, t + 1, 2)
    log_levels = _log_binom_pmf(T - t, (T - t - levels) // 2, 0.5 + gamma)
    top = log_levels.max()
    if not np.isfinite(top):
        raise DegenerateRoundError(f"every weight is zero in round {t}")
    logs = _log_binom_pmf(T - t, (T - t - margins) // 2, 0.5 + gamma)
    return np.exp(logs - top)


def reweight(P: Distribution, weights) -> Distribution:
    """``w(x) P(x) / Z``; raises ``DegenerateRoundError`` when ``Z = 0``."""
    w = np.asarray(weights, dtype=float)
    mass = w * P.probs
    Z = mass.sum()
    if not Z > 0:
        raise DegenerateRoundError("normalizer Z is zero")
    return Distribution(mass / Z)


# ---------------------------------------------------------------- state


@dataclass(frozen=True)
class BoostParams:
    gamma: float
    epsilon: float
    T: int
    abort_window: int
    c_abort: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 0.5:
            raise ParameterError(f"gamma must lie in (0, 1/2], got {self.gamma}")
        if not 0.0 < self.epsilon < 1.0:
            raise ParameterError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.T < 1 or self.abort_window < 1 or self.c_abort <= 0:
            raise ParameterError("T, abort_window and c_abort must be positive")

    @staticmethod
    def rounds_for(gamma: float, epsilon: float, c_T: float) -> int:
        return max(1, math.ceil(c_T * math.log(1.0 / epsilon) / gamma ** 2))

    @staticmethod
    def window_for(epsilon: float, T: int, c_abort: float) -> int:
        return max(1, math.ceil(c_abort * math.log(T + 1) / epsilon ** 3))

    @classmethod
    def auto(cls, gamma: float, epsilon: float, cfg: Config | None = None, T: int | None = None) -> "BoostParams":
        cfg = cfg or get_config()
        if T is None:
            T = cls.rounds_for(gamma, epsilon, cfg.c_T)
        return cls(gamma, epsilon, T, cls.window_for(epsilon, T, cfg.c_abort), cfg.c_abort)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "epsilon": self.epsilon, "T": self.T,
                "abort_window": self.abort_window, "c_abort": self.c_abort}


@dataclass
class BoostState:
    """Round index plus references to the weak hypotheses chosen so far.

    A reference is ``(class_index, sign)`` when the hypothesis is a signed
    class member and a ±1 vector otherwise.  Votes are recomputed from the
    references every time they are needed.
    """

    params: BoostParams
    n: int
    cls: ConceptClass | None = None
    hyp_refs: list = field(default_factory=list)

    @property
    def t(self) -> int:
        return len(self.hyp_refs)

    def hypothesis(self, ref) -> np.ndarray:
        if isinstance(ref, tuple):
            idx, sign = ref
            return self.cls.matrix[idx] * np.int8(sign)
        return ref

    def append(self, ref) -> None:
        if self.t >= self.params.T:
            raise ParameterError("all T rounds are already used")
        if isinstance(ref, tuple):
            if self.cls is None:
                raise ParameterError("class references need a concept class")
        else:
            ref = as_concept(ref, self.n)
        self.hyp_refs.append(ref)

    def votes(self) -> np.ndarray:
        v = np.zeros(self.n, dtype=np.int64)
        for ref in self.hyp_refs:
            v += self.hypothesis(ref)
        return v

    def ref_width(self) -> int:
        if self.cls is not None and all(isinstance(r, tuple) for r in self.hyp_refs):
            return math.ceil(math.log2(max(self.cls.signed_size(), 2)))
        return self.n

    def majority(self) -> "MajorityHypothesis":
        return MajorityHypothesis([self.hypothesis(r) for r in self.hyp_refs], self.n)


class MajorityHypothesis:
    """``+1`` where the vote sum is positive, ``-1`` otherwise (ties included)."""

    def __init__(self, members, n: int | None = None):
        self.members = [np.asarray(h) for h in members]
        if n is None:
            if not self.members:
                raise ParameterError("an empty majority needs the domain size")
            n = self.members[0].shape[0]
        self.n = n

    def votes(self) -> np.ndarray:
        v = np.zeros(self.n, dtype=np.int64)
        for h in self.members:
            v += h
        return v

    def as_concept(self) -> np.ndarray:
        return as_concept(np.where(self.votes() > 0, 1, -1))

    def __call__(self, x: int) -> int:
        return majority_eval(self, x)

    def __len__(self) -> int:
        return len(self.members)


def majority_eval(m: MajorityHypothesis, x: int) -> int:
    s = sum(int(h[x]) for h in m.members)
    return 1 if s > 0 else -1


def state_weights(state: BoostState, target) -> np.ndarray:
    """Normalized weights of every point; needs the target for the margins."""
    p = state.params
    margins = np.asarray(target, dtype=np.int64) * state.votes()
    return round_weights(p.T, state.t, p.gamma, margins)


def bbm_distribution(P: Distribution, state: BoostState, target) -> Distribution:
    """The round distribution ``P_t`` (exact); for tests and audits only."""
    return reweight(P, state_weights(state, target))


# ---------------------------------------------------------------- weak learners


@dataclass
class WeakChoice:
    index: int
    sign: int
    answer: float
    cover: list[int]
    answers: np.ndarray

    @property
    def ref(self) -> tuple[int, int]:
        return (self.index, self.sign)


def greedy_cover(gram: np.ndarray, d: int, atol: float | None = None) -> list[int]:
    """Class-order greedy set with pairwise ``|gram| <= 1/d``."""
    if atol is None:
        atol = get_config().witness_atol
    bound = 1.0 / d + atol
    absG = np.abs(gram)
    cover: list[int] = []
    for i in range(absG.shape[0]):
        if all(absG[i, j] <= bound for j in cover):
            cover.append(i)
    return cover


def weak_sq_select(oracle, cls: ConceptClass, P: Distribution, d: int, gram=None) -> WeakChoice:
    """The choice behind :func:`weak_sq_learn`, with its cover and answers.

    ``gram`` defaults to the exact correlation matrix under ``P``.  When the
    oracle answers about a distribution the learner cannot compute (a
    boosting round), the caller passes that distribution's matrix instead.
    """
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    tau = 1.0 / (3 * d)
    G = cls.gram(P) if gram is None else np.asarray(gram)
    cover = greedy_cover(G, d)
    answers = np.asarray(oracle.answer_many(cls.matrix[cover], tau), dtype=float)
    k = int(np.argmax(np.abs(answers)))
    sign = 1 if answers[k] >= 0 else -1
    return WeakChoice(cover[k], sign, float(answers[k]), cover, answers)


def weak_sq_learn(oracle, cls: ConceptClass, P: Distribution, d: int, gram=None) -> np.ndarray:
    """Cover-and-query weak learner; returns a signed class member."""
    ch = weak_sq_select(oracle, cls, P, d, gram)
    return cls.matrix[ch.index] * np.int8(ch.sign)


class SampleWeakLearner:
    """Weak learner from ``m0`` examples of the round distribution.

    Both the cover and the answers come from the empirical distribution of
    the examples, so nothing about the round distribution has to be known.
    ``m0`` puts every empirical correlation within ``1/(3d)`` of the truth
    (Hoeffding on the agreement rate at half that, union bound over the class).
    """

    def __init__(self, cls: ConceptClass, d: int, fail_prob: float | None = None):
        self.cls = cls
        self.d = d
        self.tau = 1.0 / (3 * d)
        fail = get_config().weak_fail_prob if fail_prob is None else fail_prob
        self.m0 = sample_size(self.tau / 2, fail / len(cls))

    def __call__(self, points: np.ndarray, labels: np.ndarray) -> WeakChoice:
        n = self.cls.domain_size
        emp = Distribution(np.bincount(points, minlength=n) / len(points), atol=1e-9)
        oracle = EmpiricalOracle(points, labels, n)
        return weak_sq_select(oracle, self.cls, emp, self.d)

    def failed(self, ch: WeakChoice) -> bool:
        return abs(ch.answer) < 1.0 / self.d - self.tau

    def buffer_bits(self) -> int:
        n = self.cls.domain_size
        return self.m0 * (math.ceil(math.log2(max(n, 2))) + 1)


# ---------------------------------------------------------------- sample BBM


@dataclass
class BoostResult:
    majority: MajorityHypothesis
    state: BoostState
    rounds_used: int
    samples_consumed: int
    bits_counted: int
    aborted: bool
    reason: str
    flagged_rounds: list[int] = field(default_factory=list)
    weak_buffer_bits: int = 0
    final_loss: float | None = None

    def to_dict(self) -> dict:
        return {
            "rounds_used": self.rounds_used,
            "samples_consumed": self.samples_consumed,
            "queries_consumed": 0,
            "min_tolerance": None,
            "bits_counted": self.bits_counted,
            "final_loss": self.final_loss,
            "aborted": self.aborted,
            "reason": self.reason,
            "flagged_rounds": self.flagged_rounds,
            "weak_buffer_bits": self.weak_buffer_bits,
        }


def bbm_bits(params: BoostParams, refs: int, ref_width: int, m0: int, n_val: int = 0) -> int:
    """State bits: references plus round, acceptance, rejection and validation counters."""
    return (refs * ref_width + _bits(params.T) + _bits(m0)
            + _bits(params.abort_window) + _bits(n_val))


def validation_size(params: BoostParams, cfg: Config | None = None) -> int:
    cfg = cfg or get_config()
    return math.ceil(cfg.val_const * math.log(3 * params.T) / params.epsilon)


def _rejection_round(stream: ExampleStream, state: BoostState, need: int, window: int,
                     rng: np.random.Generator, chunk: int, max_chunk: int = 1 << 20):
    """Accept ``need`` examples or stop after ``window`` consecutive rejections.

    Returns ``(points, labels, aborted)``.  Examples drawn past the stopping
    point are pushed back, so the stream's counter reflects what was read.
    """
    p = state.params
    votes = state.votes()
    t = state.t
    table = round_weights(p.T, t, p.gamma, np.arange(-t, t + 1))
    acc_pts, acc_lab = [], []
    got = 0
    run = 0  # rejections since the last acceptance
    drawn = 0
    while True:
        pts, labels = stream.draw(chunk)
        drawn += len(pts)
        margins = labels.astype(np.int64) * votes[pts]
        idx = np.flatnonzero(rng.random(len(pts)) < table[margins + t])
        prev = -1 - run  # virtual position of the last acceptance
        gaps = np.diff(np.concatenate([[prev], idx])) - 1
        over = np.flatnonzero(gaps >= window)
        left = need - got
        if over.size and over[0] < left:
            j = over[0]
            last = prev if j == 0 else idx[j - 1]
            acc_pts.append(pts[idx[:j]])
            acc_lab.append(labels[idx[:j]])
            stream.push_back(pts[last + 1 + window:])
            return np.concatenate(acc_pts), np.concatenate(acc_lab), True
        if idx.size >= left:
            take = idx[:left]
            acc_pts.append(pts[take])
            acc_lab.append(labels[take])
            stream.push_back(pts[take[-1] + 1:])
            return np.concatenate(acc_pts), np.concatenate(acc_lab), False
        acc_pts.append(pts[idx])
        acc_lab.append(labels[idx])
        got += idx.size
        last = idx[-1] if idx.size else prev
        run = len(pts) - 1 - last
        if run >= window:
            stream.push_back(pts[last + 1 + window:])
            return np.concatenate(acc_pts), np.concatenate(acc_lab), True
        # size the next chunk from the acceptance rate seen so far
        rate = max(got, 1) / drawn
        chunk = int(min(max(chunk, 1.5 * (need - got) / rate), max_chunk))


def bbm_boost(
    stream: ExampleStream,
    weak,
    params: BoostParams,
    rng_seed=None,
    *,
    cls: ConceptClass | None = None,
    validate: bool = True,
    observer: Callable | None = None,
    chunk: int = 4096,
) -> BoostResult:
    """Boost-By-Majority over an example stream with rejection sampling.

    ``weak`` needs an ``m0`` attribute and must map ``(points, labels)`` of
    accepted examples to a :class:`WeakChoice` (or a ±1 vector); an optional
    ``weak.failed(choice)`` flags rounds whose advantage looks too small.
    With ``validate`` on, each round ends by testing the current majority on
    fresh examples and stopping once its empirical error is at most
    ``epsilon / 2``.
    """
    rng = np.random.default_rng(rng_seed)
    n = stream.P.size
    cls = cls if cls is not None else getattr(weak, "cls", None)
    state = BoostState(params, n, cls)
    start = stream.consumed
    n_val = validation_size(params) if validate else 0
    flagged: list[int] = []
    aborted, reason = False, "rounds_exhausted"
    try:
        for t in range(params.T):
            if observer is not None:
                observer(state)
            try:
                pts, labels, hit = _rejection_round(stream, state, weak.m0, params.abort_window, rng, chunk)
            except DegenerateRoundError:
                aborted, reason = True, "degenerate_round"
                break
            if hit:
                aborted, reason = True, "rejection_window"
                break
            ch = weak(pts, labels)
            if isinstance(ch, WeakChoice):
                if hasattr(weak, "failed") and weak.failed(ch):
                    flagged.append(t)
                ref = ch.ref
            else:
                ref = as_concept(ch, n)
            state.append(ref)
            if validate:
                vp, vl = stream.draw(n_val)
                maj = state.majority().as_concept()
                if np.mean(maj[vp] != vl) <= params.epsilon / 2:
                    reason = "target_reached"
                    break
    except StreamExhaustedError as exc:
        exc.partial = _result(state, stream, start, params, weak, n_val, True, "stream_exhausted", flagged)
        raise
    return _result(state, stream, start, params, weak, n_val, aborted, reason, flagged)


def _result(state, stream, start, params, weak, n_val, aborted, reason, flagged) -> BoostResult:
    maj = state.majority()
    bits = bbm_bits(params, state.t, state.ref_width(), weak.m0, n_val)
    final = loss(maj.as_concept(), stream.target, stream.P) if state.t else None
    buf = weak.buffer_bits() if hasattr(weak, "buffer_bits") else 0
    return BoostResult(maj, state, state.t, stream.consumed - start, bits, aborted, reason,
                       list(flagged), buf, final)


# ---------------------------------------------------------------- SQ simulation


class QuerySimulator:
    """Answers queries about the round distribution with base queries about ``P``.

    Points are grouped by their label-free vote ``v``.  On group ``R_v`` the
    weight is ``a_v = w(v)`` where the label is ``+1`` and ``b_v = w(-v)``
    where it is ``-1``, i.e. ``A_v + B_v c(x)`` with ``A = (a+b)/2``,
    ``B = (a-b)/2``.  Everything then reduces to the masked correlations
    ``S_v(f) = E_P[1_{R_v} f c]``, each obtained from two ±1 queries that
    agree with ``f`` on ``R_v`` and are constant ``+1`` / ``-1`` elsewhere.
    """

    def __init__(self, base_oracle: SQOracle, P: Distribution, state: BoostState,
                 c_sim: float | None = None, audit: Callable | None = None):
        self.base = base_oracle
        self.P = P
        self.state = state
        self.c_sim = get_config().C_sim if c_sim is None else c_sim
        self.audit = audit
        p = state.params
        votes = state.votes()
        levels = np.unique(votes[P.support()])
        self.masks = votes[None, :] == levels[:, None]
        a = round_weights(p.T, state.t, p.gamma, levels)
        b = round_weights(p.T, state.t, p.gamma, -levels)
        self.A = (a + b) / 2
        self.B = (a - b) / 2
        self.levels = levels
        self.region_mass = self.masks.astype(float) @ P.probs
        self._Z: dict[float, float] = {}

    def base_tolerance(self, tau: float) -> float:
        eps = self.state.params.epsilon
        return tau * eps ** 3 / (2 * self.c_sim * (self.state.t + 1))

    def _masked(self, F: np.ndarray, coef: np.ndarray, tau_b: float) -> np.ndarray:
        """``sum_v coef_v S_v(f)`` for every row ``f`` of ``F``."""
        F = np.asarray(F, dtype=np.int8)
        total = np.zeros(F.shape[0])
        for v in np.flatnonzero(coef != 0):
            mask = self.masks[v]
            if mask.all():
                s = self.base.answer_many(F, tau_b)
            else:
                plus = np.where(mask, F, np.int8(1))
                minus = np.where(mask, F, np.int8(-1))
                both = self.base.answer_many(np.concatenate([plus, minus]), tau_b)
                s = (both[: F.shape[0]] + both[F.shape[0]:]) / 2
            total += coef[v] * s
        return total

    def normalizer(self, tau: float) -> float:
        tau_b = self.base_tolerance(tau)
        if tau_b not in self._Z:
            ones = np.ones((1, self.P.size), dtype=np.int8)
            Z = float(self.A @ self.region_mass + self._masked(ones, self.B, tau_b)[0])
            if not Z > 0:
                raise DegenerateRoundError(f"estimated normalizer {Z!r} is not positive")
            self._Z[tau_b] = Z
        return self._Z[tau_b]

    def _known(self, F: np.ndarray) -> np.ndarray:
        """``E_P[1_{R_v} f]`` for every region (rows) and every ``f`` (columns)."""
        return (self.masks * self.P.probs) @ np.asarray(F, dtype=float).T

    def correlations(self, Psi, tau: float) -> np.ndarray:
        """Estimates of ``<psi, c>_{P_t}`` for each row of ``Psi``."""
        Psi = np.atleast_2d(Psi)
        Z = self.normalizer(tau)
        N = self._masked(Psi, self.A, self.base_tolerance(tau)) + self.B @ self._known(Psi)
        nu = np.clip(N / Z, -1.0, 1.0)
        if self.audit is not None:
            self.audit(self, "correlation", Psi, nu)
        return nu

    def expectations(self, G, tau: float) -> np.ndarray:
        """Estimates of the label-free ``E_{P_t}[g]`` for each row of ``G``."""
        G = np.atleast_2d(G)
        Z = self.normalizer(tau)
        N = self.A @ self._known(G) + self._masked(G, self.B, self.base_tolerance(tau))
        nu = np.clip(N / Z, -1.0, 1.0)
        if self.audit is not None:
            self.audit(self, "expectation", G, nu)
        return nu


def sq_simulate_query(psi, state: BoostState, P: Distribution, base_oracle: SQOracle, tau: float) -> float:
    """One round-distribution correlation query answered through ``base_oracle``."""
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    return float(QuerySimulator(base_oracle, P, state).correlations(psi, tau)[0])


class SimulatedOracle(SQOracle):
    """Oracle facade over a :class:`QuerySimulator` for the weak learner."""

    def __init__(self, sim: QuerySimulator):
        super().__init__()
        self.sim = sim

    def __call__(self, h, tau: float) -> float:
        return float(self.answer_many(np.atleast_2d(h), tau)[0])

    def answer_many(self, H, tau: float) -> np.ndarray:
        H = np.atleast_2d(H)
        self.account.record(tau, k=H.shape[0])
        return self.sim.correlations(H, tau)

    def label_free_gram(self, M: np.ndarray, tau: float) -> np.ndarray:
        """Matrix of ``E_{P_t}[h_i h_j]``, one simulated query per pair ``i < j``."""
        m = M.shape[0]
        iu, ju = np.triu_indices(m, k=1)
        G = np.eye(m)
        if iu.size:
            prods = M[iu] * M[ju]
            self.account.record(tau, k=iu.size)
            vals = self.sim.expectations(prods, tau)
            G[iu, ju] = vals
            G[ju, iu] = vals
        return G


@dataclass
class SQBoostResult:
    majority: MajorityHypothesis
    state: BoostState
    rounds_used: int
    queries_consumed: int
    simulated_queries: int
    min_tolerance: float | None
    aborted: bool
    reason: str
    flagged_rounds: list[int] = field(default_factory=list)
    bits_counted: int = 0
    final_loss: float | None = None

    def to_dict(self) -> dict:
        return {
            "rounds_used": self.rounds_used,
            "samples_consumed": 0,
            "queries_consumed": self.queries_consumed,
            "simulated_queries": self.simulated_queries,
            "min_tolerance": self.min_tolerance,
            "bits_counted": self.bits_counted,
            "final_loss": self.final_loss,
            "aborted": self.aborted,
            "reason": self.reason,
            "flagged_rounds": self.flagged_rounds,
            "T": self.state.params.T,
            "gamma": self.state.params.gamma,
        }


def sq_bbm_params(d: int, epsilon: float, cfg: Config | None = None) -> BoostParams:
    """Round parameters for a weak learner run at dimension ``4d``."""
    D = 4 * d
    return BoostParams.auto(1.0 / (6 * D), epsilon, cfg)


def sq_bbm_boost(
    base_oracle: SQOracle,
    cls: ConceptClass,
    P: Distribution,
    d: int,
    epsilon: float,
    *,
    params: BoostParams | None = None,
    stop_tol: float | None = None,
    observer: Callable | None = None,
    audit: Callable | None = None,
) -> SQBoostResult:
    """Boosting in the SQ model; every weak-learner query goes through the simulator.

    After each round the majority's correlation under ``P`` is queried once
    directly (tolerance ``stop_tol``, default ``epsilon/10``) and the run
    stops when that certifies error at most ``epsilon``.
    """
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    params = params or sq_bbm_params(d, epsilon)
    D = 4 * d
    tau_w = 1.0 / (3 * D)
    stop_tol = epsilon / 10 if stop_tol is None else stop_tol
    state = BoostState(params, P.size, cls)
    flagged: list[int] = []
    simulated = 0
    aborted, reason = False, "rounds_exhausted"
    for t in range(params.T):
        if observer is not None:
            observer(state)
        sim = QuerySimulator(base_oracle, P, state, audit=audit)
        facade = SimulatedOracle(sim)
        try:
            G = facade.label_free_gram(cls.matrix, tau_w)
            ch = weak_sq_select(facade, cls, P, D, gram=G)
        except DegenerateRoundError:
            aborted, reason = True, "degenerate_round"
            break
        finally:
            simulated += facade.account.query_count
        if abs(ch.answer) < 1.0 / D - tau_w:
            flagged.append(t)
            aborted, reason = True, "weak_failure"
            break
        state.append(ch.ref)
        nu = base_oracle(state.majority().as_concept(), stop_tol)
        if (1.0 - nu) / 2 <= epsilon - stop_tol / 2:
            reason = "target_reached"
            break
    acct = base_oracle.account
    mt = None if math.isinf(acct.min_tolerance_used) else acct.min_tolerance_used
    bits = state.t * state.ref_width() + _bits(params.T)
    return SQBoostResult(state.majority(), state, state.t, acct.query_count, simulated, mt,
                         aborted, reason, flagged, bits)
