"""SQ dimension: exact search, greedy lower bounds and neighbourhood-ball search.

The SQ dimension of a class under ``P`` is the largest ``d`` for which some
``d`` members have pairwise ``|<h_i, h_j>_P| <= 1/d``.  Exact search is a
clique search on the "compatible pair" graph; it is exponential in the
worst case, so it is capped (``Config.exact_cap``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import get_config
from .core import ConceptClass, Distribution, is_mu_close
from .errors import ClassTooLargeError, ParameterError


@dataclass(frozen=True)
class SQWitness:
    dim: int
    members: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"dim": self.dim, "witness": list(self.members)}


@dataclass
class BallEstimate:
    mu: float
    best_Q: Distribution
    dim_at_best_Q: int
    restarts: int
    witness: SQWitness | None = None
    history: list[int] = field(default_factory=list)  # best dim after each restart

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "best_Q": self.best_Q.probs.tolist(),
            "dim": self.dim_at_best_Q,
            "restarts": self.restarts,
            "witness": list(self.witness.members) if self.witness else None,
            "heuristic": True,
        }


def verify_witness(cls: ConceptClass, P: Distribution, w: SQWitness, atol: float | None = None) -> bool:
    """Check every pair of ``w.members`` against the ``1/w.dim`` bound."""
    if atol is None:
        atol = get_config().witness_atol
    members = list(w.members)
    if w.dim < 1 or len(members) != w.dim or len(set(members)) != len(members):
        return False
    if any(i < 0 or i >= len(cls) for i in members):
        return False
    sub = cls.matrix[members].astype(float)
    G = (sub * P.probs) @ sub.T
    off = np.abs(G[~np.eye(len(members), dtype=bool)])
    return bool(np.all(off <= 1.0 / w.dim + atol))


def _find_clique(adj: list[int], size: int) -> list[int] | None:
    """Some clique of exactly ``size`` vertices in the bitmask graph ``adj``."""
    n = len(adj)
    degree = [bin(a).count("1") for a in adj]

    def grow(chosen: list[int], cand: int) -> list[int] | None:
        if len(chosen) == size:
            return chosen
        need = size - len(chosen)
        if bin(cand).count("1") < need:
            return None
        while cand:
            low = cand & -cand
            v = low.bit_length() - 1
            cand ^= low
            if degree[v] < size - 1:
                continue
            found = grow(chosen + [v], cand & adj[v])
            if found is not None:
                return found
            if bin(cand).count("1") < need:
                return None
        return None

    return grow([], (1 << n) - 1)


def sq_dim_exact(cls: ConceptClass, P: Distribution, cap: int | None = None) -> SQWitness:
    """Maximal ``d`` with a witness, by descending ``d`` and clique search."""
    cfg = get_config()
    cap = cfg.exact_cap if cap is None else cap
    m = len(cls)
    if m > cap:
        raise ClassTooLargeError(
            f"exact mode is capped at {cap} concepts (class has {m}); use sq_dim_greedy"
        )
    absG = np.abs(cls.gram(P))
    for d in range(m, 1, -1):
        ok = absG <= 1.0 / d + cfg.witness_atol
        adj = [
            sum(1 << j for j in range(m) if j != i and ok[i, j])
            for i in range(m)
        ]
        clique = _find_clique(adj, d)
        if clique is not None:
            return SQWitness(d, tuple(sorted(clique)))
    return SQWitness(1, (0,))


def sq_dim_greedy(cls: ConceptClass, P: Distribution, rng_seed=None) -> SQWitness:
    """Certified lower bound: grow a set in random order, keep what still fits."""
    atol = get_config().witness_atol
    rng = np.random.default_rng(rng_seed)
    absG = np.abs(cls.gram(P))
    chosen: list[int] = []
    for i in rng.permutation(len(cls)):
        trial = chosen + [int(i)]
        bound = 1.0 / len(trial) + atol
        sub = absG[np.ix_(trial, trial)]
        if np.all(sub[~np.eye(len(trial), dtype=bool)] <= bound):
            chosen = trial
    w = SQWitness(len(chosen), tuple(sorted(chosen)))
    # the growth rule already guarantees this; kept as a cheap guard
    assert verify_witness(cls, P, w)
    return w


def _objective(cls: ConceptClass, Q: Distribution, seed, exact_cap: int) -> SQWitness:
    if len(cls) <= exact_cap:
        return sq_dim_exact(cls, Q)
    return sq_dim_greedy(cls, Q, seed)


def ball_max_sqdim(
    cls: ConceptClass,
    P: Distribution,
    mu: float,
    restarts: int = 10,
    rng_seed=None,
    steps: int | None = None,
) -> BallEstimate:
    """Heuristic lower bound on ``max SQ_Q(C)`` over ``Q`` that are ``mu``-close to ``P``.

    Restart 0 starts at ``P`` itself; later restarts start from random
    ratio vectors.  Each restart gets its own child seed from one
    ``SeedSequence``, so running more restarts only appends work and the
    best dimension is nondecreasing in ``restarts``.
    """
    if mu < 1:
        raise ParameterError(f"mu must be >= 1, got {mu}")
    cfg = get_config()
    steps = cfg.ball_steps if steps is None else steps
    cap = cfg.ball_objective_cap
    p = P.probs
    support = P.support()
    log_half = 0.5 * np.log(mu)

    best_Q = P
    best_w = _objective(cls, P, 0, cap)
    history = []
    children = np.random.SeedSequence(rng_seed).spawn(max(restarts, 1))
    for r in range(max(restarts, 1)):
        rng = np.random.default_rng(children[r])
        if r == 0:
            q = p.copy()
        else:
            # ratios within [mu^-1/2, mu^1/2] stay inside the ball after renormalizing
            ratios = np.exp(rng.uniform(-log_half, log_half, size=p.size))
            q = p * ratios
            q = q / q.sum()
        Q = Distribution(q / q.sum())
        if not is_mu_close(P, Q, mu):
            Q, q = P, p.copy()
        cur = _objective(cls, Q, rng, cap)
        for _ in range(steps if mu > 1 and support.size > 1 else 0):
            x = int(rng.choice(support))
            factor = np.exp(rng.uniform(-np.log(mu), np.log(mu)))
            cand = q.copy()
            cand[x] *= factor
            cand /= cand.sum()
            try:
                Qc = Distribution(cand)
            except ParameterError:
                continue
            if not is_mu_close(P, Qc, mu):
                continue
            w = _objective(cls, Qc, rng, cap)
            if w.dim >= cur.dim:
                q, Q, cur = cand, Qc, w
        if cur.dim > best_w.dim:
            best_Q, best_w = Q, cur
        history.append(best_w.dim)
    return BallEstimate(mu, best_Q, best_w.dim, max(restarts, 1), best_w, history)
