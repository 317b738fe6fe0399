"""Condition S(N, eps) building-block chains.

The chain lives on ``{0, ..., N}``.  State 0 carries almost all the mass;
state ``m`` has mass of order ``eps^(2m)`` and the top state ``N`` has mass
``eps^(2N-1)``.  Transitions only move to a neighbouring state, except for
the self-loop at 0, and the pair law is symmetric, so the chain is reversible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain_core import FiniteChain, JointPMF2
from .errors import InvalidParams

N_CAP_MAX = 20
UNDERFLOW_GUARD = 1e-300


@dataclass(frozen=True)
class SBlockParams:
    n_cap: int
    eps: float

    def __post_init__(self):
        if isinstance(self.n_cap, bool) or int(self.n_cap) != self.n_cap:
            raise InvalidParams("n_cap must be an integer")
        object.__setattr__(self, "n_cap", int(self.n_cap))
        object.__setattr__(self, "eps", float(self.eps))
        if not 3 <= self.n_cap <= N_CAP_MAX:
            raise InvalidParams(f"n_cap must be in [3, {N_CAP_MAX}], got {self.n_cap}")
        if not 0 < self.eps <= 1 / 3:
            raise InvalidParams(f"eps must be in (0, 1/3], got {self.eps}")
        if self.eps ** (2 * self.n_cap - 1) < UNDERFLOW_GUARD:
            raise InvalidParams("eps^(2N-1) falls below the underflow guard")

    @property
    def states(self) -> int:
        return self.n_cap + 1


def _params(params, eps=None) -> SBlockParams:
    if isinstance(params, SBlockParams):
        return params
    return SBlockParams(params, eps)


def _edge_masses(p: SBlockParams) -> list[float]:
    # mass of the edge {m-1, m}, m = 1..N
    n, e = p.n_cap, p.eps
    return [e ** (2 * m) for m in range(1, n)] + [e ** (2 * n - 1)]


def check_threshold_inequality(params, eps=None) -> float:
    """``1 - 2 (eps^(2N-1) + sum_{u=1}^{N-1} eps^(2u))``; always above 1/2."""
    p = _params(params, eps)
    return 1.0 - 2.0 * math.fsum(_edge_masses(p))


def s_block_joint(params, eps=None) -> JointPMF2:
    """Exact law of ``(Y_0, Y_1)``."""
    p = _params(params, eps)
    edges = _edge_masses(p)
    q = np.zeros((p.states, p.states))
    q[0, 0] = check_threshold_inequality(p)
    for m, w in enumerate(edges, start=1):
        q[m - 1, m] = q[m, m - 1] = w
    mu = s_block_marginal(p)
    return JointPMF2(q, mu, mu)


def s_block_marginal(params, eps=None) -> np.ndarray:
    """Marginal law of ``Y_0``: each state's mass is the sum of its incident edges."""
    p = _params(params, eps)
    edges = _edge_masses(p)
    n = p.n_cap
    mu = np.empty(p.states)
    mu[0] = p.eps**2 + check_threshold_inequality(p)
    for m in range(1, n):
        mu[m] = edges[m - 1] + edges[m]
    mu[n] = edges[n - 1]
    return mu


def build_s_block(params, eps=None) -> FiniteChain:
    """The S(N, eps) chain: transition rows are joint rows over ``mu``."""
    p = _params(params, eps)
    joint = s_block_joint(p)
    mu = joint.row_marginal
    trans = joint.q / mu[:, None]
    return FiniteChain(mu, trans)


def dyadic_grid(k_min: int = 1, k_max: int = 14) -> list[float]:
    """``eps_k = (1/3) 2^(-k)`` for ``k = k_min..k_max``, decreasing."""
    return [(1 / 3) * 2.0**-k for k in range(k_min, k_max + 1)]
