"""Exact dependence measures of finite joint distributions.

Every coefficient is evaluated from the normalized deviation
``D = (q - r c^T)/sqrt(r c^T)`` of the joint (see :mod:`mixchain.chain_core`):

* ``eta - 1 = D / sqrt(r c^T)``
* ``psi = max |eta - 1|``
* ``rho`` = largest singular value of ``D`` (the second of ``q/sqrt(r c^T)``)
* ``beta = 1/2 sum |D| sqrt(r c^T)``
* ``I = sum r c^T phi(eta - 1)`` with ``phi(x) = (1+x) log(1+x) - x >= 0``

The last form drops the linear term, whose cell sum is exactly zero, so the
information coefficient is a sum of nonnegative terms.  Logarithms are
natural throughout.  States of zero marginal mass are dropped before any
coefficient is computed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import special

from .chain_core import DEFAULT_MAX_CELLS, FiniteChain, JointPMF2, as_prob_vector, joint_lags, pair_joint
from .errors import DegenerateEvent, InvalidM, TooManyStates, ZeroMarginal

ONE_TOL = 1e-9
LAMBDA_MAX_STATES = 16
_SERIES_CUTOFF = 0.1


def _joint(q) -> JointPMF2:
    return q if isinstance(q, JointPMF2) else JointPMF2.from_matrix(q)


def _parts(q) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    # sqrt(r c^T) is formed from square roots so masses near 1e-300 do not underflow
    j = _joint(q).drop_zero_marginals()
    s = np.sqrt(j.row_marginal)[:, None] * np.sqrt(j.col_marginal)[None, :]
    return j.normalized_deviation(), s, j.row_marginal, j.col_marginal


def eta(q, i: int, j: int) -> float:
    """``P(A=i, B=j) / (P(A=i) P(B=j))``."""
    q = _joint(q)
    r, c = q.row_marginal[i], q.col_marginal[j]
    if r <= 0 or c <= 0:
        raise ZeroMarginal(f"marginal mass of cell ({i}, {j}) is zero")
    return float(q.q[i, j] / (r * c))


def psi_from_joint(q) -> float:
    """Largest ``|eta - 1|`` over atom pairs.

    For purely atomic sigma-fields the event supremum is attained on atoms.
    """
    d, s, _, _ = _parts(q)
    return float(np.max(np.abs(d) / s))


def rho_max_corr(q) -> float:
    """Maximal correlation, clamped to ``[0, 1]``."""
    d = _parts(q)[0]
    if d.size == 0:
        return 0.0
    s = np.linalg.svd(d, compute_uv=False)
    return float(min(max(s[0], 0.0), 1.0))


def beta_from_joint(q) -> float:
    """Absolute regularity: half the total variation to the product law."""
    d, s, _, _ = _parts(q)
    return float(0.5 * np.sum(np.abs(d) * s))


def _phi(x: np.ndarray) -> np.ndarray:
    """``(1+x) log1p(x) - x`` without cancellation near 0; ``phi(-1) = 1``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUTOFF
    xs = x[small]
    acc = np.zeros_like(xs)
    for k in range(20, 1, -1):
        acc = acc * (-xs) + 1.0 / (k * (k - 1))
    out[small] = xs * xs * acc
    xl = x[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        big = special.xlogy(1.0 + xl, 1.0 + xl) - xl
    out[~small] = big
    return out


def info_from_joint(q) -> float:
    """Coefficient of information (mutual information), in nats."""
    d, s, _, _ = _parts(q)
    x = np.maximum(d / s, -1.0)  # empty cells sit at -1 up to rounding
    return float(np.sum((s * _phi(x)) * s))


def entropy(p) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    p = as_prob_vector(p)
    return math.fsum(special.entr(p))


def _subset_masks(k: int, mass: np.ndarray) -> np.ndarray:
    bits = (np.arange(1, 2**k)[:, None] >> np.arange(k)) & 1
    keep = bits @ mass <= 0.5 + 1e-12
    return bits[keep].astype(float)


def lambda_from_joint(q, max_states: int = LAMBDA_MAX_STATES, chunk_cells: int = 4_000_000) -> float:
    """``sup |P(A n B) - P(A)P(B)| / sqrt(P(A)P(B))`` over event pairs.

    Replacing an event by its complement flips the sign of the numerator and
    only shrinks the denominator when the event had mass above 1/2, so it is
    enough to enumerate subsets of mass at most 1/2 on each side.
    """
    d, s, r, c = _parts(q)
    if max(d.shape) > max_states:
        raise TooManyStates(f"lambda enumeration is capped at {max_states} states per side")
    w = d * s
    sa = _subset_masks(r.size, r)
    sb = _subset_masks(c.size, c)
    if sa.size == 0 or sb.size == 0:
        return 0.0
    pa, pb = sa @ r, sb @ c
    aw = sa @ w
    step = max(1, chunk_cells // len(sb))
    best = 0.0
    for lo in range(0, len(sa), step):
        num = aw[lo:lo + step] @ sb.T
        ratio = np.abs(num) / (np.sqrt(pa[lo:lo + step])[:, None] * np.sqrt(pb)[None, :])
        best = max(best, float(ratio.max()))
    return best


@dataclass(frozen=True)
class DependenceReport:
    psi: float
    rho: float
    beta: float
    info: float
    lambda_opt: float | None
    h_row: float
    h_col: float

    def to_dict(self) -> dict:
        return {
            "psi": self.psi,
            "rho": self.rho,
            "beta": self.beta,
            "info": self.info,
            "lambda": self.lambda_opt,
            "h_row": self.h_row,
            "h_col": self.h_col,
        }


def dependence_report(q, with_lambda: bool = False) -> DependenceReport:
    q = _joint(q)
    return DependenceReport(
        psi=psi_from_joint(q),
        rho=rho_max_corr(q),
        beta=beta_from_joint(q),
        info=info_from_joint(q),
        lambda_opt=lambda_from_joint(q) if with_lambda else None,
        h_row=entropy(q.row_marginal),
        h_col=entropy(q.col_marginal),
    )


def lag_report(chain: FiniteChain, n: int, with_lambda: bool = False) -> DependenceReport:
    """Coefficients of ``(sigma(X_0), sigma(X_n))``.

    For a Markov chain these equal the past/future coefficients at lag n.
    """
    return dependence_report(pair_joint(chain, n), with_lambda=with_lambda)


def rho_index_sets(chain: FiniteChain, s: Iterable[int], t: Iterable[int], max_cells: int = DEFAULT_MAX_CELLS) -> float:
    """Maximal correlation between ``sigma(X_k, k in s)`` and ``sigma(X_k, k in t)``.

    A lower bound for the interlaced coefficient at ``dist(s, t)``.
    """
    s, t = set(s), set(t)
    if not s or not t:
        raise ValueError("index sets must be nonempty")
    if s & t:
        raise ValueError("index sets must be disjoint")
    tensor = joint_lags(chain, s | t, max_cells=max_cells)
    return rho_max_corr(tensor.bipartite(s, t))


def indicator_correlation(chain: FiniteChain, m: int, top_state: int) -> float:
    """``Corr(1{X_0 = top}, 1{X_-m = X_m = top - m})``.

    ``m = 0`` collapses both events to ``{X_0 = top}``.
    """
    if not 0 <= m < top_state / 2 or top_state >= chain.k:
        raise InvalidM(f"need 0 <= m < top_state/2 with top_state < {chain.k}; got m={m}, top={top_state}")
    pa = float(chain.pi[top_state])
    if m == 0:
        pb, pab = pa, pa
    else:
        mass = joint_lags(chain, (-m, 0, m)).mass
        b = top_state - m
        pb = float(mass[b, :, b].sum())
        pab = float(mass[b, top_state, b])
    if not (0 < pa < 1 and 0 < pb < 1):
        raise DegenerateEvent("indicator events must have probability strictly between 0 and 1")
    return (pab - pa * pb) / math.sqrt(pa * (1 - pa) * pb * (1 - pb))


@dataclass(frozen=True, eq=False)
class PsiRatioTable:
    """``g[i, j] = P^lag[i, j] / pi[j]``; ``excess`` is ``g - 1`` computed accurately."""

    g: np.ndarray
    excess: np.ndarray

    @property
    def psi(self) -> float:
        return float(np.max(np.abs(self.excess)))


def psi_ratio_table(chain: FiniteChain, lag: int) -> PsiRatioTable:
    if lag < 1:
        raise ValueError("lag must be at least 1")
    joint = pair_joint(chain, lag).drop_zero_marginals()
    pi = joint.row_marginal
    s = np.sqrt(pi)
    excess = joint.normalized_deviation() / np.outer(s, s)
    g = (joint.q / pi[:, None]) / pi[None, :]
    return PsiRatioTable(g, excess)
