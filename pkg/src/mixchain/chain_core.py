"""Finite-state stationary Markov chains and their exact joint laws.

Everything here is a pure function of immutable inputs.  Arrays stored on
the dataclasses are flagged read-only.

Besides the plain joint ``q[i, j] = pi[i] * P^n[i, j]``, pair joints built
from a chain also carry the *normalized deviation*

    D_n[i, j] = (q[i, j] - pi[i] pi[j]) / sqrt(pi[i] pi[j]),

computed as the n-th power of the deflated operator
``B = diag(sqrt(pi)) (P - 1 pi) diag(1/sqrt(pi))`` instead of by subtracting
two numbers close to one.  All dependence coefficients are functions of
``D_n``, so they keep full relative accuracy far below 1e-16.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csgraph

from .errors import InvalidChain, NotIrreducible, Periodic, TensorTooLarge

PROB_TOL = 1e-12
TENSOR_TOL = 1e-11
DEFAULT_MAX_CELLS = 10**7


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def as_prob_vector(x, tol: float = PROB_TOL) -> np.ndarray:
    """Validate a probability vector and return it as a float array."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidChain("probability vector must be a non-empty 1-d array")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise InvalidChain("probability vector has negative or non-finite entries")
    if abs(math.fsum(v) - 1.0) > tol:
        raise InvalidChain(f"probability vector sums to {math.fsum(v)!r}, not 1")
    return v


def as_transition_matrix(p, tol: float = PROB_TOL) -> np.ndarray:
    """Validate a row-stochastic square matrix."""
    m = np.asarray(p, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidChain("transition matrix must be square and non-empty")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise InvalidChain("transition matrix has negative or non-finite entries")
    sums = np.array([math.fsum(row) for row in m])
    if np.max(np.abs(sums - 1.0)) > tol:
        raise InvalidChain("transition matrix rows do not sum to 1")
    return m


def is_irreducible(p: np.ndarray) -> bool:
    n_comp, _ = csgraph.connected_components(p > 0, directed=True, connection="strong")
    return n_comp == 1


def support_period(p: np.ndarray) -> int:
    """gcd of cycle lengths of the support graph, seen from state 0.

    Only meaningful for irreducible matrices.
    """
    adj = (p > 0).astype(float)
    level = csgraph.shortest_path(adj, indices=0, unweighted=True, directed=True)
    src, dst = np.nonzero(adj)
    ok = np.isfinite(level[src]) & np.isfinite(level[dst])
    diffs = np.abs(level[src[ok]] + 1 - level[dst[ok]]).astype(np.int64)
    return int(np.gcd.reduce(diffs)) if diffs.size else 0


def stationary_distribution(p, tol: float = 1e-14, max_iter: int = 64) -> np.ndarray:
    """Stationary law of an irreducible, aperiodic transition matrix.

    Power iteration from the uniform vector, accelerated by squaring the
    iterated matrix, so step ``k`` applies ``P^(2^k)``.  Convergence is
    declared when the largest *relative* entry change drops below ``tol``,
    which keeps states of mass 1e-200 as accurate as the dominant ones.

    Raises
    ------
    NotIrreducible, Periodic
        Detected structurally on the support graph before iterating.
    """
    p = as_transition_matrix(p)
    if not is_irreducible(p):
        raise NotIrreducible("transition matrix is not irreducible")
    period = support_period(p)
    if period != 1:
        raise Periodic(f"chain has period {period}")
    k = p.shape[0]
    pi = np.full(k, 1.0 / k)
    m = p.copy()
    for _ in range(max_iter):
        new = pi @ m
        new /= math.fsum(new)
        change = np.max(np.abs(new - pi) / new)
        pi = new
        if change <= tol:
            break
        m = m @ m
    else:
        raise InvalidChain("stationary iteration did not converge")
    return pi


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """A strictly stationary finite-state Markov chain ``(pi, p)``.

    ``pi`` must be stationary for ``p`` to within 1e-12 per entry.
    Irreducibility and aperiodicity are recorded, not required.
    """

    pi: np.ndarray
    p: np.ndarray
    k: int = field(init=False)
    irreducible: bool = field(init=False)
    aperiodic: bool = field(init=False)

    def __post_init__(self):
        pi = as_prob_vector(self.pi)
        p = as_transition_matrix(self.p)
        if p.shape[0] != pi.size:
            raise InvalidChain("pi and p have incompatible sizes")
        residual = np.max(np.abs(pi @ p - pi))
        if residual > PROB_TOL:
            raise InvalidChain(f"pi is not stationary for p (residual {residual:.3g})")
        irreducible = is_irreducible(p)
        object.__setattr__(self, "pi", _frozen(pi))
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "k", int(pi.size))
        object.__setattr__(self, "irreducible", irreducible)
        object.__setattr__(self, "aperiodic", irreducible and support_period(p) == 1)

    @classmethod
    def from_transition(cls, p) -> "FiniteChain":
        return cls(stationary_distribution(p), p)

    def stationarity_residual(self) -> float:
        return float(np.max(np.abs(self.pi @ self.p - self.pi)))

    def detailed_balance_residual(self) -> float:
        flow = self.pi[:, None] * self.p
        return float(np.max(np.abs(flow - flow.T)))


def is_reversible(chain: FiniteChain, tol: float = 1e-12) -> bool:
    """True iff ``max |pi_i p_ij - pi_j p_ji| <= tol``."""
    return chain.detailed_balance_residual() <= tol


def m_step(p, m: int) -> np.ndarray:
    """``p`` raised to the power ``m`` by repeated squaring."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    return np.linalg.matrix_power(np.asarray(p, dtype=float), m)


def deflated_operator(chain: FiniteChain) -> np.ndarray:
    """``diag(sqrt pi) (P - 1 pi) diag(1/sqrt pi)`` on the support of pi.

    States with zero stationary mass get zero rows and columns.
    """
    pi, p = chain.pi, chain.p
    s = np.sqrt(pi)
    b = np.zeros_like(p)
    on = pi > 0
    idx = np.ix_(on, on)
    b[idx] = (s[on, None] * p[idx]) / s[None, on] - np.outer(s[on], s[on])
    return b


def centered_step(chain: FiniteChain, n: int) -> np.ndarray:
    """Normalized deviation ``(pi_i P^n_ij - pi_i pi_j)/sqrt(pi_i pi_j)``."""
    if n < 0:
        raise ValueError("lag must be nonnegative")
    if n == 0:
        s = np.sqrt(chain.pi)
        d = np.diag((chain.pi > 0).astype(float)) - np.outer(s, s)
        return d
    return np.linalg.matrix_power(deflated_operator(chain), n)


@dataclass(frozen=True, eq=False)
class JointPMF2:
    """Joint law of two discrete variables, ``q[i, j] = P(A = i, B = j)``.

    ``deviation`` optionally carries ``(q - r c^T)/sqrt(r c^T)`` computed by a
    route more accurate than subtracting from ``q``.
    """

    q: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    deviation: np.ndarray | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.ndim != 2:
            raise InvalidChain("joint must be a 2-d array")
        if np.any(q < 0) or not np.all(np.isfinite(q)):
            raise InvalidChain("joint has negative or non-finite cells")
        if abs(math.fsum(q.ravel()) - 1.0) > PROB_TOL:
            raise InvalidChain("joint mass is not 1")
        r = as_prob_vector(self.row_marginal)
        c = as_prob_vector(self.col_marginal)
        if r.size != q.shape[0] or c.size != q.shape[1]:
            raise InvalidChain("marginal sizes do not match the joint")
        if np.max(np.abs(q.sum(axis=1) - r)) > PROB_TOL or np.max(np.abs(q.sum(axis=0) - c)) > PROB_TOL:
            raise InvalidChain("joint is inconsistent with its marginals")
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "row_marginal", _frozen(r))
        object.__setattr__(self, "col_marginal", _frozen(c))
        if self.deviation is not None:
            d = np.asarray(self.deviation, dtype=float)
            if d.shape != q.shape:
                raise InvalidChain("deviation shape does not match the joint")
            object.__setattr__(self, "deviation", _frozen(d))

    @classmethod
    def from_matrix(cls, q) -> "JointPMF2":
        q = np.asarray(q, dtype=float)
        return cls(q, q.sum(axis=1), q.sum(axis=0))

    @property
    def shape(self) -> tuple[int, int]:
        return self.q.shape

    def normalized_deviation(self) -> np.ndarray:
        if self.deviation is not None:
            return self.deviation
        s = np.sqrt(self.row_marginal)[:, None] * np.sqrt(self.col_marginal)[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.q / s - s
        d[s == 0] = 0.0
        return d

    def drop_zero_marginals(self) -> "JointPMF2":
        """Restrict to rows and columns of positive marginal mass."""
        rows = self.row_marginal > 0
        cols = self.col_marginal > 0
        if rows.all() and cols.all():
            return self
        idx = np.ix_(rows, cols)
        dev = None if self.deviation is None else self.deviation[idx]
        return JointPMF2(self.q[idx], self.row_marginal[rows], self.col_marginal[cols], dev)

    def transpose(self) -> "JointPMF2":
        dev = None if self.deviation is None else self.deviation.T
        return JointPMF2(self.q.T, self.col_marginal, self.row_marginal, dev)


def pair_joint(chain: FiniteChain, lag: int) -> JointPMF2:
    """Exact law of ``(X_0, X_lag)`` with its accurate normalized deviation."""
    q = chain.pi[:, None] * m_step(chain.p, lag)
    return JointPMF2(q, chain.pi, chain.pi, centered_step(chain, lag))


@dataclass(frozen=True, eq=False)
class JointTensor:
    """Law of ``(X_l, l in lags)``; axis ``a`` of ``mass`` is ``lags[a]``."""

    lags: tuple[int, ...]
    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.ndim != len(self.lags):
            raise InvalidChain("tensor rank does not match the number of lags")
        if np.any(m < 0) or abs(math.fsum(m.ravel()) - 1.0) > TENSOR_TOL:
            raise InvalidChain("tensor is not a probability mass")
        object.__setattr__(self, "mass", _frozen(m))

    def marginal(self, lag: int) -> np.ndarray:
        axis = self.lags.index(lag)
        others = tuple(a for a in range(self.mass.ndim) if a != axis)
        return self.mass.sum(axis=others)

    def bipartite(self, s: Iterable[int], t: Iterable[int]) -> JointPMF2:
        """Flatten into a joint of (tuple over ``s``) versus (tuple over ``t``)."""
        s, t = sorted(set(s)), sorted(set(t))
        if set(s) & set(t):
            raise ValueError("index sets must be disjoint")
        missing = (set(s) | set(t)) - set(self.lags)
        if missing:
            raise ValueError(f"lags {sorted(missing)} not in tensor")
        sa = [self.lags.index(x) for x in s]
        ta = [self.lags.index(x) for x in t]
        rest = tuple(a for a in range(self.mass.ndim) if a not in sa + ta)
        m = self.mass.sum(axis=rest) if rest else self.mass
        # after summing, remaining axes keep their relative order
        kept = [a for a in range(self.mass.ndim) if a not in rest]
        order = [kept.index(a) for a in sa + ta]
        m = np.transpose(m, order)
        k = self.mass.shape[0]
        q = m.reshape(k ** len(sa), k ** len(ta))
        q = q / math.fsum(q.ravel())
        return JointPMF2.from_matrix(q)


def joint_lags(chain: FiniteChain, lags: Iterable[int], max_cells: int = DEFAULT_MAX_CELLS) -> JointTensor:
    """Exact law of the chain at the given (possibly negative) time lags.

    The lag set is shifted so its minimum is 0, which stationarity allows,
    and the law is built by chain-rule products of multi-step kernels.
    """
    ls = sorted(set(int(x) for x in lags))
    if not ls:
        raise ValueError("at least one lag is required")
    cells = chain.k ** len(ls)
    if cells > max_cells:
        raise TensorTooLarge(f"{cells} cells exceed the cap of {max_cells}")
    kernels: dict[int, np.ndarray] = {}
    mass = np.array(chain.pi)
    for prev, cur in zip(ls, ls[1:]):
        gap = cur - prev
        if gap not in kernels:
            kernels[gap] = m_step(chain.p, gap)
        mass = mass[..., :, None] * kernels[gap]
    return JointTensor(tuple(ls), mass)


@dataclass(frozen=True)
class PathSample:
    states: np.ndarray
    seed: int


def _draw(cum: Sequence[float], u: float) -> int:
    return bisect.bisect_right(cum, u)


def sample_path(chain: FiniteChain, length: int, seed: int) -> PathSample:
    """Stationary sample path: ``X_0 ~ pi``, then successors from rows of ``p``.

    Bit-reproducible for a given ``seed`` (numpy PCG64 stream).
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    rng = np.random.default_rng(seed)
    u = rng.random(length).tolist()

    def cumulative(row):
        c = np.cumsum(row)
        last = int(np.flatnonzero(np.asarray(row) > 0)[-1])
        c[last:] = 1.0  # u < 1 can never land on a trailing zero-mass state
        return c.tolist()

    init = cumulative(chain.pi)
    rows = [cumulative(row) for row in chain.p]
    out = [0] * length
    x = _draw(init, u[0])
    out[0] = x
    for t in range(1, length):
        x = _draw(rows[x], u[t])
        out[t] = x
    return PathSample(np.asarray(out, dtype=np.int64), seed)
