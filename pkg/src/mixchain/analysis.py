"""Epsilon sweeps, exponent fits and cross-checking batteries.

The small-eps statements about S(N, eps) blocks are limits without rates, so
a limit ``-> L`` is checked as a monotone trend over the finest grid points
plus ``|terminal - L|`` below a per-quantity threshold.  Asymptotic power laws
``a_eps ~ c eps^k`` are checked through least-squares slopes on log-log axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import parallel_map
from .building_blocks import SBlockParams, build_s_block, dyadic_grid
from .chain_core import FiniteChain, JointPMF2, is_reversible, m_step, centered_step, pair_joint, sample_path
from .dependence import (
    beta_from_joint,
    entropy,
    indicator_correlation,
    info_from_joint,
    lambda_from_joint,
    psi_from_joint,
    rho_index_sets,
    rho_max_corr,
)
from .errors import InvalidParams, NonPositiveValue, NotReversible

FIT_WINDOW = 6
TREND_WINDOW = 6
LAMBDA_MAX_N = 10
BATTERY_SLACK = -1e-12
SPECTRAL_TOL = 1e-8

# quantity -> (limit, threshold, expected direction as eps decreases)
LIMITS = {
    "entropy": (0.0, 1e-3, "decreasing"),
    "rho1": (0.0, 0.05, "decreasing"),
    "psi_5N": (0.0, 0.05, "decreasing"),
    "lambda1": (0.0, 0.05, "decreasing"),
    "interlaced_m": (1.0, 0.1, "increasing"),
    "indicator_corr_m": (1.0, 0.01, "increasing"),
}
QUANTITIES = ("marginal_m", "transition_ij", "mstep_ij", "entropy", "rho1", "psi_5N",
              "interlaced_m", "indicator_corr_m", "lambda1")


def _direction(values: list[float]) -> str:
    diffs = np.diff(values)
    if np.all(diffs < 0):
        return "decreasing"
    if np.all(diffs > 0):
        return "increasing"
    return "none"


@dataclass(frozen=True)
class SweepResult:
    quantity: str
    n_cap: int
    grid: tuple[tuple[float, float], ...]
    fitted_exponent: float | None
    monotone: bool
    direction: str
    terminal_value: float
    limit: float | None = None
    threshold: float | None = None

    @property
    def passed(self) -> bool:
        if self.limit is None:
            return self.monotone
        return self.monotone and abs(self.terminal_value - self.limit) < self.threshold

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "exponent": self.fitted_exponent,
            "monotone": self.monotone,
            "terminal": self.terminal_value,
            "pass": self.passed,
        }

    def csv_table(self) -> tuple[list[str], list[list]]:
        return ["eps", "value"], [[e, v] for e, v in self.grid]


def fit_exponent(points, window: int = FIT_WINDOW) -> float:
    """Slope of ``log value`` against ``log eps`` over the ``window`` smallest eps.

    Parameters
    ----------
    points : sequence of (eps, value)
        At least four points, all values strictly positive.
    window : int
        Number of finest points used.
    """
    pts = sorted((float(e), float(v)) for e, v in points)
    if len(pts) < 4:
        raise ValueError("need at least 4 points to fit an exponent")
    pts = pts[:window]
    eps = np.array([p[0] for p in pts])
    val = np.array([p[1] for p in pts])
    if np.any(val <= 0) or np.any(eps <= 0):
        raise NonPositiveValue("exponent fits need strictly positive eps and values")
    slope, _ = np.polyfit(np.log(eps), np.log(val), 1)
    return float(slope)


def _evaluator(n_cap: int, quantity: str, kw: dict):
    if quantity == "marginal_m":
        m = kw.get("m", n_cap)
        return lambda c: float(c.pi[m])
    if quantity == "transition_ij":
        i, j = kw["i"], kw["j"]
        return lambda c: float(c.p[i, j])
    if quantity == "mstep_ij":
        i, j = kw["i"], kw["j"]
        steps = kw.get("steps", abs(j - i))
        return lambda c: float(m_step(c.p, steps)[i, j])
    if quantity == "entropy":
        return lambda c: entropy(c.pi)
    if quantity == "rho1":
        return lambda c: rho_max_corr(pair_joint(c, 1))
    if quantity == "psi_5N":
        lag = kw.get("lag", 5 * n_cap)
        return lambda c: psi_from_joint(pair_joint(c, lag))
    if quantity == "interlaced_m":
        m = kw.get("m", 1)
        return lambda c: rho_index_sets(c, {0}, {-m, m})
    if quantity == "indicator_corr_m":
        m = kw.get("m", 1)
        top = kw.get("top_state", n_cap)
        return lambda c: indicator_correlation(c, m, top)
    if quantity == "lambda1":
        if n_cap > LAMBDA_MAX_N:
            raise InvalidParams(f"lambda sweeps are limited to N <= {LAMBDA_MAX_N}")
        return lambda c: lambda_from_joint(pair_joint(c, 1))
    raise InvalidParams(f"unknown quantity {quantity!r}; choose from {QUANTITIES}")


def sweep(n_cap: int, quantity: str, grid=None, trend_window: int = TREND_WINDOW, **kw) -> SweepResult:
    """Evaluate one exact quantity of S(N, eps) along a decreasing eps grid.

    Extra keywords select the quantity's indices: ``m`` for ``marginal_m``,
    ``interlaced_m`` and ``indicator_corr_m``; ``i, j`` (and ``steps``) for
    ``transition_ij`` and ``mstep_ij``; ``lag`` overrides ``5N`` for ``psi_5N``.
    """
    grid = dyadic_grid() if grid is None else [float(e) for e in grid]
    if len(grid) < 2 or np.any(np.diff(grid) >= 0):
        raise InvalidParams("grid must hold at least two strictly decreasing eps values")
    fn = _evaluator(n_cap, quantity, kw)
    values = parallel_map(lambda e: fn(build_s_block(SBlockParams(n_cap, e))), grid)

    tail = values[-trend_window:]
    limit, threshold, expected = LIMITS.get(quantity, (None, None, None))
    direction = _direction(tail)
    monotone = direction != "none" if expected is None else direction == expected
    exponent = None
    if len(values) >= 4 and all(v > 0 for v in values):
        exponent = fit_exponent(zip(grid, values))
    return SweepResult(
        quantity=quantity, n_cap=n_cap, grid=tuple(zip(grid, values)), fitted_exponent=exponent,
        monotone=monotone, direction=_direction(values), terminal_value=values[-1],
        limit=limit, threshold=threshold,
    )


@dataclass(frozen=True)
class BatteryReport:
    values: dict
    slacks: dict

    @property
    def passed(self) -> bool:
        return all(s >= BATTERY_SLACK for s in self.slacks.values())

    def to_dict(self) -> dict:
        return {"values": dict(self.values), "slacks": dict(self.slacks), "pass": self.passed}


def inequality_battery(q) -> BatteryReport:
    """Slacks of the standard inequalities between the coefficients.

    ``rho <= psi``, ``beta <= psi``, ``beta^2 <= I``, ``I <= (1+psi) log(1+psi)``
    and ``I <= H(row partition)``.  A slack below ``-1e-12`` is a failure.
    """
    q = q if isinstance(q, JointPMF2) else JointPMF2.from_matrix(q)
    psi = psi_from_joint(q)
    rho = rho_max_corr(q)
    beta = beta_from_joint(q)
    info = info_from_joint(q)
    h = entropy(q.row_marginal)
    psi_bound = (1.0 + psi) * math.log1p(psi)
    values = {"psi": psi, "rho": rho, "beta": beta, "info": info, "h_row": h, "psi_info_bound": psi_bound}
    slacks = {
        "rho<=psi": psi - rho,
        "beta<=psi": psi - beta,
        "beta^2<=info": info - beta * beta,
        "info<=(1+psi)log(1+psi)": psi_bound - info,
        "info<=h_row": h - info,
    }
    return BatteryReport(values, slacks)


@dataclass(frozen=True)
class SpectralReport:
    lambda2: float
    rho_values: tuple[float, ...]
    predicted: tuple[float, ...]
    max_rel_dev: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_dev <= self.tol

    def to_dict(self) -> dict:
        return {
            "lambda2": self.lambda2,
            "rho": list(self.rho_values),
            "lambda2_pow": list(self.predicted),
            "max_rel_dev": self.max_rel_dev,
            "pass": self.passed,
        }


def spectral_rho_check(chain: FiniteChain, n_max: int, tol: float = SPECTRAL_TOL) -> SpectralReport:
    """Compare ``rho(lag n)`` with ``|lambda_2|^n`` for ``n = 1..n_max``.

    For a reversible chain the deflated operator is symmetric, so its largest
    eigenvalue modulus is ``|lambda_2|`` and its powers have norm ``|lambda_2|^n``.
    """
    if not is_reversible(chain):
        raise NotReversible("spectral identity needs a reversible chain")
    b = centered_step(chain, 1)
    lam2 = float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (b + b.T))))) if b.size else 0.0
    rho = []
    pred = []
    worst = 0.0
    for n in range(1, n_max + 1):
        r = rho_max_corr(pair_joint(chain, n))
        p = lam2**n
        rho.append(r)
        pred.append(p)
        scale = max(abs(p), abs(r))
        if scale > 0:
            worst = max(worst, abs(r - p) / scale)
    return SpectralReport(lam2, tuple(rho), tuple(pred), worst, tol)


@dataclass(frozen=True)
class MonteCarloReport:
    cells: tuple[tuple[int, int], ...]
    exact: tuple[float, ...]
    empirical: tuple[float, ...]
    std_errors: tuple[float, ...]
    n_se: float

    @property
    def z_scores(self) -> tuple[float, ...]:
        return tuple(
            (e - x) / s if s > 0 else (0.0 if e == x else math.inf)
            for x, e, s in zip(self.exact, self.empirical, self.std_errors)
        )

    @property
    def passed(self) -> bool:
        return all(abs(z) <= self.n_se for z in self.z_scores)

    def to_dict(self) -> dict:
        return {
            "cells": [list(c) for c in self.cells],
            "exact": list(self.exact),
            "empirical": list(self.empirical),
            "std_error": list(self.std_errors),
            "z": list(self.z_scores),
            "pass": self.passed,
        }


def _pair_counts(states: np.ndarray, k: int) -> np.ndarray:
    idx = states[:-1] * k + states[1:]
    return np.bincount(idx, minlength=k * k).reshape(k, k)


def _batches(states: np.ndarray, n_batches: int) -> list[np.ndarray]:
    n_pairs = len(states) - 1
    edges = np.linspace(0, n_pairs, n_batches + 1).astype(int)
    return [states[lo:hi + 1] for lo, hi in zip(edges[:-1], edges[1:])]


def pair_frequency_check(chain: FiniteChain, n_steps: int = 10**6, seed: int = 0, n_batches: int = 100,
                         min_expected: float = 100.0, n_se: float = 3.0) -> MonteCarloReport:
    """Empirical lag-1 pair frequencies against the exact pair law.

    Standard errors are batch-means estimates, which account for the serial
    dependence of the path.  Only cells with expected count at least
    ``min_expected`` are compared.
    """
    states = np.asarray(sample_path(chain, n_steps + 1, seed).states)
    exact = pair_joint(chain, 1).q
    total = _pair_counts(states, chain.k) / n_steps
    per_batch = np.array([_pair_counts(b, chain.k) / (len(b) - 1) for b in _batches(states, n_batches)])
    se = per_batch.std(axis=0, ddof=1) / math.sqrt(n_batches)
    cells = [(i, j) for i in range(chain.k) for j in range(chain.k) if exact[i, j] * n_steps >= min_expected]
    return MonteCarloReport(
        cells=tuple(cells),
        exact=tuple(float(exact[c]) for c in cells),
        empirical=tuple(float(total[c]) for c in cells),
        std_errors=tuple(float(se[c]) for c in cells),
        n_se=n_se,
    )


def plugin_coefficient_check(chain: FiniteChain, n_steps: int = 10**6, seed: int = 0, n_batches: int = 100,
                             n_se: float = 3.0) -> MonteCarloReport:
    """Plug-in ``rho`` and ``beta`` at lag 1 from a sample path against exact values.

    The rows of the report are ``rho`` and ``beta`` (cells ``(0, 0)`` and
    ``(1, 0)``).  Intended for well-conditioned chains with few states.
    """
    states = np.asarray(sample_path(chain, n_steps + 1, seed).states)
    joint = pair_joint(chain, 1)

    def plug(counts):
        kept = counts[np.ix_(chain.pi > 0, chain.pi > 0)]
        j = JointPMF2.from_matrix(kept / kept.sum())
        return rho_max_corr(j), beta_from_joint(j)

    full = plug(_pair_counts(states, chain.k).astype(float))
    per = np.array([plug(_pair_counts(b, chain.k).astype(float)) for b in _batches(states, n_batches)])
    se = per.std(axis=0, ddof=1) / math.sqrt(n_batches)
    return MonteCarloReport(
        cells=((0, 0), (1, 0)),
        exact=(rho_max_corr(joint), beta_from_joint(joint)),
        empirical=tuple(float(v) for v in full),
        std_errors=tuple(float(v) for v in se),
        n_se=n_se,
    )
