"""Calibrated building blocks and their independent product.

Each component ``Z^(N)``, N = 3, 4, ..., is an S(N, eps) chain with ``eps``
small enough that, with ``q = 2^-N r``:

(a) ``P(Z_0 = 0) >= 1 - 2^-N``
(b) ``H(sigma(Z_0)) <= q``
(c) ``rho(1) <= r``
(d) ``I(n) <= q^(2n)`` for ``n = 1..2h*``, checked exactly
(e) ``I(n) <= q^(2n)`` for every ``n > 2h*``, by a tail argument
(f) ``rho(sigma(Z_0), sigma(Z_-m, Z_m)) >= 1 - 1/N`` for ``1 <= m < N/2``

Two tail arguments are available for (e).

``"chi2"`` (default):  ``I <= log(1 + chi^2) <= chi^2`` and the chi-square
distance of the lag-n pair is ``||D_n||_F^2 <= (K-1) rho(n)^2 <=
(K-1) rho(1)^(2n)``.  The anchor ``h*`` is the first lag at which
``(K-1) (rho(1)/q)^(2h*) <= 1``, after which the bound stays below
``q^(2n)`` for good.

``"psi"``:  find ``h* <= h_max`` with ``psi(h*) <= q^(4h*)/2``; then
``psi(n) <= psi(h*)^floor(n/h*)`` and ``I <= (1+psi) log(1+psi) <= 2 psi``
cover all ``n > 2h*``.  The required ``psi`` values fall below the
double-precision range for N >= 6, so this route only certifies small N.

The product chain ``X_k = (Z^(3)_k, Z^(4)_k, ...)`` is never materialized.
Independence gives ``rho_X(n) = max_N rho_N(n)`` and ``I_X(n) = sum_N I_N(n)``
exactly, and the components dropped by truncation contribute at most
``sum_{N > n_max} (2^-N r)^(2n)`` to ``I_X(n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._parallel import parallel_map
from .building_blocks import UNDERFLOW_GUARD, SBlockParams, build_s_block
from .chain_core import FiniteChain, pair_joint
from .dependence import entropy, info_from_joint, rho_index_sets, rho_max_corr
from .errors import CalibrationFailed, ConditionFailed, InvalidParams, NoAnchorLag

CONDITIONS = ("mass_at_zero", "entropy", "rho1", "info_finite", "info_tail", "interlaced")
TAIL_METHODS = ("chi2", "psi")
CALIBRATION_MAX_N = 8


def _check_r(r: float) -> float:
    r = float(r)
    if not 0 < r < 1:
        raise InvalidParams(f"r must lie in (0, 1), got {r}")
    return r


@dataclass(frozen=True)
class Certificate:
    n_cap: int
    eps: float
    r: float
    h_max: int
    tail_method: str
    h_star: int | None
    mass_at_zero: float
    entropy: float
    rho1: float
    info_finite: tuple[float, ...]
    tail_value: float | None
    interlaced: tuple[float, ...]
    mass_at_zero_ok: bool
    entropy_ok: bool
    rho1_ok: bool
    info_finite_ok: bool
    info_tail_ok: bool
    interlaced_ok: bool

    @property
    def q(self) -> float:
        return 2.0**-self.n_cap * self.r

    @property
    def admissible(self) -> bool:
        return all(getattr(self, f"{name}_ok") for name in CONDITIONS)

    def failed(self) -> list[str]:
        return [name for name in CONDITIONS if not getattr(self, f"{name}_ok")]

    def require(self) -> "Certificate":
        if self.h_star is None:
            raise NoAnchorLag(f"no anchor lag up to {self.h_max} for N={self.n_cap}, eps={self.eps!r}")
        bad = self.failed()
        if bad:
            raise ConditionFailed(bad[0])
        return self

    def recheck(self) -> bool:
        """Rebuild the chain from ``(n_cap, eps)`` and certify it afresh."""
        params = SBlockParams(self.n_cap, self.eps)
        fresh = certify_component(build_s_block(params), params, self.r, self.h_max, self.tail_method)
        return fresh.admissible and fresh == self

    def to_dict(self) -> dict:
        return {
            "n_cap": self.n_cap,
            "eps": self.eps,
            "r": self.r,
            "q": self.q,
            "h_max": self.h_max,
            "tail_method": self.tail_method,
            "h_star": self.h_star,
            "admissible": self.admissible,
            "conditions": {name: getattr(self, f"{name}_ok") for name in CONDITIONS},
            "measured": {
                "mass_at_zero": self.mass_at_zero,
                "entropy": self.entropy,
                "rho1": self.rho1,
                "info_finite": list(self.info_finite),
                "tail_value": self.tail_value,
                "interlaced": list(self.interlaced),
            },
        }


def _chi2_anchor(rho1: float, q: float, k: int, h_max: int) -> tuple[int | None, float | None]:
    # returns h* and log of the tail bound (K-1)(rho1/q)^(2 h*), which must be <= 0
    if rho1 == 0.0:
        return 1, -math.inf
    if rho1 >= q:
        return None, None
    # inflate rho1 well past its rounding error so the bound is never borderline
    log_ratio = math.log(rho1 * (1 + 1e-9)) - math.log(q)
    log_rank = math.log(max(k - 1, 1))
    h = max(1, math.ceil(log_rank / (-2.0 * log_ratio)))
    while log_rank + 2 * h * log_ratio > 0:  # guard against rounding in ceil
        h += 1
    if h > h_max:
        return None, None
    return h, log_rank + 2 * h * log_ratio


def _psi_anchor(chain: FiniteChain, q: float, h_max: int) -> tuple[int | None, float | None]:
    # B^h is formed by repeated products; an entry that underflows, or loses
    # partial products to underflow, is off by at most about K*h*tiny in
    # absolute terms.  That cushion is added to every cell before dividing by
    # sqrt(pi_i pi_j), so an underflowed psi can never certify spuriously.
    tiny = np.finfo(float).tiny
    for h in range(1, h_max + 1):
        target = 0.5 * q ** (4 * h)
        if target < UNDERFLOW_GUARD:
            break
        joint = pair_joint(chain, h).drop_zero_marginals()
        root = np.sqrt(joint.row_marginal)
        cushion = joint.shape[0] * 2 * h * tiny
        dev = np.abs(joint.normalized_deviation())
        psi = float(np.max((dev + cushion) / np.outer(root, root))) * (1 + 1e-12)
        if psi <= min(target, 1.0):
            return h, psi
    return None, None


def certify_component(chain: FiniteChain, params: SBlockParams, r: float, h_max: int | None = None,
                      tail: str = "chi2", strict: bool = False) -> Certificate:
    """Evaluate conditions (a)-(f) exactly for one building block.

    Returns a certificate whose flags say which conditions hold; with
    ``strict=True`` the first failure is raised instead.
    """
    r = _check_r(r)
    if tail not in TAIL_METHODS:
        raise ValueError(f"tail must be one of {TAIL_METHODS}")
    n = params.n_cap
    h_max = 10 * n if h_max is None else int(h_max)
    q = 2.0**-n * r

    mass0 = float(chain.pi[0])
    h = entropy(chain.pi)
    rho1 = rho_max_corr(pair_joint(chain, 1))

    if tail == "chi2":
        h_star, tail_value = _chi2_anchor(rho1, q, chain.k, h_max)
    else:
        h_star, tail_value = _psi_anchor(chain, q, h_max)

    horizon = 2 * (h_star if h_star is not None else 1)
    info = tuple(info_from_joint(pair_joint(chain, lag)) for lag in range(1, horizon + 1))
    info_ok = h_star is not None and all(v <= q ** (2 * lag) for lag, v in enumerate(info, start=1))

    ms = [m for m in range(1, n) if 2 * m < n]
    inter = tuple(rho_index_sets(chain, {0}, {-m, m}) for m in ms)

    cert = Certificate(
        n_cap=n, eps=params.eps, r=r, h_max=h_max, tail_method=tail, h_star=h_star,
        mass_at_zero=mass0, entropy=h, rho1=rho1, info_finite=info, tail_value=tail_value,
        interlaced=inter,
        mass_at_zero_ok=mass0 >= 1.0 - 2.0**-n,
        entropy_ok=h <= q,
        rho1_ok=rho1 <= r,
        info_finite_ok=info_ok,
        info_tail_ok=h_star is not None,
        interlaced_ok=all(v >= 1.0 - 1.0 / n for v in inter),
    )
    return cert.require() if strict else cert


def calibrate_epsilon(n_cap: int, r: float, h_max: int | None = None, tail: str = "chi2") -> tuple[float, Certificate]:
    """Largest ``eps = (1/3) 2^-k`` whose certificate is fully admissible.

    The search walks down the dyadic sequence and keeps going past failures;
    it stops with CalibrationFailed once the underflow guard is reached.
    """
    r = _check_r(r)
    if not 3 <= n_cap <= CALIBRATION_MAX_N:
        raise InvalidParams(f"calibration supports 3 <= N <= {CALIBRATION_MAX_N}")
    last = None
    k = 0
    while True:
        eps = (1 / 3) * 2.0**-k
        try:
            params = SBlockParams(n_cap, eps)
        except InvalidParams:
            break
        cert = certify_component(build_s_block(params), params, r, h_max, tail)
        if cert.admissible:
            return eps, cert
        last = cert
        k += 1
    binding = ",".join(last.failed()) if last is not None else "underflow"
    raise CalibrationFailed(binding, f"no admissible eps for N={n_cap}, r={r}; still failing: {binding}")


@dataclass(frozen=True)
class Component:
    params: SBlockParams
    chain: FiniteChain
    certificate: Certificate


@dataclass(frozen=True)
class ProductSpec:
    """Truncated product of independent calibrated components, N = 3..n_max."""

    components: tuple[Component, ...]
    r: float
    n_min: int = 3
    n_max: int = field(init=False)

    def __post_init__(self):
        _check_r(self.r)
        if not self.components:
            raise InvalidParams("a product needs at least one component")
        caps = [c.params.n_cap for c in self.components]
        if caps != list(range(self.n_min, self.n_min + len(caps))):
            raise InvalidParams(f"component N values must be consecutive from {self.n_min}")
        for c in self.components:
            if not c.certificate.admissible:
                raise InvalidParams(f"component N={c.params.n_cap} is not certified")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "n_max", caps[-1])

    @property
    def chains(self) -> list[FiniteChain]:
        return [c.chain for c in self.components]

    def truncated(self, n_max: int) -> "ProductSpec":
        return ProductSpec(tuple(c for c in self.components if c.params.n_cap <= n_max), self.r, self.n_min)


def build_product_spec(r: float, n_max_component: int, h_max: int | None = None, tail: str = "chi2") -> ProductSpec:
    r = _check_r(r)
    if not 3 <= n_max_component <= CALIBRATION_MAX_N:
        raise InvalidParams(f"n_max_component must lie in [3, {CALIBRATION_MAX_N}]")

    def one(n):
        eps, cert = calibrate_epsilon(n, r, h_max, tail)
        params = SBlockParams(n, eps)
        return Component(params, build_s_block(params), cert)

    return ProductSpec(tuple(parallel_map(one, range(3, n_max_component + 1))), r)


def _chains(spec) -> list[FiniteChain]:
    if isinstance(spec, ProductSpec):
        return spec.chains
    if isinstance(spec, FiniteChain):
        return [spec]
    return list(spec)


def product_coeff_rho(spec, n: int) -> float:
    """Maximal correlation of ``(X_0, X_n)``: the largest component value."""
    return max(rho_max_corr(pair_joint(c, n)) for c in _chains(spec))


def product_coeff_info(spec, n: int) -> float:
    """Information coefficient of ``(X_0, X_n)``: the sum of component values."""
    return math.fsum(info_from_joint(pair_joint(c, n)) for c in _chains(spec))


def info_truncation_tail(r: float, n: int, n_max: int) -> float:
    """``sum_{N > n_max} (2^-N r)^(2n)`` in closed form."""
    ratio = 4.0**-n
    return r ** (2 * n) * ratio ** (n_max + 1) / (1.0 - ratio)


def product_entropy(spec) -> float:
    return math.fsum(entropy(c.pi) for c in _chains(spec))


def product_beta_bound(spec, n: int) -> float:
    """Upper bound ``sqrt(I)`` on absolute regularity of the truncated product."""
    return math.sqrt(product_coeff_info(spec, n))


def product_interlaced_lower(spec, n: int) -> float:
    """``rho(sigma(X_0), sigma(X_-n, X_n))`` of the truncated product."""
    return max(rho_index_sets(c, {0}, {-n, n}) for c in _chains(spec))


@dataclass(frozen=True)
class TheoremReport:
    r: float
    n_range: tuple[int, ...]
    components: tuple[int, ...]
    entropy_total: float
    rho_values: tuple[float, ...]
    info_values: tuple[float, ...]
    info_tails: tuple[float, ...]
    beta_bounds: tuple[float, ...]
    beta_bounds_untruncated: tuple[float, ...]
    interlaced_lower: tuple[float, ...]
    interlaced_by_nmax: tuple[tuple[int, float], ...]
    certificates: tuple[Certificate, ...]
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        r = self.r
        return {
            "r": r,
            "components": list(self.components),
            "n_range": list(self.n_range),
            "entropy_total": self.entropy_total,
            "lags": [
                {
                    "n": n,
                    "rho": rho,
                    "rho_bound": r**n,
                    "info": info,
                    "info_tail": tail,
                    "info_bound": r ** (2 * n),
                    "beta_bound": beta,
                    "beta_bound_untruncated": beta_full,
                    "interlaced_lower": inter,
                }
                for n, rho, info, tail, beta, beta_full, inter in zip(
                    self.n_range, self.rho_values, self.info_values, self.info_tails,
                    self.beta_bounds, self.beta_bounds_untruncated, self.interlaced_lower)
            ],
            "interlaced_by_nmax": [{"n_max": k, "interlaced_lower": v} for k, v in self.interlaced_by_nmax],
            "interlaced_limit": 1.0,
            "checks": dict(self.checks),
            "passed": self.passed,
            "certificates": [c.to_dict() for c in self.certificates],
        }

    def csv_table(self) -> tuple[list[str], list[list]]:
        header = ["n", "rho", "rho_bound", "info", "info_bound", "beta_bound", "interlaced_lower"]
        rows = [
            [n, rho, self.r**n, info, self.r ** (2 * n), beta, inter]
            for n, rho, info, beta, inter in zip(
                self.n_range, self.rho_values, self.info_values, self.beta_bounds, self.interlaced_lower)
        ]
        return header, rows


def verify_theorem(r: float, n_max_component: int, n_lags: int, h_max: int | None = None,
                   tail: str = "chi2") -> TheoremReport:
    """Calibrate components ``3..n_max_component`` and check every bound."""
    r = _check_r(r)
    if n_lags < 1:
        raise InvalidParams("n_lags must be at least 1")
    spec = build_product_spec(r, n_max_component, h_max, tail)
    lags = tuple(range(1, n_lags + 1))

    h_total = product_entropy(spec)
    rho = tuple(product_coeff_rho(spec, n) for n in lags)
    info = tuple(product_coeff_info(spec, n) for n in lags)
    tails = tuple(info_truncation_tail(r, n, spec.n_max) for n in lags)
    beta = tuple(math.sqrt(i) for i in info)
    beta_full = tuple(math.sqrt(i + t) for i, t in zip(info, tails))
    inter = tuple(product_interlaced_lower(spec, n) for n in lags)
    by_nmax = tuple((k, product_interlaced_lower(spec.truncated(k), 1)) for k in range(3, spec.n_max + 1))

    checks = {
        "certificates_admissible": all(c.certificate.admissible for c in spec.components),
        "entropy_total<=r": h_total <= r,
        "rho<=r^n": all(v <= r**n for n, v in zip(lags, rho)),
        "info+tail<=r^2n": all(i + t <= r ** (2 * n) for n, i, t in zip(lags, info, tails)),
        "beta_bound<=r^n": all(b <= r**n for n, b in zip(lags, beta_full)),
        # sqrt then square may round up by one ulp
        "beta_bound^2<=info": all(b * b <= i * (1 + 4.5e-16) for b, i in zip(beta, info)),
        "rho_submultiplicative": all(v <= rho[0] ** n + 1e-10 for n, v in zip(lags, rho)),
        "interlaced_lower[1]>=1-1/n_max": inter[0] >= 1.0 - 1.0 / spec.n_max,
        "interlaced_nondecreasing_in_n_max": all(a[1] <= b[1] for a, b in zip(by_nmax, by_nmax[1:])),
    }
    return TheoremReport(
        r=r, n_range=lags, components=tuple(range(3, spec.n_max + 1)), entropy_total=h_total,
        rho_values=rho, info_values=info, info_tails=tails, beta_bounds=beta, beta_bounds_untruncated=beta_full,
        interlaced_lower=inter,
        interlaced_by_nmax=by_nmax, certificates=tuple(c.certificate for c in spec.components), checks=checks,
    )
