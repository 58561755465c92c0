"""Adaptive cubature loop with hybrid absolute/relative stopping.

The sample size doubles until the worst-case value of the tolerance
function over the data-implied interval [v-, v+] drops to one; the
reported estimate is the minimizer of that worst case, which is a
shrinkage of the interval midpoint toward zero whenever the relative
tolerance is active.  The three replication heuristics from the
literature are provided for comparison; they carry no guarantee.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .cone import ConeParams, IntervalEstimate, ViolationReport, error_bound, necessary_condition
from .ledger import CoefficientLedger, build_ledger
from .sequences import make_generator

STATUS_TOLERANCE_MET = "tolerance-met"
STATUS_BUDGET_EXHAUSTED = "budget-exhausted"
FLAG_CONE_VIOLATION = "cone-violation-flagged"


@dataclass(frozen=True)
class Tolerance:
    """Hybrid error criterion: met if the error is within the absolute
    tolerance or within the relative tolerance times the true value."""

    abs_tol: float = 0.0
    rel_tol: float = 0.0
    mode: str = "max"

    def __post_init__(self):
        if self.mode != "max":
            raise ValueError(
                f"unsupported tolerance mode {self.mode!r}: only the hybrid "
                "'max' criterion is implemented"
            )
        if self.abs_tol < 0:
            raise ValueError("abs_tol must be nonnegative")
        if not 0 <= self.rel_tol < 1:
            raise ValueError("rel_tol must lie in [0, 1)")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("abs_tol and rel_tol cannot both be zero")

    def scale(self, v: float) -> float:
        return max(self.abs_tol, self.rel_tol * abs(v))


def tolerance_value(true_v: float, v_hat: float, tol: Tolerance) -> float:
    """Squared error over the squared active tolerance; <= 1 means success."""
    denom = tol.scale(true_v)
    if denom == 0.0:
        return 0.0 if true_v == v_hat else np.inf
    with np.errstate(over="ignore"):
        return float(np.float64((true_v - v_hat) / denom) ** 2)


def optimal_estimate(v_minus: float, v_plus: float, tol: Tolerance) -> float:
    """Estimate minimizing the worst-case tolerance over [v-, v+].

    Weighted average of the endpoints, each weighted by the tolerance
    scale at the opposite endpoint; lies in [v-, v+] and shrinks toward
    zero under a relative criterion.
    """
    if v_minus > v_plus:
        raise ValueError("v_minus must not exceed v_plus")
    w_minus = tol.scale(v_plus)
    w_plus = tol.scale(v_minus)
    denom = w_minus + w_plus
    if denom == 0.0:
        if v_minus == 0.0 and v_plus == 0.0:
            return 0.0
        # relative weights underflowed; they are proportional to |v -+|
        w_minus, w_plus = abs(v_plus), abs(v_minus)
        denom = w_minus + w_plus
    return (v_minus * w_minus + v_plus * w_plus) / denom


def sup_tolerance(v_minus: float, v_plus: float, tol: Tolerance) -> float:
    """Worst-case tolerance over [v-, v+] at the optimal estimate."""
    if v_minus > v_plus:
        raise ValueError("v_minus must not exceed v_plus")
    denom = tol.scale(v_plus) + tol.scale(v_minus)
    if denom == 0.0:
        return 0.0 if v_plus == v_minus else np.inf
    with np.errstate(over="ignore"):
        return float(np.float64((v_plus - v_minus) / denom) ** 2)


@dataclass(frozen=True)
class SolutionFunctional:
    """A scalar function of several integrals plus its interval oracle.

    ``evaluate`` maps a mean vector to v(mu); ``bounds`` maps the box
    (mu_hat - err, mu_hat + err), intersected with v's domain, to the
    extreme values (v-, v+).
    """

    output_count: int
    evaluate: Callable[[np.ndarray], float]
    bounds: Callable[[np.ndarray, np.ndarray], tuple[float, float]]


def identity_functional() -> SolutionFunctional:
    return SolutionFunctional(
        output_count=1,
        evaluate=lambda mu: float(mu[0]),
        bounds=lambda mu, err: (float(mu[0] - err[0]), float(mu[0] + err[0])),
    )


@dataclass(frozen=True)
class CubatureResult:
    """Outcome of one adaptive integration."""

    v_hat: float
    n: int
    estimate: IntervalEstimate
    sup_tol: float
    status: str
    cone_violations: tuple[ViolationReport, ...]
    wall_ms: float
    seed: object
    family: str
    dimension: int
    outputs: int

    @property
    def status_flags(self) -> tuple[str, ...]:
        flags = (self.status,)
        if self.cone_violations:
            flags += (FLAG_CONE_VIOLATION,)
        return flags

    @staticmethod
    def csv_header(include_wall_time: bool = True) -> list[str]:
        cols = ["seed", "family", "d", "p", "n", "v_hat", "sup_tol", "status"]
        return cols + (["wall_ms"] if include_wall_time else [])

    def csv_row(self, include_wall_time: bool = True) -> list[str]:
        row = [
            str(self.seed),
            self.family,
            str(self.dimension),
            str(self.outputs),
            str(self.n),
            repr(self.v_hat),
            repr(self.sup_tol),
            "+".join(self.status_flags),
        ]
        if include_wall_time:
            row.append(repr(self.wall_ms))
        return row


def _resolve_generator(family: str, dimension: int, seed, generator):
    if generator is not None:
        return generator
    return make_generator(family, dimension, seed)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    dimension: int,
    functional: SolutionFunctional,
    tol: Tolerance,
    cone: ConeParams | None = None,
    family: str = "digital",
    seed=0,
    generator=None,
) -> CubatureResult:
    """Adaptively integrate a p-output function and report v(mu).

    Doubles n = 2**m from the minimum level until the worst-case
    tolerance over the interval the bound oracle produces is at most
    one, or the level budget (cone.m_max, capped by the generator's
    capacity) runs out.  The cross-level necessary condition is checked
    at each new level; violations are recorded, not fatal.
    """
    cone = cone or ConeParams()
    gen = _resolve_generator(family, dimension, seed, generator)
    top_level = min(cone.m_max, gen.max_level)
    if top_level < cone.min_level:
        raise ValueError(
            f"generator supports levels up to {gen.max_level}, below the "
            f"minimum level {cone.min_level}"
        )

    start = time.perf_counter()
    violations: list[ViolationReport] = []
    ledger: CoefficientLedger | None = None
    status = STATUS_BUDGET_EXHAUSTED
    for m in range(cone.min_level, top_level + 1):
        previous = ledger
        ledger = build_ledger(f, gen, m, previous)
        if ledger.outputs != functional.output_count:
            raise ValueError(
                f"integrand produced {ledger.outputs} outputs, functional "
                f"expects {functional.output_count}"
            )
        if previous is not None:
            ell = m - cone.r
            violations.extend(necessary_condition(previous, ledger, ell, cone))
            violations.extend(necessary_condition(ledger, previous, ell, cone))
        estimate = error_bound(ledger, cone)
        v_minus, v_plus = functional.bounds(estimate.mu, estimate.err)
        worst = sup_tolerance(v_minus, v_plus, tol)
        if worst <= 1.0:
            status = STATUS_TOLERANCE_MET
            break

    wall_ms = 1e3 * (time.perf_counter() - start)
    return CubatureResult(
        v_hat=optimal_estimate(v_minus, v_plus, tol),
        n=ledger.n,
        estimate=estimate,
        sup_tol=worst,
        status=status,
        cone_violations=tuple(violations),
        wall_ms=wall_ms,
        seed=seed if generator is None else None,
        family=gen.family,
        dimension=dimension,
        outputs=functional.output_count,
    )


def integrate_scalar(
    f: Callable[[np.ndarray], np.ndarray],
    dimension: int,
    tol: Tolerance,
    cone: ConeParams | None = None,
    family: str = "digital",
    seed=0,
    generator=None,
) -> CubatureResult:
    """Estimate the integral itself (identity functional)."""
    return integrate(f, dimension, identity_functional(), tol, cone, family, seed, generator)


@dataclass(frozen=True)
class BaselineEstimate:
    """Replication-heuristic estimate with its non-guaranteed bound."""

    strategy: str
    estimate: float
    claimed_bound: float
    replicate_means: np.ndarray
    n: int
    repeats: int
    inflation: float


BASELINE_STRATEGIES = ("iid-replications", "internal-replications", "quasi-standard-error")


def heuristic_baselines(
    f: Callable[[np.ndarray], np.ndarray],
    dimension: int,
    strategy: str,
    repeats: int,
    n: int,
    inflation: float = 1.2,
    family: str = "digital",
    seed=0,
) -> BaselineEstimate:
    """Replication heuristics: estimate plus an inflated-spread "bound".

    All three report the average of R replicate means and claim
    ``inflation * std(replicate means)`` as an error bound.  None of
    them is guaranteed; see :func:`integrate` for the guaranteed path.
    """
    if repeats < 2:
        raise ValueError("at least two replicates are required")
    if strategy == "iid-replications":
        means = np.empty(repeats)
        for rep in range(repeats):
            gen = make_generator(family, dimension, seed ^ rep if seed is not None else rep)
            vals = f(gen.points(0, n).points)
            means[rep] = float(np.mean(vals))
    elif strategy == "internal-replications":
        gen = make_generator(family, dimension, seed)
        vals = np.asarray(f(gen.points(0, n * repeats).points), dtype=float)
        means = vals.reshape(repeats, n).mean(axis=1)
    elif strategy == "quasi-standard-error":
        gen = make_generator(family, dimension * repeats, seed)
        pts = gen.points(0, n).points
        means = np.empty(repeats)
        for rep in range(repeats):
            means[rep] = float(np.mean(f(pts[:, rep * dimension : (rep + 1) * dimension])))
    else:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {BASELINE_STRATEGIES}")
    spread = float(np.std(means, ddof=1))
    return BaselineEstimate(
        strategy=strategy,
        estimate=float(np.mean(means)),
        claimed_bound=inflation * spread,
        replicate_means=means,
        n=n,
        repeats=repeats,
        inflation=inflation,
    )
