import itertools
import logging
from collections import defaultdict
from typing import Callable, Dict, List, Tuple

import numpy as np
from scipy import stats

from com.mhire.dlm.common.errors import ConfigError, SearchSpaceTooLargeError
from com.mhire.dlm.common.seeding import ORACLE_STREAM, make_rng
from com.mhire.dlm.services.oracle_services.oracle_search.oracle_search_schema import (
    CallCell, OracleCase, OracleReport, SearchSpace
)

logger = logging.getLogger(__name__)

MAX_BRUTE_FORCE_POINTS = 100_000
ALPHAS = (2.0, 10.0)
# log-scale jitter of the target weights around their grid point
TARGET_JITTER = 0.2


class ValuationOracle:
    """Counted access to V(w)"""

    def __init__(self, fn: Callable[[np.ndarray], float]):
        self.fn = fn
        self.calls = 0

    def __call__(self, w: np.ndarray) -> float:
        self.calls += 1
        return float(self.fn(np.asarray(w, dtype=float)))


def optimize_step(
    space: SearchSpace, w: np.ndarray, w_prime: np.ndarray, v_w: float, v_wp: float, i: int
) -> Tuple[np.ndarray, np.ndarray, bool, int]:
    """Accept w' on strict improvement below the grid top, otherwise move to the next coordinate"""
    w = np.array(w, dtype=float)
    w_prime = np.array(w_prime, dtype=float)
    if v_wp > v_w and w[i] < space.max_value:
        w = w_prime.copy()
        w_prime[i] = space.step_up(w[i])
        return w, w_prime, False, i
    i += 1
    if i >= space.support_size:
        return w, w_prime, True, i
    return w, w_prime, False, i


def _trial_point(space: SearchSpace, w: np.ndarray, i: int) -> np.ndarray:
    w_prime = w.copy()
    w_prime[i] = space.step_up(w[i])
    return w_prime


def iterated_line_search(space: SearchSpace, oracle: ValuationOracle) -> Tuple[np.ndarray, int]:
    """Coordinate-wise climb from the grid minimum; returns the support weights and the oracle calls spent"""
    start_calls = oracle.calls
    w = np.full(space.support_size, space.min_value)
    i = 0
    w_prime = _trial_point(space, w, i)
    converged = False
    while not converged:
        v_w = oracle(space.embed(w))
        if w[i] < space.max_value:
            v_wp = oracle(space.embed(w_prime))
        else:
            # w' is off the grid and the step cannot accept it
            v_wp = v_w
        w, w_prime, converged, next_i = optimize_step(space, w, w_prime, v_w, v_wp, i)
        if next_i != i and not converged:
            w_prime = _trial_point(space, w, next_i)
        i = next_i
    calls = oracle.calls - start_calls
    logger.debug(f"Line search converged to {w.tolist()} after {calls} oracle calls")
    return w, calls


def brute_force_argmax(space: SearchSpace, oracle: ValuationOracle) -> np.ndarray:
    """Exhaustive argmax over the grid product; the lexicographically smallest point wins ties"""
    points = space.size ** space.support_size
    if points > MAX_BRUTE_FORCE_POINTS:
        raise SearchSpaceTooLargeError(f"Grid product has {points} points, limit is {MAX_BRUTE_FORCE_POINTS}")
    best, best_value = None, -np.inf
    for point in itertools.product(space.grid.tolist(), repeat=space.support_size):
        value = oracle(space.embed(np.asarray(point)))
        if best is None or value > best_value:
            best, best_value = point, value
    return np.asarray(best, dtype=float)


def distance_valuation(space: SearchSpace, w_star: np.ndarray) -> Callable[[np.ndarray], float]:
    """V(w) = -sum |w - w*|, monotone in every coordinate"""
    target = space.embed(w_star)
    return lambda w: -float(np.abs(w - target).sum())


def spiked_valuation(space: SearchSpace, w_star: np.ndarray, spike: np.ndarray) -> Callable[[np.ndarray], float]:
    """Distance valuation plus an isolated peak at one grid point"""
    base = distance_valuation(space, w_star)
    spike_full = space.embed(spike)
    height = 2.0 * space.support_size * space.max_value
    return lambda w: base(w) + (height if np.array_equal(w, spike_full) else 0.0)


def call_bound(space: SearchSpace) -> int:
    return 2 * space.size * space.support_size


def _run_case(case: int, space: SearchSpace, fn: Callable[[np.ndarray], float], w_star: np.ndarray,
              monotone: bool) -> OracleCase:
    w_hat, calls = iterated_line_search(space, ValuationOracle(fn))
    w_brute = brute_force_argmax(space, ValuationOracle(fn))
    return OracleCase(
        case=case,
        alpha=space.alpha,
        k=space.k,
        support=space.support,
        w_star=w_star.tolist(),
        w_hat=w_hat.tolist(),
        w_brute=w_brute.tolist(),
        calls=calls,
        call_bound=call_bound(space),
        match=bool(np.array_equal(w_hat, w_brute)),
        monotone=monotone,
    )


def _regress(cases: List[OracleCase]) -> Tuple[List[CallCell], Dict[str, float]]:
    grouped: Dict[Tuple[int, int], List[int]] = defaultdict(list)
    for case in cases:
        grouped[(len(case.support), case.k)].append(case.calls)
    cells = [
        CallCell(support_size=s, k=k, cases=len(calls), mean_calls=float(np.mean(calls)))
        for (s, k), calls in sorted(grouped.items())
    ]
    x = np.array([cell.support_size * cell.k for cell in cells], dtype=float)
    y = np.array([cell.mean_calls for cell in cells])
    if np.unique(x).size < 2:
        return cells, {}
    fit = stats.linregress(x, y)
    return cells, {"slope": float(fit.slope), "intercept": float(fit.intercept), "r_squared": float(fit.rvalue ** 2)}


def verify_suite(cases: int = 200, support_max: int = 3, k_max: int = 3, seed: int = 0,
                 stress: bool = False) -> OracleReport:
    """Randomized monotone cases: line search against brute force, plus the call-count regression"""
    if cases < 1:
        raise ConfigError(f"Oracle suite needs at least one case, got {cases}")
    rng = make_rng(seed, ORACLE_STREAM)
    dimension = support_max + 1

    records: List[OracleCase] = []
    stress_records: List[OracleCase] = []
    for case in range(cases):
        support_size = 1 + case % support_max
        k = 1 + (case // support_max) % k_max
        alpha = float(rng.choice(ALPHAS))
        support = sorted(int(j) for j in rng.choice(dimension, size=support_size, replace=False))
        space = SearchSpace(alpha=alpha, k=k, support=support, dimension=dimension)

        exponents = rng.integers(-k, k + 1, size=support_size) + rng.uniform(-TARGET_JITTER, TARGET_JITTER, support_size)
        w_star = alpha ** exponents
        records.append(_run_case(case, space, distance_valuation(space, w_star), w_star, monotone=True))

        if stress:
            spike = space.grid[rng.integers(0, space.size, size=support_size)]
            fn = spiked_valuation(space, w_star, spike)
            stress_records.append(_run_case(case, space, fn, w_star, monotone=False))

    cells, fit = _regress(records)
    report = OracleReport(
        cases_run=len(records),
        mismatches=sum(not r.match for r in records),
        bound_violations=sum(r.calls > r.call_bound for r in records),
        stress_cases=len(stress_records),
        stress_mismatches=sum(not r.match for r in stress_records),
        cells=cells,
        cases=records + stress_records,
        **fit,
    )
    logger.info(
        f"Oracle suite: {report.cases_run} cases, {report.mismatches} mismatches, "
        f"{report.bound_violations} bound violations, R^2={report.r_squared}"
    )
    if stress:
        logger.info(f"Non-monotone stress: {report.stress_mismatches}/{report.stress_cases} cases diverged from brute force")
    return report
