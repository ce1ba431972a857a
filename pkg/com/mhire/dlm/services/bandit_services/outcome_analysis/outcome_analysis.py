import logging
from typing import List, Optional, Tuple, Dict

import numpy as np

from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import (
    REPORT_SECTIONS
)
from com.mhire.dlm.services.bandit_services.outcome_analysis.outcome_analysis_schema import (
    AnalysisConfig, CategoryDistributions, OutcomeReport
)
from com.mhire.dlm.services.bandit_services.policy_train.policy_train import PolicyTable, select_actions
from com.mhire.dlm.services.bandit_services.policy_train.policy_train_schema import Mode
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import RmabSimulator
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import RmabInstance

logger = logging.getLogger(__name__)

HIDDEN_HEADER = "[sensitive features hidden]"
NO_POSITIVE_FLAG = "No positive states observed."

Groups = List[Tuple[str, str, Dict[int, str]]]


def accumulate(
    policy: PolicyTable, instance: RmabInstance, n_steps: int, rng: np.random.Generator, n_trials: int = 1
) -> np.ndarray:
    """Per-arm count of engaged (post-transition) states under the budgeted greedy policy"""
    if n_steps < 1:
        raise ValueError(f"n_steps must be at least 1, got {n_steps}")
    simulator = RmabSimulator(instance, rng)
    visited = simulator.rollout(
        lambda states: select_actions(policy, states, instance.budget, Mode.EVAL), n_trials, n_steps
    )
    return visited.sum(axis=(0, 1)).astype(np.int64)


def distributions(totals: np.ndarray, features: np.ndarray, groups: Optional[Groups] = None) -> CategoryDistributions:
    """Percentage of all positive states attributed to each group, per category"""
    groups = groups or REPORT_SECTIONS
    totals = np.asarray(totals, dtype=float)
    grand_total = totals.sum()
    result: CategoryDistributions = {}
    for title, _, labels in groups:
        section = {}
        for index, label in labels.items():
            in_group = features[:, index] == 1
            section[label] = 100.0 * totals[in_group].sum() / grand_total if grand_total > 0 else 0.0
        result[title] = section
    return result


def render(report: OutcomeReport) -> str:
    lines = [HIDDEN_HEADER]
    for title, entries in report.category_distributions.items():
        lines.append("")
        lines.append(f"Category: {title}")
        lines.extend(f"{label}: {value:.2f}%" for label, value in entries.items())
    if report.no_positive_states:
        lines.append("")
        lines.append(NO_POSITIVE_FLAG)
    return "\n".join(lines)


def build_report(totals: np.ndarray, features: np.ndarray) -> OutcomeReport:
    totals = np.asarray(totals)
    report = OutcomeReport(
        totals=[int(t) for t in totals],
        category_distributions=distributions(totals, features),
        no_positive_states=bool(totals.sum() == 0),
    )
    report.rendered = render(report)
    return report


def analyze(
    policy: PolicyTable, instance: RmabInstance, rng: np.random.Generator, config: Optional[AnalysisConfig] = None
) -> OutcomeReport:
    """Roll out, accumulate and render the state-feature distribution of one trained policy"""
    config = config or AnalysisConfig()
    totals = accumulate(policy, instance, config.steps_per_trial, rng, n_trials=config.n_trials)
    report = build_report(totals, instance.feature_matrix())
    if report.no_positive_states:
        logger.warning("Outcome analysis observed no positive states")
    return report
