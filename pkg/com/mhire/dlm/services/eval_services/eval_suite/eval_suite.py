import json
import logging
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from com.mhire.dlm.common.errors import ConfigError, EvaluationError, RewardEvalError, TooManyIndicesError
from com.mhire.dlm.common.seeding import EVAL_STREAM, RANDOM_POLICY_STREAM, make_rng
from com.mhire.dlm.config.config import RunSettings
from com.mhire.dlm.services.bandit_services.policy_train.policy_train import PolicyTable, select_actions, train
from com.mhire.dlm.services.bandit_services.policy_train.policy_train_schema import Mode, TrainConfig
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import Actor, RmabSimulator, generate_instance
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import RmabInstance
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import (
    AggregateFeatureMetrics, EvalProtocol, MnrResult, PrecisionRecall, TaskSpec, TaskSweepResult
)
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import bonus_set, parse, reward_table, used_features
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import RewardExpr

logger = logging.getLogger(__name__)

CATALOG_PATH = Path(__file__).with_name("task_catalog.json")

RANDOM = "Random"
NO_ACTION = "NoAction"
DEFAULT = "Default"
BASE = "Base"
BASELINE_METHODS = (RANDOM, NO_ACTION, DEFAULT, BASE)
DEFAULT_REWARD_SOURCE = "state"


@lru_cache(maxsize=1)
def load_task_catalog() -> Tuple[TaskSpec, ...]:
    """The 16 language tasks with their ground-truth Base rewards"""
    entries = json.loads(CATALOG_PATH.read_text())
    tasks = tuple(TaskSpec.model_validate(entry) for entry in entries)
    if [task.index for task in tasks] != list(range(len(tasks))):
        raise ConfigError(f"Task catalog {CATALOG_PATH} must list tasks in index order from 0")
    logger.info(f"Loaded {len(tasks)} tasks from {CATALOG_PATH.name}")
    return tasks


def get_task(index: int) -> TaskSpec:
    tasks = load_task_catalog()
    if not 0 <= index < len(tasks):
        raise ConfigError(f"Unknown task index {index}; the catalog has tasks 0-{len(tasks) - 1}")
    return tasks[index]


class RandomAllocation:
    """Acts on B arms drawn uniformly without replacement in every trial and step"""

    def __init__(self, budget: int, rng: np.random.Generator):
        self.budget = budget
        self.rng = rng

    def __call__(self, states: np.ndarray) -> np.ndarray:
        keys = self.rng.random(states.shape)
        chosen = np.argsort(keys, axis=-1)[..., :self.budget]
        actions = np.zeros(states.shape, dtype=np.int8)
        np.put_along_axis(actions, chosen, 1, axis=-1)
        return actions


class NoAction:
    def __call__(self, states: np.ndarray) -> np.ndarray:
        return np.zeros(np.shape(states), dtype=np.int8)


class GreedyPolicy:
    """Eval-mode top-B actor of a trained policy"""

    def __init__(self, policy: PolicyTable, budget: int):
        self.policy = policy
        self.budget = budget

    def __call__(self, states: np.ndarray) -> np.ndarray:
        return select_actions(self.policy, states, self.budget, Mode.EVAL)


class BudgetAudit:
    """Counts actor steps and the ones spending more than the budget"""

    def __init__(self, actor: Actor, budget: int):
        self.actor = actor
        self.budget = budget
        self.steps = 0
        self.violations = 0

    def __call__(self, states: np.ndarray) -> np.ndarray:
        actions = self.actor(states)
        spend = np.atleast_1d(np.asarray(actions).sum(axis=-1))
        self.steps += spend.size
        self.violations += int(np.count_nonzero(spend > self.budget))
        return actions


def evaluate_policy(
    policy: Union[PolicyTable, Actor],
    instance: RmabInstance,
    task: TaskSpec,
    protocol: EvalProtocol,
    rng: np.random.Generator,
) -> float:
    """Mean over trials of the Base reward summed over arms and steps of each trial"""
    actor = GreedyPolicy(policy, instance.budget) if isinstance(policy, PolicyTable) else policy
    base_table = reward_table(task.base_reward, instance.feature_matrix())
    simulator = RmabSimulator(instance, rng)
    visited = simulator.rollout(actor, protocol.trials_per_seed, protocol.steps_per_trial)
    per_arm = base_table[np.arange(instance.n_arms), visited]
    return float(per_arm.sum(axis=(1, 2)).mean())


def iqm_and_se(values: Sequence[float]) -> Tuple[float, float]:
    """Interquartile mean and the standard error of the retained central half"""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise EvaluationError("IQM of an empty score list")
    cut = int(0.25 * x.size)
    central = x[cut:x.size - cut]
    iqm = float(stats.trim_mean(x, 0.25))
    se = float(central.std(ddof=1) / np.sqrt(central.size)) if central.size > 1 else 0.0
    return iqm, se


def mnr(
    method_scores: Sequence[float],
    random_scores: Sequence[float],
    base_scores: Sequence[float],
    tolerance: float = 1e-9,
    seeds: Optional[Sequence[int]] = None,
) -> MnrResult:
    """Per-seed (R - R_rand) / (R_base - R_rand), aggregated by IQM"""
    if not len(method_scores) == len(random_scores) == len(base_scores):
        raise EvaluationError("MNR needs equal-length per-seed score arrays")
    seeds = list(seeds) if seeds is not None else list(range(len(method_scores)))

    normalized: List[Optional[float]] = []
    excluded = []
    for seed, r, r_rand, r_base in zip(seeds, method_scores, random_scores, base_scores):
        spread = r_base - r_rand
        if abs(spread) < tolerance:
            normalized.append(None)
            excluded.append(seed)
            continue
        normalized.append((r - r_rand) / spread)
    if excluded:
        logger.warning(f"Excluded {len(excluded)} seeds with |R_base - R_rand| < {tolerance}: {excluded}")

    result = MnrResult(
        method_scores=list(method_scores),
        random_scores=list(random_scores),
        base_scores=list(base_scores),
        normalized=normalized,
        excluded_seeds=excluded,
    )
    if result.used:
        result.iqm, result.se = iqm_and_se(result.used)
    return result


def one_tailed_t(a: Sequence[float], b: Sequence[float]) -> float:
    """Welch p-value for H1: mean(a) > mean(b)"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise EvaluationError(f"t-test needs at least 2 scores per side, got {a.size} and {b.size}")
    if a.var(ddof=1) == 0 and b.var(ddof=1) == 0:
        if a.mean() == b.mean():
            return 0.5
        return 0.0 if a.mean() > b.mean() else 1.0
    return float(stats.ttest_ind(a, b, equal_var=False, alternative="greater").pvalue)


def baselines(
    instance: RmabInstance,
    task: TaskSpec,
    protocol: EvalProtocol,
    seed: int,
    train_config: Optional[TrainConfig] = None,
    audit: Optional[List[BudgetAudit]] = None,
) -> Dict[str, float]:
    """Random, NoAction, Default and Base scores on one instance under common random numbers"""
    rewards = {DEFAULT: parse(DEFAULT_REWARD_SOURCE), BASE: task.base_reward}
    scores = {
        RANDOM: _score(RandomAllocation(instance.budget, make_rng(seed, RANDOM_POLICY_STREAM)),
                       instance, task, protocol, seed, audit),
        NO_ACTION: _score(NoAction(), instance, task, protocol, seed, audit),
    }
    scores.update(_score_rewards(rewards, instance, task, protocol, seed, train_config, audit))
    return scores


def _score(
    actor: Actor, instance: RmabInstance, task: TaskSpec, protocol: EvalProtocol, seed: int,
    audit: Optional[List[BudgetAudit]]
) -> float:
    if audit is not None:
        actor = BudgetAudit(actor, instance.budget)
        audit.append(actor)
    # every method replays the same transition stream
    return evaluate_policy(actor, instance, task, protocol, make_rng(seed, EVAL_STREAM))


def _score_rewards(
    rewards: Dict[str, RewardExpr], instance: RmabInstance, task: TaskSpec, protocol: EvalProtocol,
    seed: int, train_config: Optional[TrainConfig], audit: Optional[List[BudgetAudit]]
) -> Dict[str, float]:
    train_config = train_config or TrainConfig()
    scores = {}
    for name, expr in rewards.items():
        policy = train(instance, expr, train_config, seed)
        scores[name] = _score(GreedyPolicy(policy, instance.budget), instance, task, protocol, seed, audit)
    return scores


def _score_seed(
    task: TaskSpec, method_rewards: Dict[str, RewardExpr], settings: RunSettings, seed: int
) -> Tuple[Dict[str, float], int, int]:
    instance = generate_instance(seed, settings.n_arms, settings.budget, settings.population, settings.discount)
    audit: List[BudgetAudit] = []
    scores = baselines(instance, task, settings.protocol, seed, settings.loop.train, audit)
    scores.update(_score_rewards(method_rewards, instance, task, settings.protocol, seed, settings.loop.train, audit))
    steps = sum(a.steps for a in audit)
    violations = sum(a.violations for a in audit)
    logger.debug(f"Task {task.index} seed {seed}: {scores}")
    return scores, steps, violations


def run_sweep(
    task: TaskSpec,
    method_rewards: Optional[Dict[str, RewardExpr]] = None,
    protocol: Optional[EvalProtocol] = None,
    settings: Optional[RunSettings] = None,
    workers: int = 1,
) -> TaskSweepResult:
    """Evaluate the baselines and any extra rewards of one task across the protocol's seeds"""
    settings = settings or RunSettings()
    if protocol is not None:
        settings = settings.model_copy(update={"protocol": protocol})
    protocol = settings.protocol
    method_rewards = dict(method_rewards or {})
    clash = set(method_rewards) & set(BASELINE_METHODS)
    if clash:
        raise ConfigError(f"Method names {sorted(clash)} are reserved for baselines")

    seeds = protocol.seeds
    jobs = [(task, method_rewards, settings, seed) for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_score_seed, *zip(*jobs)))
    else:
        outcomes = [_score_seed(*job) for job in jobs]

    methods = list(BASELINE_METHODS) + list(method_rewards)
    raw = {m: [scores[m] for scores, _, _ in outcomes] for m in methods}
    results = {m: mnr(raw[m], raw[RANDOM], raw[BASE], protocol.tolerance, seeds) for m in methods}

    t_tests = {}
    for a in methods:
        for b in methods:
            if a != b and len(results[a].used) >= 2:
                t_tests[f"{a}>{b}"] = one_tailed_t(results[a].used, results[b].used)

    sweep = TaskSweepResult(
        task_index=task.index,
        task_label=task.label,
        seeds=seeds,
        raw_scores=raw,
        mnr=results,
        t_tests=t_tests,
        budget_violations=sum(v for _, _, v in outcomes),
        steps_checked=sum(s for _, s, _ in outcomes),
    )
    logger.info(
        f"Sweep task {task.index} over {len(seeds)} seeds: "
        + ", ".join(f"{m}={results[m].iqm}" for m in methods)
    )
    return sweep


def feature_precision_recall(candidate: RewardExpr, task: TaskSpec) -> PrecisionRecall:
    used = used_features(candidate)
    base = set(task.base_features)
    hits = len(used & base)
    if not used:
        precision = 1.0 if not base else 0.0
    else:
        precision = hits / len(used)
    recall = hits / len(base) if base else 1.0
    return PrecisionRecall(precision=precision, recall=recall)


def _mean_se(values: List[float]) -> Tuple[float, float]:
    x = np.asarray(values, dtype=float)
    se = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def aggregate_precision_recall(candidates: Iterable[RewardExpr], task: TaskSpec) -> Optional[AggregateFeatureMetrics]:
    scores = [feature_precision_recall(c, task) for c in candidates]
    if not scores:
        return None
    precision_mean, precision_se = _mean_se([s.precision for s in scores])
    recall_mean, recall_se = _mean_se([s.recall for s in scores])
    return AggregateFeatureMetrics(
        n_candidates=len(scores),
        precision_mean=precision_mean,
        precision_se=precision_se,
        recall_mean=recall_mean,
        recall_se=recall_se,
    )


def logic_match(candidate: RewardExpr, task: TaskSpec) -> bool:
    """Same bonus set as the Base reward over the union of both feature sets"""
    union = used_features(candidate) | set(task.base_features)
    return bonus_set(candidate, union) == bonus_set(task.base_reward, union)


def logic_recall(candidates: Iterable[RewardExpr], task: TaskSpec) -> Optional[float]:
    """Share of feature-complete candidates reproducing the Base logic; None when none qualify"""
    if len(task.base_features) < 2:
        raise EvaluationError(f"Logic recall needs a multi-feature task, task {task.index} has one feature")
    base = set(task.base_features)
    qualifying = [c for c in candidates if used_features(c) >= base]
    if not qualifying:
        return None
    matches = 0
    for candidate in qualifying:
        try:
            matches += logic_match(candidate, task)
        except (TooManyIndicesError, RewardEvalError) as e:
            logger.warning(f"Counting candidate as a logic mismatch: {e}")
    return matches / len(qualifying)
