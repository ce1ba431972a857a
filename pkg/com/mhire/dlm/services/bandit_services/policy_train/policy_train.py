import itertools
import logging
from typing import Optional, Tuple

import numpy as np

from com.mhire.dlm.common.errors import (
    CandidateFailure, InstanceError, RewardEvalError, TrainingError
)
from com.mhire.dlm.common.seeding import TRAIN_STREAM, make_rng
from com.mhire.dlm.services.bandit_services.policy_train.policy_train_schema import (
    Mode, PolicyHyper, PolicySummary, PolicyTableModel, QInit, TrainConfig
)
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core import RmabSimulator
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import RmabInstance
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import reward_table
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import RewardExpr

logger = logging.getLogger(__name__)

MAX_JOINT_ARMS = 10


class LinearSchedule:
    """Linear interpolation from initial_p to final_p over schedule_timesteps, then constant"""

    def __init__(self, schedule_timesteps: int, final_p: float, initial_p: float):
        self.schedule_timesteps = schedule_timesteps
        self.final_p = final_p
        self.initial_p = initial_p

    def value(self, t: int) -> float:
        if self.schedule_timesteps <= 0:
            return self.initial_p
        fraction = min(float(t) / self.schedule_timesteps, 1.0)
        return self.initial_p + fraction * (self.final_p - self.initial_p)


class PolicyTable:
    """Per-arm Q_n(s, a) with a shared action charge"""

    def __init__(self, q: np.ndarray, lam: float, hyper: PolicyHyper):
        self.q = np.asarray(q, dtype=float)
        self.lam = float(lam)
        self.hyper = hyper

    @property
    def n_arms(self) -> int:
        return self.q.shape[0]

    def advantages(self, states: np.ndarray) -> np.ndarray:
        q_s = self.q[np.arange(self.n_arms), np.asarray(states, dtype=np.intp)]
        return q_s[..., 1] - q_s[..., 0] - self.lam

    def summary(self, budget: int) -> PolicySummary:
        """Charged advantage averaged over both states, and the arms acted on from the all-zero state"""
        mean_adv = (self.advantages(np.zeros(self.n_arms, dtype=np.int8))
                    + self.advantages(np.ones(self.n_arms, dtype=np.int8))) / 2.0
        actions = select_actions(self, np.zeros(self.n_arms, dtype=np.int8), budget, Mode.EVAL)
        return PolicySummary(
            final_lambda=self.lam,
            mean_advantage=float(mean_adv.mean()),
            acting_arms=[int(i) for i in np.flatnonzero(actions)],
        )

    def to_json(self) -> str:
        model = PolicyTableModel(lambda_=self.lam, q=self.q.tolist(), hyper=self.hyper)
        return model.model_dump_json(by_alias=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PolicyTable":
        model = PolicyTableModel.model_validate_json(text)
        return cls(np.asarray(model.q, dtype=float), model.lambda_, model.hyper)


def _check_finite(values: np.ndarray):
    if not np.all(np.isfinite(values)):
        raise TrainingError("Q-table became non-finite")


def q_update(policy: PolicyTable, arm: int, s: int, a: int, reward: float, s_next: int) -> float:
    """Bellman backup of one arm's Q(s, a) with the action charge applied to acting"""
    alpha = policy.hyper.alpha_q
    target = reward - policy.lam * a + policy.hyper.beta * policy.q[arm, s_next].max()
    value = (1.0 - alpha) * policy.q[arm, s, a] + alpha * target
    _check_finite(np.asarray(value))
    policy.q[arm, s, a] = value
    return float(value)


def _q_update_all(policy: PolicyTable, s: np.ndarray, a: np.ndarray, reward: np.ndarray, s_next: np.ndarray):
    # one transition per arm, so the fancy-indexed write has no duplicates
    arms = np.arange(policy.n_arms)
    alpha = policy.hyper.alpha_q
    target = reward - policy.lam * a + policy.hyper.beta * policy.q[arms, s_next].max(axis=-1)
    updated = (1.0 - alpha) * policy.q[arms, s, a] + alpha * target
    _check_finite(updated)
    policy.q[arms, s, a] = updated


def lambda_update(policy: PolicyTable, spend: float, budget: int) -> float:
    """Projected ascent on the action charge: up when discounted spend beats the discounted budget"""
    if spend < 0:
        raise TrainingError(f"Discounted spend must be non-negative, got {spend}")
    discounted_budget = budget / (1.0 - policy.hyper.beta)
    policy.lam = max(0.0, policy.lam + policy.hyper.alpha_lambda * (spend - discounted_budget))
    return policy.lam


def select_actions(
    policy: PolicyTable,
    states: np.ndarray,
    budget: int,
    mode: Mode,
    rng: Optional[np.random.Generator] = None,
    epsilon: Optional[float] = None,
) -> np.ndarray:
    """Eval: top-B arms by charged advantage, lower id first on ties. Train: per-arm epsilon-greedy"""
    states = np.asarray(states, dtype=np.intp)
    if states.shape[-1] != policy.n_arms:
        raise InstanceError(f"Expected {policy.n_arms} arm states, got {states.shape[-1]}")

    if mode == Mode.EVAL:
        order = np.argsort(-policy.advantages(states), axis=-1, kind="stable")
        chosen = order[..., :min(budget, policy.n_arms)]
        actions = np.zeros(states.shape, dtype=np.int8)
        np.put_along_axis(actions, chosen, 1, axis=-1)
        return actions

    if rng is None:
        raise TrainingError("Train-mode action selection needs a random stream")
    epsilon = policy.hyper.epsilon if epsilon is None else epsilon
    q_s = policy.q[np.arange(policy.n_arms), states]
    rest, act = q_s[..., 0], q_s[..., 1] - policy.lam
    coin = rng.integers(0, 2, size=states.shape, dtype=np.int8)
    greedy = np.where(act == rest, coin, (act > rest).astype(np.int8))
    explore = rng.random(states.shape) < epsilon
    random_actions = rng.integers(0, 2, size=states.shape, dtype=np.int8)
    return np.where(explore, random_actions, greedy).astype(np.int8)


def _initial_q(rewards: np.ndarray, beta: float, mode: QInit) -> np.ndarray:
    n_arms = rewards.shape[0]
    if mode == QInit.ZERO:
        return np.zeros((n_arms, 2, 2))
    # every entry starts at the arm's best discounted return
    ceiling = rewards.max(axis=1) / (1.0 - beta)
    return np.broadcast_to(ceiling[:, None, None], (n_arms, 2, 2)).copy()


def train(instance: RmabInstance, reward: RewardExpr, config: TrainConfig, seed: int) -> PolicyTable:
    """Lagrangian-decoupled tabular Q-learning, deterministic given the seed"""
    arrays = instance.to_arrays()
    try:
        rewards = reward_table(reward, arrays.features)
    except RewardEvalError as e:
        raise CandidateFailure(f"reward evaluation failed: {e}") from e

    beta = arrays.discount
    hyper = PolicyHyper(
        alpha_q=config.alpha_q,
        alpha_lambda=config.alpha_lambda,
        epsilon=config.epsilon_start,
        beta=beta,
    )
    policy = PolicyTable(_initial_q(rewards, beta, config.q_init), config.initial_lambda, hyper)

    rng = make_rng(seed, TRAIN_STREAM)
    simulator = RmabSimulator(arrays, rng)
    schedule = LinearSchedule(config.epochs - 1, config.epsilon_end, config.epsilon_start)
    discounts = beta ** np.arange(config.steps_per_epoch)
    arms = np.arange(arrays.n_arms)

    for epoch in range(config.epochs):
        policy.hyper.epsilon = schedule.value(epoch)
        buffer = []
        for _ in range(config.steps_per_epoch):
            actions = select_actions(policy, simulator.states, arrays.budget, Mode.TRAIN, rng)
            next_states, prev_states = simulator.step(actions)
            buffer.append((prev_states, actions, rewards[arms, prev_states], next_states))

        for s, a, r, s_next in buffer:
            _q_update_all(policy, s, a, r, s_next)

        spend = float(np.dot(discounts, [a.sum() for _, a, _, _ in buffer]))
        lambda_update(policy, spend, arrays.budget)
        logger.debug(f"Epoch {epoch}: epsilon={policy.hyper.epsilon:.3f} spend={spend:.2f} lambda={policy.lam:.4f}")

    logger.info(f"Trained policy on {arrays.n_arms} arms, seed={seed}, final lambda={policy.lam:.4f}")
    return policy


def arm_value_iteration(
    p: np.ndarray, rewards: np.ndarray, lam: float, beta: float, tol: float = 1e-10, max_iter: int = 100000
) -> np.ndarray:
    """Exact Q(s, a) of a single two-state arm under a fixed action charge"""
    p = np.asarray(p, dtype=float)
    rewards = np.asarray(rewards, dtype=float)
    cost = np.array([0.0, 1.0])
    q = np.zeros((2, 2))
    for _ in range(max_iter):
        v = q.max(axis=1)
        expected_next = p * v[1] + (1.0 - p) * v[0]
        updated = rewards[:, None] - lam * cost[None, :] + beta * expected_next
        if np.max(np.abs(updated - q)) < tol:
            return updated
        q = updated
    return q


def _joint_model(instance: RmabInstance, reward: RewardExpr) -> Tuple[np.ndarray, np.ndarray, list, np.ndarray]:
    arrays = instance.to_arrays()
    n = arrays.n_arms
    if n > MAX_JOINT_ARMS:
        raise InstanceError(f"Joint MDP limited to {MAX_JOINT_ARMS} arms, got {n}")
    bits = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.intp)
    rewards = reward_table(reward, arrays.features)
    joint_reward = rewards[np.arange(n), bits].sum(axis=1)
    feasible = [np.array(a, dtype=np.intp) for a in itertools.product((0, 1), repeat=n) if sum(a) <= arrays.budget]

    transitions = []
    for action in feasible:
        q = arrays.p[np.arange(n), bits, action]  # (S, N) probability of engaging next
        prob = np.where(bits[None, :, :] == 1, q[:, None, :], 1.0 - q[:, None, :]).prod(axis=2)
        transitions.append(prob)
    return bits, joint_reward, feasible, np.asarray(transitions)


def joint_optimal_value(instance: RmabInstance, reward: RewardExpr, tol: float = 1e-10) -> np.ndarray:
    """Optimal discounted value of every joint state, acting on at most B arms per step"""
    _, joint_reward, _, transitions = _joint_model(instance, reward)
    beta = instance.discount
    values = np.zeros(joint_reward.shape[0])
    while True:
        updated = (joint_reward[None, :] + beta * transitions @ values).max(axis=0)
        if np.max(np.abs(updated - values)) < tol:
            return updated
        values = updated


def joint_policy_value(instance: RmabInstance, reward: RewardExpr, policy: PolicyTable) -> np.ndarray:
    """Exact discounted value of the budgeted greedy policy for every joint state"""
    bits, joint_reward, feasible, transitions = _joint_model(instance, reward)
    actions = select_actions(policy, bits, instance.budget, Mode.EVAL)
    lookup = {tuple(a.tolist()): i for i, a in enumerate(feasible)}
    chosen = np.array([transitions[lookup[tuple(a.tolist())], j] for j, a in enumerate(actions)])
    system = np.eye(len(joint_reward)) - instance.discount * chosen
    return np.linalg.solve(system, joint_reward)
