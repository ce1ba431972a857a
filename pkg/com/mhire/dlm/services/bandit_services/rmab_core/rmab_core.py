import logging
from typing import Callable, Optional, Tuple, Union

import numpy as np

from com.mhire.dlm.common.errors import BudgetViolationError, InstanceError
from com.mhire.dlm.common.seeding import INSTANCE_STREAM, make_rng
from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import (
    CATEGORY_BLOCKS, N_FEATURES
)
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import (
    Arm, InstanceArrays, PopulationConfig, RmabInstance
)

logger = logging.getLogger(__name__)

Actor = Callable[[np.ndarray], np.ndarray]


def generate_instance(
    seed: int,
    n_arms: int = 48,
    budget: int = 5,
    config: Optional[PopulationConfig] = None,
    discount: float = 0.9,
) -> RmabInstance:
    """Sample a synthetic population; the result is a pure function of the arguments"""
    config = config or PopulationConfig()
    if n_arms < 1:
        raise InstanceError(f"n_arms must be at least 1, got {n_arms}")
    if not 1 <= budget <= n_arms:
        raise InstanceError(f"budget must be in [1, {n_arms}], got {budget}")

    rng = make_rng(seed, INSTANCE_STREAM)
    rows = np.arange(n_arms)

    features = np.zeros((n_arms, N_FEATURES), dtype=np.int8)
    for block, indices in CATEGORY_BLOCKS.items():
        choice = rng.choice(len(indices), size=n_arms, p=config.weights_for(block))
        features[rows, np.asarray(indices)[choice]] = 1

    p = np.empty((n_arms, 2, 2))
    p[:, 0, 0] = rng.beta(config.base_alpha, config.base_beta, size=n_arms)
    lift = config.lift_scale * rng.beta(config.lift_alpha, config.lift_beta, size=n_arms)
    p[:, 0, 1] = np.minimum(1.0, p[:, 0, 0] + lift)
    p[:, 1, :] = np.minimum(1.0, p[:, 0, :] + config.stickiness)

    states = (rng.random(n_arms) < config.initial_engaged_prob).astype(np.int8)

    arms = [
        Arm(id=i, features=features[i].tolist(), transitions=p[i].tolist(), state=int(states[i]))
        for i in range(n_arms)
    ]
    instance = RmabInstance(rng_seed=seed, budget=budget, discount=discount, arms=arms)
    logger.info(f"Generated instance seed={seed} arms={n_arms} budget={budget} discount={discount}")
    return instance


class RmabSimulator:
    """Independent two-state arms advanced in lockstep.

    States may carry a leading trial axis, shape (trials, N), so many rollouts share
    one vectorised step. The simulator owns its RNG stream.
    """

    def __init__(self, instance: Union[RmabInstance, InstanceArrays], rng: np.random.Generator):
        self.arrays = instance.to_arrays() if isinstance(instance, RmabInstance) else instance
        self.rng = rng
        self._arm_index = np.arange(self.arrays.n_arms)
        self.states = self.arrays.initial_states.copy()

    @property
    def budget(self) -> int:
        return self.arrays.budget

    def reset(self, n_trials: Optional[int] = None) -> np.ndarray:
        if n_trials is None:
            self.states = self.arrays.initial_states.copy()
        else:
            self.states = np.tile(self.arrays.initial_states, (n_trials, 1))
        return self.states

    def step(self, actions: np.ndarray, enforce_budget: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        actions = np.asarray(actions, dtype=np.int8)
        if actions.shape != self.states.shape:
            raise InstanceError(f"Action shape {actions.shape} does not match state shape {self.states.shape}")
        if enforce_budget and np.any(actions.sum(axis=-1) > self.arrays.budget):
            raise BudgetViolationError(
                f"Action vector spends {int(actions.sum(axis=-1).max())} > budget {self.arrays.budget}"
            )
        prob = self.arrays.p[self._arm_index, self.states, actions]
        next_states = (self.rng.random(self.states.shape) < prob).astype(np.int8)
        prev_states = self.states
        self.states = next_states
        return next_states, prev_states

    def rollout(self, actor: Actor, n_trials: int, n_steps: int) -> np.ndarray:
        """Budget-checked rollouts from the initial states; returns post-transition states (trials, steps, N)"""
        self.reset(n_trials)
        visited = np.empty((n_trials, n_steps, self.arrays.n_arms), dtype=np.int8)
        for t in range(n_steps):
            next_states, _ = self.step(actor(self.states), enforce_budget=True)
            visited[:, t, :] = next_states
        return visited


def step(instance: RmabInstance, actions: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """One transition from the instance's current arm states"""
    return RmabSimulator(instance, rng).step(actions)


def instance_to_json(instance: RmabInstance) -> str:
    return instance.model_dump_json(by_alias=True, indent=2)


def instance_from_json(text: str) -> RmabInstance:
    return RmabInstance.model_validate_json(text)
