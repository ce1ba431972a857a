from dataclasses import dataclass
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import (
    CATEGORY_BLOCKS, N_FEATURES
)


class PopulationConfig(BaseModel):
    """Parameters of the synthetic arm population"""

    # block name -> relative weight of each option; blocks left out are uniform
    category_weights: Dict[str, List[float]] = Field(default_factory=dict)
    base_alpha: float = Field(2.0, gt=0)
    base_beta: float = Field(4.0, gt=0)
    lift_alpha: float = Field(2.0, gt=0)
    lift_beta: float = Field(6.0, gt=0)
    lift_scale: float = Field(1.0, ge=0, le=1)
    stickiness: float = Field(0.15, ge=0, le=1)
    initial_engaged_prob: float = Field(0.5, ge=0, le=1)

    @field_validator("category_weights")
    @classmethod
    def check_weights(cls, value: Dict[str, List[float]]) -> Dict[str, List[float]]:
        for block, weights in value.items():
            if block not in CATEGORY_BLOCKS:
                raise ValueError(f"Unknown category block '{block}'")
            if len(weights) != len(CATEGORY_BLOCKS[block]):
                raise ValueError(f"Block '{block}' needs {len(CATEGORY_BLOCKS[block])} weights, got {len(weights)}")
            if any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ValueError(f"Weights for '{block}' must be non-negative with a positive sum")
        return value

    def weights_for(self, block: str) -> np.ndarray:
        size = len(CATEGORY_BLOCKS[block])
        weights = np.asarray(self.category_weights.get(block, [1.0] * size), dtype=float)
        return weights / weights.sum()

    @property
    def expected_action_lift(self) -> float:
        """Mean of the sampled lift before clipping at 1"""
        return self.lift_scale * self.lift_alpha / (self.lift_alpha + self.lift_beta)


class Arm(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: int = Field(ge=0)
    features: List[int]
    # transitions[s][a] = P(next state = 1 | s, a)
    transitions: List[List[float]] = Field(alias="p")
    state: int = Field(0, ge=0, le=1)

    @field_validator("features")
    @classmethod
    def check_features(cls, value: List[int]) -> List[int]:
        if len(value) != N_FEATURES:
            raise ValueError(f"Feature vector must have length {N_FEATURES}, got {len(value)}")
        if any(bit not in (0, 1) for bit in value):
            raise ValueError("Feature vector must be binary")
        for block, indices in CATEGORY_BLOCKS.items():
            if sum(value[i] for i in indices) != 1:
                raise ValueError(f"Exactly one bit must be set in category block '{block}'")
        return value

    @field_validator("transitions")
    @classmethod
    def check_transitions(cls, value: List[List[float]]) -> List[List[float]]:
        if len(value) != 2 or any(len(row) != 2 for row in value):
            raise ValueError("Transition table must be 2x2")
        for s in (0, 1):
            for a in (0, 1):
                if not 0.0 <= value[s][a] <= 1.0:
                    raise ValueError(f"p[{s}][{a}]={value[s][a]} outside [0, 1]")
            if value[s][1] < value[s][0]:
                raise ValueError(f"Acting lowers engagement for state {s}: p[{s}][1] < p[{s}][0]")
        return value


@dataclass(frozen=True)
class InstanceArrays:
    features: np.ndarray        # (N, 43) int8
    p: np.ndarray               # (N, 2, 2) float64
    initial_states: np.ndarray  # (N,) int8
    budget: int
    discount: float

    @property
    def n_arms(self) -> int:
        return self.p.shape[0]


class RmabInstance(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    rng_seed: int = Field(alias="seed")
    budget: int = Field(ge=1)
    discount: float = Field(ge=0.0, lt=1.0)
    arms: List[Arm] = Field(min_length=1)

    @model_validator(mode="after")
    def check_instance(self) -> "RmabInstance":
        if self.budget > len(self.arms):
            raise ValueError(f"Budget {self.budget} exceeds the number of arms {len(self.arms)}")
        if [arm.id for arm in self.arms] != list(range(len(self.arms))):
            raise ValueError("Arm ids must be 0..N-1 in order")
        return self

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    def feature_matrix(self) -> np.ndarray:
        return np.asarray([arm.features for arm in self.arms], dtype=np.int8)

    def to_arrays(self) -> InstanceArrays:
        return InstanceArrays(
            features=self.feature_matrix(),
            p=np.asarray([arm.transitions for arm in self.arms], dtype=float),
            initial_states=np.asarray([arm.state for arm in self.arms], dtype=np.int8),
            budget=self.budget,
            discount=self.discount,
        )


class InstanceRequest(BaseModel):
    seed: int = Field(7, ge=0)
    n_arms: int = Field(48, ge=1)
    budget: int = Field(5, ge=1)
    discount: float = Field(0.9, ge=0.0, lt=1.0)
    population: PopulationConfig = Field(default_factory=PopulationConfig)
