from enum import Enum
from typing import List

from pydantic import BaseModel, Field, model_validator


class Mode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


class QInit(str, Enum):
    OPTIMISTIC = "optimistic"
    ZERO = "zero"


class PolicyHyper(BaseModel):
    alpha_q: float = Field(0.1, ge=0.0, le=1.0)
    alpha_lambda: float = Field(0.01, ge=0.0)
    epsilon: float = Field(0.1, ge=0.0, le=1.0)
    beta: float = Field(0.9, ge=0.0, lt=1.0)


class TrainConfig(BaseModel):
    epochs: int = Field(5, ge=1)
    steps_per_epoch: int = Field(100, ge=1)
    alpha_q: float = Field(0.1, ge=0.0, le=1.0)
    alpha_lambda: float = Field(0.01, ge=0.0)
    epsilon_start: float = Field(0.1, ge=0.0, le=1.0)
    epsilon_end: float = Field(0.01, ge=0.0, le=1.0)
    initial_lambda: float = Field(0.0, ge=0.0)
    q_init: QInit = QInit.OPTIMISTIC

    @model_validator(mode="after")
    def check_schedule(self) -> "TrainConfig":
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        return self


class PolicyTableModel(BaseModel):
    """JSON form of a trained policy: q[arm][s][a]"""

    lambda_: float = Field(alias="lambda", ge=0.0)
    q: List[List[List[float]]]
    hyper: PolicyHyper = Field(default_factory=PolicyHyper)

    model_config = {"populate_by_name": True}


class PolicySummary(BaseModel):
    final_lambda: float
    mean_advantage: float
    acting_arms: List[int]
