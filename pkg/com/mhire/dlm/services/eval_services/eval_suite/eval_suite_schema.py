from typing import Dict, FrozenSet, List, Optional

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import parse, used_features
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import RewardExpr


class TaskSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    index: int = Field(ge=0)
    label: str
    prompt: str
    base_reward_source: str = Field(alias="base_reward")
    base_features: List[int]

    _base_reward: RewardExpr = PrivateAttr()

    @model_validator(mode="after")
    def check_base_features(self) -> "TaskSpec":
        found = used_features(parse(self.base_reward_source))
        if set(self.base_features) != found:
            raise ValueError(
                f"Task {self.index}: listed base features {sorted(self.base_features)} "
                f"differ from the expression's {sorted(found)}"
            )
        return self

    def model_post_init(self, __context) -> None:
        self._base_reward = parse(self.base_reward_source)

    @property
    def base_reward(self) -> RewardExpr:
        return self._base_reward

    @property
    def base_feature_set(self) -> FrozenSet[int]:
        return frozenset(self.base_features)


class EvalProtocol(BaseModel):
    n_seeds: int = Field(50, ge=1)
    trials_per_seed: int = Field(50, ge=1)
    steps_per_trial: int = Field(10, ge=1)
    first_seed: int = Field(0, ge=0)
    # seeds whose |R_base - R_rand| falls below this are excluded from MNR
    tolerance: float = Field(1e-9, ge=0.0)

    @property
    def seeds(self) -> List[int]:
        return list(range(self.first_seed, self.first_seed + self.n_seeds))


class MnrResult(BaseModel):
    method_scores: List[float]
    random_scores: List[float]
    base_scores: List[float]
    normalized: List[Optional[float]]
    excluded_seeds: List[int] = Field(default_factory=list)
    iqm: Optional[float] = None
    se: Optional[float] = None

    @property
    def used(self) -> List[float]:
        return [value for value in self.normalized if value is not None]


class PrecisionRecall(BaseModel):
    precision: float
    recall: float


class AggregateFeatureMetrics(BaseModel):
    n_candidates: int
    precision_mean: float
    precision_se: float
    recall_mean: float
    recall_se: float


class TaskSweepResult(BaseModel):
    task_index: int
    task_label: str
    seeds: List[int]
    raw_scores: Dict[str, List[float]]
    mnr: Dict[str, MnrResult]
    # "a>b" -> one-tailed p-value for mean MNR(a) > mean MNR(b)
    t_tests: Dict[str, float]
    budget_violations: int = 0
    steps_checked: int = 0


class EvalReport(BaseModel):
    methods: List[str]
    protocol: EvalProtocol
    tasks: List[TaskSweepResult]
