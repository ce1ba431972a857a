from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, Field, computed_field

from com.mhire.dlm.services.bandit_services.outcome_analysis.outcome_analysis_schema import (
    AnalysisConfig, OutcomeReport
)
from com.mhire.dlm.services.bandit_services.policy_train.policy_train_schema import PolicySummary, TrainConfig


class LoopConfig(BaseModel):
    iterations: int = Field(2, ge=1)
    candidates_per_iter: int = Field(2, ge=1)
    train: TrainConfig = Field(default_factory=TrainConfig)
    analysis: AnalysisConfig = Field(default_factory=AnalysisConfig)
    seed: int = Field(0, ge=0)
    # re-queries allowed per candidate slot after the first response fails to parse
    retry_budget: int = Field(2, ge=0)


class SlotStatus(str, Enum):
    SELECTED = "selected"
    TRAINED_NOT_SELECTED = "trained-not-selected"
    FAILED = "failed"


class SelectionMethod(str, Enum):
    REFLECTION = "reflection"
    FALLBACK = "fallback"
    SINGLE_CANDIDATE = "single-candidate"


class CandidateRecord(BaseModel):
    slot: int
    responses: List[str] = Field(default_factory=list)
    source: Optional[str] = None
    canonical: Optional[str] = None
    parse_errors: List[str] = Field(default_factory=list)
    training_seed: Optional[int] = None
    policy: Optional[PolicySummary] = None
    outcome: Optional[OutcomeReport] = None
    status: SlotStatus = SlotStatus.FAILED
    failure_reason: Optional[str] = None

    @computed_field
    @property
    def terminal_status(self) -> str:
        if self.status == SlotStatus.FAILED:
            return f"failed:{self.failure_reason}"
        return self.status.value


class IterationRecord(BaseModel):
    iteration: int
    prior_best: List[str] = Field(default_factory=list)
    candidates: List[CandidateRecord] = Field(default_factory=list)
    reflection_response: Optional[str] = None
    selection_method: Optional[SelectionMethod] = None
    fallback_reason: Optional[str] = None
    selected_index: Optional[int] = None
    selected_reward: Optional[str] = None
    skipped: bool = False
    generation_calls: int = 0
    retry_calls: int = 0
    reflection_calls: int = 0


class LoopTrace(BaseModel):
    task_index: int
    task_label: str
    reflection: bool = True
    iterations: List[IterationRecord] = Field(default_factory=list)
    final_reward: Optional[str] = None

    @computed_field
    @property
    def llm_calls(self) -> int:
        return sum(it.generation_calls + it.retry_calls + it.reflection_calls for it in self.iterations)

    def all_candidates(self) -> List[CandidateRecord]:
        return [candidate for it in self.iterations for candidate in it.candidates]


class RunRequest(BaseModel):
    task_index: int = Field(..., ge=0)
    transcript: List[str] = Field(..., min_length=1)
    instance_seed: int = Field(7, ge=0)
    n_arms: int = Field(48, ge=1)
    budget: int = Field(5, ge=1)
    loop: LoopConfig = Field(default_factory=LoopConfig)
    reflection: bool = True
