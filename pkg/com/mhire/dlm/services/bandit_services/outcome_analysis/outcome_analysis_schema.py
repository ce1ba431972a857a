from typing import Dict, List

from pydantic import BaseModel, Field

from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import REPORT_LABELS

# section title -> (group label -> percentage), in render order
CategoryDistributions = Dict[str, Dict[str, float]]


class OutcomeReport(BaseModel):
    totals: List[int]
    category_distributions: CategoryDistributions
    no_positive_states: bool = False
    rendered: str = ""

    def group_percentage(self, feature_index: int) -> float:
        """Share of positive states held by arms with the given feature bit"""
        section, label = REPORT_LABELS[feature_index]
        return self.category_distributions[section][label]


class AnalysisConfig(BaseModel):
    steps_per_trial: int = Field(10, ge=1)
    n_trials: int = Field(50, ge=1)
