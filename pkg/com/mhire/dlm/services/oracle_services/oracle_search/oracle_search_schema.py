from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator


class SearchSpace(BaseModel):
    """Log-spaced grid {alpha^k : -K <= k <= K} shared by every supported weight"""

    alpha: float = Field(10.0, gt=1.0)
    k: int = Field(1, ge=0)
    # indices of the active weights, searched in this order
    support: List[int] = Field(default_factory=lambda: [0])
    dimension: Optional[int] = None

    @field_validator("support")
    @classmethod
    def check_support(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("support must name at least one weight index")
        if len(set(value)) != len(value) or min(value) < 0:
            raise ValueError(f"support indices must be distinct and non-negative, got {value}")
        return value

    @model_validator(mode="after")
    def check_dimension(self) -> "SearchSpace":
        if self.dimension is None:
            self.dimension = max(self.support) + 1
        elif self.dimension <= max(self.support):
            raise ValueError(f"dimension {self.dimension} does not cover support {self.support}")
        return self

    @property
    def grid(self) -> np.ndarray:
        return self.alpha ** np.arange(-self.k, self.k + 1, dtype=float)

    @property
    def size(self) -> int:
        return 2 * self.k + 1

    @property
    def support_size(self) -> int:
        return len(self.support)

    @property
    def min_value(self) -> float:
        return float(self.grid[0])

    @property
    def max_value(self) -> float:
        return float(self.grid[-1])

    def index_of(self, value: float) -> int:
        """Grid position nearest to value in log scale"""
        return int(np.argmin(np.abs(np.log(self.grid) - np.log(value))))

    def step_up(self, value: float) -> float:
        """Next grid value above value, or value * alpha once past the top of the grid"""
        index = self.index_of(value)
        if index + 1 < self.size:
            return float(self.grid[index + 1])
        return float(value * self.alpha)

    def embed(self, weights: np.ndarray) -> np.ndarray:
        """Full weight vector with zeros off the support"""
        full = np.zeros(self.dimension)
        full[self.support] = weights
        return full


class OracleCase(BaseModel):
    case: int
    alpha: float
    k: int
    support: List[int]
    w_star: List[float]
    w_hat: List[float]
    w_brute: List[float]
    calls: int
    call_bound: int
    match: bool
    monotone: bool = True


class CallCell(BaseModel):
    support_size: int
    k: int
    cases: int
    mean_calls: float


class OracleReport(BaseModel):
    cases_run: int
    mismatches: int
    bound_violations: int
    stress_cases: int = 0
    stress_mismatches: int = 0
    slope: Optional[float] = None
    intercept: Optional[float] = None
    r_squared: Optional[float] = None
    cells: List[CallCell] = Field(default_factory=list)
    cases: List[OracleCase] = Field(default_factory=list)


class VerifyRequest(BaseModel):
    cases: int = Field(200, ge=1)
    support_max: int = Field(3, ge=1)
    k_max: int = Field(3, ge=1)
    seed: int = Field(0, ge=0)
    stress: bool = False
