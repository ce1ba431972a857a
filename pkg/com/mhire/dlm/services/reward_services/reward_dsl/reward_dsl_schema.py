from dataclasses import dataclass
from typing import List, Union

from pydantic import BaseModel, Field


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class StateVar:
    pass


@dataclass(frozen=True)
class FeatureRef:
    index: int


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "RewardExpr"
    right: "RewardExpr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    left: "RewardExpr"
    right: "RewardExpr"


@dataclass(frozen=True)
class Not:
    operand: "RewardExpr"


@dataclass(frozen=True)
class Neg:
    operand: "RewardExpr"


@dataclass(frozen=True)
class IfCall:
    argument: "RewardExpr"


RewardExpr = Union[Num, StateVar, FeatureRef, BinOp, BoolOp, Not, Neg, IfCall]


class RewardParseRequest(BaseModel):
    source: str = Field(..., min_length=1, max_length=4000)


class RewardParseResponse(BaseModel):
    canonical: str
    used_features: List[int]
    sensitive_features: List[int] = Field(default_factory=list)
