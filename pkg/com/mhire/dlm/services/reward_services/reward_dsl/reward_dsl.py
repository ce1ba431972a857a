import itertools
import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Set, Tuple

import numpy as np

from com.mhire.dlm.common.errors import (
    DisallowedTokenError, FeatureIndexError, RewardEvalError, RewardParseError, TooManyIndicesError
)
from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import N_FEATURES
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import (
    BinOp, BoolOp, FeatureRef, IfCall, Neg, Not, Num, RewardExpr, StateVar
)

logger = logging.getLogger(__name__)

MAX_BONUS_INDICES = 16
_EPS = 1e-12

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<bad>\*\*|//|&&|\|\||[&|%^~<>=!@:;{}"'`$\#?\\])
  | (?P<op>[-+*/()\[\],])
""", re.VERBOSE)

_KEYWORDS = {"and", "or", "not"}
_FEATURE_NAMES = {"agent_feats", "feature"}
_ALLOWED_NAMES = {"state", "if_"} | _FEATURE_NAMES

# binding strength used by the printer; higher binds tighter
_PREC_OR, _PREC_AND, _PREC_NOT, _PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_ATOM = range(1, 8)


@dataclass(frozen=True)
class Token:
    kind: str  # number | name | op | keyword | end
    text: str
    position: int


def tokenize(source: str) -> List[Token]:
    tokens = []
    position = 0
    while position < len(source):
        match = _TOKEN_RE.match(source, position)
        if match is None:
            raise DisallowedTokenError(f"Unexpected character {source[position]!r}", position)
        kind = match.lastgroup
        text = match.group()
        if kind == "bad":
            if text in ("&", "|", "&&", "||"):
                raise DisallowedTokenError(f"Bitwise operator {text!r} is not allowed, use 'and'/'or'", position)
            raise DisallowedTokenError(f"Operator {text!r} is not allowed", position)
        if kind == "name":
            if text in _KEYWORDS:
                kind = "keyword"
            elif text == "return":
                raise DisallowedTokenError("'return' is not allowed, write a bare expression", position)
            elif text not in _ALLOWED_NAMES:
                raise DisallowedTokenError(f"Unknown name {text!r}", position)
        if kind != "ws":
            tokens.append(Token(kind, text, position))
        position = match.end()
    tokens.append(Token("end", "", len(source)))
    return tokens


class _Parser:
    """Recursive descent over the token list, one method per precedence level"""

    def __init__(self, source: str):
        self.source = source
        self.tokens = tokenize(source)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _accept(self, text: str) -> bool:
        if self.current.kind in ("op", "keyword") and self.current.text == text:
            self.index += 1
            return True
        return False

    def _expect(self, text: str) -> Token:
        token = self.current
        if not self._accept(text):
            found = token.text or "end of input"
            raise RewardParseError(f"Expected {text!r} but found {found!r}", token.position)
        return token

    def parse(self) -> RewardExpr:
        if self.current.kind == "end":
            raise RewardParseError("Empty reward expression", 0)
        expr = self._or()
        if self.current.kind != "end":
            raise RewardParseError(f"Unexpected token {self.current.text!r}", self.current.position)
        return expr

    def _or(self) -> RewardExpr:
        left = self._and()
        while self._accept("or"):
            left = BoolOp("or", left, self._and())
        return left

    def _and(self) -> RewardExpr:
        left = self._not()
        while self._accept("and"):
            left = BoolOp("and", left, self._not())
        return left

    def _not(self) -> RewardExpr:
        if self._accept("not"):
            return Not(self._not())
        return self._arith()

    def _arith(self) -> RewardExpr:
        left = self._term()
        while self.current.kind == "op" and self.current.text in ("+", "-"):
            op = self._advance().text
            left = BinOp(op, left, self._term())
        return left

    def _term(self) -> RewardExpr:
        left = self._unary()
        while self.current.kind == "op" and self.current.text in ("*", "/"):
            op = self._advance().text
            left = BinOp(op, left, self._unary())
        return left

    def _unary(self) -> RewardExpr:
        if self._accept("-"):
            return Neg(self._unary())
        return self._atom()

    def _atom(self) -> RewardExpr:
        token = self.current
        if token.kind == "number":
            self._advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise RewardParseError(f"Numeric literal {token.text!r} is out of range", token.position)
            return Num(value)
        if token.kind == "name":
            self._advance()
            if token.text == "state":
                return StateVar()
            if token.text in _FEATURE_NAMES:
                return self._feature_index()
            # if_
            self._expect("(")
            argument = self._or()
            if self.current.text == ",":
                raise RewardParseError("if_ takes exactly one argument", self.current.position)
            self._expect(")")
            return IfCall(argument)
        if self._accept("("):
            inner = self._or()
            self._expect(")")
            return inner
        found = token.text or "end of input"
        raise RewardParseError(f"Unexpected {found!r}", token.position)

    def _feature_index(self) -> RewardExpr:
        self._expect("[")
        token = self.current
        if token.kind != "number" or not token.text.isdigit():
            raise RewardParseError("Feature index must be an integer literal", token.position)
        self._advance()
        index = int(token.text)
        if not 0 <= index < N_FEATURES:
            raise FeatureIndexError(f"Feature index {index} out of range [0, {N_FEATURES - 1}]", token.position)
        self._expect("]")
        return FeatureRef(index)


def parse(source: str) -> RewardExpr:
    """Parse a single-line reward expression"""
    return _Parser(source).parse()


def _precedence(expr: RewardExpr) -> int:
    if isinstance(expr, BoolOp):
        return _PREC_OR if expr.op == "or" else _PREC_AND
    if isinstance(expr, Not):
        return _PREC_NOT
    if isinstance(expr, BinOp):
        return _PREC_ADD if expr.op in ("+", "-") else _PREC_MUL
    if isinstance(expr, Neg):
        return _PREC_NEG
    return _PREC_ATOM


def _wrap(expr: RewardExpr, needs_parens: bool) -> str:
    text = render(expr)
    return f"({text})" if needs_parens else text


def render(expr: RewardExpr) -> str:
    """Canonical text: minimal parentheses, spaced binary operators, agent_feats spelling"""
    if isinstance(expr, Num):
        return repr(float(expr.value))
    if isinstance(expr, StateVar):
        return "state"
    if isinstance(expr, FeatureRef):
        return f"agent_feats[{expr.index}]"
    if isinstance(expr, IfCall):
        return f"if_({render(expr.argument)})"
    if isinstance(expr, Neg):
        return "-" + _wrap(expr.operand, _precedence(expr.operand) < _PREC_NEG)
    if isinstance(expr, Not):
        return "not " + _wrap(expr.operand, _precedence(expr.operand) < _PREC_NOT)
    # left-associative binary forms
    prec = _precedence(expr)
    left = _wrap(expr.left, _precedence(expr.left) < prec)
    right = _wrap(expr.right, _precedence(expr.right) <= prec)
    return f"{left} {expr.op} {right}"


def evaluate(expr: RewardExpr, state: int, features: Sequence[int]) -> float:
    """Value of the expression for one arm; and/or return an operand like Python does"""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, StateVar):
        return float(state)
    if isinstance(expr, FeatureRef):
        return float(features[expr.index])
    if isinstance(expr, IfCall):
        return 1.0 if evaluate(expr.argument, state, features) != 0 else 0.0
    if isinstance(expr, Not):
        return 1.0 if evaluate(expr.operand, state, features) == 0 else 0.0
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, state, features)
    if isinstance(expr, BoolOp):
        left = evaluate(expr.left, state, features)
        if expr.op == "and":
            return evaluate(expr.right, state, features) if left != 0 else left
        return left if left != 0 else evaluate(expr.right, state, features)

    left = evaluate(expr.left, state, features)
    right = evaluate(expr.right, state, features)
    if expr.op == "+":
        return left + right
    if expr.op == "-":
        return left - right
    if expr.op == "*":
        return left * right
    if right == 0:
        raise RewardEvalError(f"Division by zero in '{render(expr)}'")
    return left / right


def used_features(expr: RewardExpr) -> Set[int]:
    if isinstance(expr, FeatureRef):
        return {expr.index}
    if isinstance(expr, (BinOp, BoolOp)):
        return used_features(expr.left) | used_features(expr.right)
    if isinstance(expr, (Not, Neg)):
        return used_features(expr.operand)
    if isinstance(expr, IfCall):
        return used_features(expr.argument)
    return set()


def bonus_set(expr: RewardExpr, indices: Iterable[int]) -> Set[Tuple[int, ...]]:
    """Assignments of the given indices (ascending order) paid strictly above the minimum at state 1"""
    ordered = sorted(set(indices))
    if len(ordered) > MAX_BONUS_INDICES:
        raise TooManyIndicesError(f"bonus_set enumerates at most {MAX_BONUS_INDICES} indices, got {len(ordered)}")

    values = {}
    for bits in itertools.product((0, 1), repeat=len(ordered)):
        features = [0] * N_FEATURES
        for index, bit in zip(ordered, bits):
            features[index] = bit
        values[bits] = evaluate(expr, 1, features)
    lowest = min(values.values())
    return {bits for bits, value in values.items() if value > lowest + _EPS}


def reward_table(expr: RewardExpr, features: np.ndarray) -> np.ndarray:
    """Rewards for every arm at state 0 and state 1, shape (N, 2)"""
    table = np.empty((features.shape[0], 2))
    for arm, row in enumerate(features.tolist()):
        for state in (0, 1):
            value = evaluate(expr, state, row)
            if not math.isfinite(value):
                raise RewardEvalError(f"Non-finite reward {value} for arm {arm} in state {state}")
            table[arm, state] = value
    return table
