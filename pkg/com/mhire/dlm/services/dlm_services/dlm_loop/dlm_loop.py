import logging
from typing import Dict, List, Optional, Tuple

from com.mhire.dlm.common.errors import (
    CandidateFailure, LlmBackendError, NoCandidateError, ReflectionParseError, ResponseFormatError,
    RewardParseError, TrainingError
)
from com.mhire.dlm.common.seeding import ANALYSIS_STREAM, CANDIDATE_STREAM, derive_seed, make_rng
from com.mhire.dlm.services.bandit_services.outcome_analysis.outcome_analysis import analyze
from com.mhire.dlm.services.bandit_services.outcome_analysis.outcome_analysis_schema import OutcomeReport
from com.mhire.dlm.services.bandit_services.policy_train.policy_train import train
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import RmabInstance
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop_schema import (
    CandidateRecord, IterationRecord, LoopConfig, LoopTrace, SelectionMethod, SlotStatus
)
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import TaskSpec
from com.mhire.dlm.services.llm_services.llm_gateway.llm_gateway import (
    LlmGateway, build_generation_prompt, build_reflection_prompt, parse_generation_response,
    parse_reflection_response
)
from com.mhire.dlm.services.llm_services.llm_utils.dictionary_utils.prompt_dictionary import PromptPurpose
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import render
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import RewardExpr

logger = logging.getLogger(__name__)

Trained = Dict[int, Tuple[RewardExpr, OutcomeReport]]


class DlmLoop:
    """Generate, train, analyze and reflect for one task on one instance.

    Each iteration asks for K candidate rewards with the previous winners as context,
    trains a policy per parseable candidate, renders its state-feature distribution and
    lets the LLM pick the winner from those distributions. The winner's canonical text is
    appended to the context of the next iteration.
    """

    def __init__(
        self, task: TaskSpec, instance: RmabInstance, gateway: LlmGateway, config: Optional[LoopConfig] = None,
        reflection: bool = True
    ):
        self.task = task
        self.instance = instance
        self.gateway = gateway
        self.config = config or LoopConfig()
        self.reflection = reflection

    def run(self) -> Tuple[RewardExpr, LoopTrace]:
        trace = LoopTrace(task_index=self.task.index, task_label=self.task.label, reflection=self.reflection)
        prior_best: List[str] = []
        final: Optional[RewardExpr] = None

        for iteration in range(self.config.iterations):
            record, winner = self._iterate(iteration, prior_best)
            trace.iterations.append(record)
            if winner is None:
                logger.warning(f"Iteration {iteration}: every candidate failed, iteration skipped")
                continue
            final = winner
            prior_best.append(record.selected_reward)

        if final is None:
            raise NoCandidateError(
                f"No candidate reward survived any of {self.config.iterations} iterations for task {self.task.index}"
            )
        trace.final_reward = render(final)
        logger.info(f"Task {self.task.index}: selected reward '{trace.final_reward}' after {trace.llm_calls} LLM calls")
        return final, trace

    def _iterate(self, iteration: int, prior_best: List[str]) -> Tuple[IterationRecord, Optional[RewardExpr]]:
        k = self.config.candidates_per_iter
        record = IterationRecord(iteration=iteration, prior_best=list(prior_best))
        prompt = build_generation_prompt(self.task, prior_best)
        slots = [self._slot_label(iteration, i) for i in range(k)]

        responses = self.gateway.complete_many([prompt] * k, PromptPurpose.GENERATION, slots=slots)
        record.generation_calls = k

        parsed: Dict[int, RewardExpr] = {}
        for slot, text in enumerate(responses):
            candidate = CandidateRecord(slot=slot)
            record.candidates.append(candidate)
            expr = self._parse_with_retries(candidate, text, prompt, record, slots[slot])
            if expr is not None:
                parsed[slot] = expr

        trained = self._train_candidates(iteration, parsed, record)
        if not trained:
            record.skipped = True
            return record, None

        chosen = self._select(trained, record, iteration)
        for candidate in record.candidates:
            if candidate.slot == chosen:
                candidate.status = SlotStatus.SELECTED
            elif candidate.slot in trained:
                candidate.status = SlotStatus.TRAINED_NOT_SELECTED
        winner = trained[chosen][0]
        record.selected_index = chosen
        record.selected_reward = render(winner)
        logger.info(f"Iteration {iteration}: candidate {chosen} selected by {record.selection_method.value}")
        return record, winner

    def _parse_with_retries(
        self, candidate: CandidateRecord, text: str, prompt: str, record: IterationRecord, slot_label: str
    ) -> Optional[RewardExpr]:
        expr = self._try_parse(candidate, text)
        retries = 0
        while expr is None and retries < self.config.retry_budget:
            retries += 1
            record.retry_calls += 1
            logger.debug(f"{slot_label}: re-querying after parse failure ({retries}/{self.config.retry_budget})")
            try:
                text = self.gateway.complete(prompt, PromptPurpose.GENERATION)
            except LlmBackendError as e:
                raise e.with_slot(slot_label) from e
            expr = self._try_parse(candidate, text)

        if expr is None:
            candidate.status = SlotStatus.FAILED
            candidate.failure_reason = f"parse: {candidate.parse_errors[-1]}"
            logger.warning(f"{slot_label}: no parseable reward after {retries} retries")
        return expr

    @staticmethod
    def _try_parse(candidate: CandidateRecord, text: str) -> Optional[RewardExpr]:
        candidate.responses.append(text)
        try:
            expr = parse_generation_response(text)
        except (ResponseFormatError, RewardParseError) as e:
            candidate.parse_errors.append(str(e))
            return None
        candidate.canonical = render(expr)
        candidate.source = text
        return expr

    def _train_candidates(self, iteration: int, parsed: Dict[int, RewardExpr], record: IterationRecord) -> Trained:
        trained: Trained = {}
        for slot, expr in parsed.items():
            candidate = record.candidates[slot]
            seed = derive_seed(self.config.seed, CANDIDATE_STREAM, iteration, slot)
            candidate.training_seed = seed
            try:
                policy = train(self.instance, expr, self.config.train, seed)
            except CandidateFailure as e:
                self._fail(candidate, f"train: {e.reason}")
                continue
            except TrainingError as e:
                self._fail(candidate, f"train: {e}")
                continue
            report = analyze(policy, self.instance, make_rng(seed, ANALYSIS_STREAM), self.config.analysis)
            candidate.policy = policy.summary(self.instance.budget)
            candidate.outcome = report
            trained[slot] = (expr, report)
        return trained

    @staticmethod
    def _fail(candidate: CandidateRecord, reason: str):
        candidate.status = SlotStatus.FAILED
        candidate.failure_reason = reason
        logger.warning(f"Candidate slot {candidate.slot} failed: {reason}")

    def _select(self, trained: Trained, record: IterationRecord, iteration: int) -> int:
        order = sorted(trained)
        if len(order) == 1 or not self.reflection:
            record.selection_method = SelectionMethod.SINGLE_CANDIDATE
            return order[0]

        prompt = build_reflection_prompt(self.task, [(trained[s][0], trained[s][1].rendered) for s in order])
        try:
            text = self.gateway.complete(prompt, PromptPurpose.REFLECTION)
        except LlmBackendError as e:
            raise e.with_slot(f"iteration {iteration} reflection") from e
        record.reflection_calls = 1
        record.reflection_response = text
        try:
            position = parse_reflection_response(text, len(order))
        except ReflectionParseError as e:
            record.selection_method = SelectionMethod.FALLBACK
            record.fallback_reason = str(e)
            logger.warning(f"Iteration {iteration}: reflection unusable ({e}); using target-group fallback")
            return self._fallback(trained, order)
        record.selection_method = SelectionMethod.REFLECTION
        return order[position]

    def _fallback(self, trained: Trained, order: List[int]) -> int:
        """Slot whose distribution gives the task's target groups the largest combined share"""
        def target_share(slot: int) -> float:
            report = trained[slot][1]
            return sum(report.group_percentage(f) for f in self.task.base_features)

        best = order[0]
        for slot in order[1:]:
            if target_share(slot) > target_share(best):
                best = slot
        return best

    @staticmethod
    def _slot_label(iteration: int, slot: int) -> str:
        return f"iteration {iteration} candidate {slot}"


def run(
    task: TaskSpec, instance: RmabInstance, gateway: LlmGateway, config: Optional[LoopConfig] = None
) -> Tuple[RewardExpr, LoopTrace]:
    return DlmLoop(task, instance, gateway, config).run()


def run_no_reflection(
    task: TaskSpec, instance: RmabInstance, gateway: LlmGateway, config: Optional[LoopConfig] = None
) -> Tuple[RewardExpr, LoopTrace]:
    """One generation query, no reflection round"""
    config = (config or LoopConfig()).model_copy(update={"iterations": 1, "candidates_per_iter": 1})
    return DlmLoop(task, instance, gateway, config, reflection=False).run()
