import json
import logging
import os
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, List, Optional, Sequence, Tuple

from openai import APIConnectionError, APIStatusError, OpenAI, OpenAIError
from openai.types.chat import ChatCompletion
from pydantic import BaseModel, ValidationError

from com.mhire.dlm.common.errors import (
    ConfigError, LlmBackendError, LlmDecodeError, ReflectionParseError, ResponseFormatError,
    SensitiveFeatureError, TranscriptExhaustedError
)
from com.mhire.dlm.services.bandit_services.bandit_utils.dictionary_utils.feature_dictionary import (
    SENSITIVE_INDICES, get_feature_catalog_lines
)
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import TaskSpec
from com.mhire.dlm.services.llm_services.llm_gateway.llm_gateway_schema import (
    BackendKind, ChatMessage, LlmBackend
)
from com.mhire.dlm.services.llm_services.llm_utils.dictionary_utils.prompt_dictionary import (
    ANSWER_PHRASE, CATALOG_HEADER, EXEMPLAR, GENERATION_CLOSING, GENERATION_OBJECTIVE, PRIORS_HEADER,
    REFLECTION_BODY_HEADER, REFLECTION_CANDIDATE, REFLECTION_CLOSING, REFLECTION_PREAMBLE, SYNTAX_RULES,
    PromptPurpose, get_temperature, task_sentence
)
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl import parse, render, used_features
from com.mhire.dlm.services.reward_services.reward_dsl.reward_dsl_schema import RewardExpr

logger = logging.getLogger(__name__)

_CODE_RE = re.compile(r"\$\$\$(.*?)\$\$\$", re.DOTALL)
_ANSWER_RE = re.compile(re.escape(ANSWER_PHRASE) + r"\s*\[?\s*(-?\d+)")


class LlmGateway:
    """Runtime side of an LlmBackend: transcript cursor, call counter and recorded prompts"""

    def __init__(self, backend: LlmBackend):
        self.backend = backend
        self.calls = 0
        self.recorded_prompts: List[Tuple[PromptPurpose, str]] = []
        self._cursor = 0
        self._lock = threading.Lock()
        self._client: Optional[OpenAI] = None
        logger.info(f"LLM gateway ready: {backend.descriptor()}")

    @property
    def remaining(self) -> Optional[int]:
        if self.backend.kind != BackendKind.SCRIPTED:
            return None
        return len(self.backend.transcript) - self._cursor

    def complete(self, prompt: str, purpose: PromptPurpose = PromptPurpose.GENERATION) -> str:
        with self._lock:
            self.calls += 1
            self.recorded_prompts.append((purpose, prompt))
            if self.backend.kind == BackendKind.SCRIPTED:
                return self._next_scripted()
        return self._chat(prompt, purpose)

    def complete_many(
        self, prompts: Sequence[str], purpose: PromptPurpose = PromptPurpose.GENERATION,
        slots: Optional[Sequence[str]] = None
    ) -> List[str]:
        """Answers in prompt order; http requests overlap up to the concurrency cap"""
        slots = list(slots) if slots is not None else [f"slot {i}" for i in range(len(prompts))]
        if self.backend.kind == BackendKind.SCRIPTED or len(prompts) <= 1:
            answers = []
            for prompt, slot in zip(prompts, slots):
                try:
                    answers.append(self.complete(prompt, purpose))
                except LlmBackendError as e:
                    raise e.with_slot(slot) from e
            return answers

        workers = min(self.backend.max_concurrency, len(prompts))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self.complete, prompt, purpose) for prompt in prompts]
            answers = []
            for future, slot in zip(futures, slots):
                try:
                    answers.append(future.result())
                except LlmBackendError as e:
                    raise e.with_slot(slot) from e
        return answers

    def _next_scripted(self) -> str:
        transcript = self.backend.transcript
        if self._cursor >= len(transcript):
            raise TranscriptExhaustedError(
                f"Scripted transcript exhausted after {len(transcript)} responses (request #{self.calls})"
            )
        answer = transcript[self._cursor]
        self._cursor += 1
        logger.debug(f"Scripted response #{self._cursor}: '{answer[:80]}'")
        return answer

    def _openai_client(self) -> OpenAI:
        with self._lock:
            if self._client is None:
                backend = self.backend
                try:
                    self._client = OpenAI(
                        api_key=os.getenv(backend.api_key_env, ""),
                        base_url=backend.base_url,
                        timeout=backend.timeout,
                        max_retries=backend.max_retries,
                    )
                except OpenAIError as e:
                    raise LlmBackendError(f"Cannot create OpenAI client for {backend.base_url}: {e}") from e
            return self._client

    def _chat(self, prompt: str, purpose: PromptPurpose) -> str:
        backend = self.backend
        message = ChatMessage(role="user", content=prompt)
        logger.debug(f"Chat request #{self.calls} ({purpose.value}) to {backend.model}")
        try:
            completion = self._openai_client().chat.completions.create(
                model=backend.model,
                messages=[message.model_dump()],
                temperature=get_temperature(purpose),
            )
        except APIStatusError as e:
            logger.error(f"LLM request to {backend.base_url} rejected with HTTP {e.status_code}")
            raise LlmBackendError(f"HTTP {e.status_code} from {backend.base_url}: {e.message}") from e
        except APIConnectionError as e:
            attempts = backend.max_retries + 1
            logger.error(f"LLM request to {backend.base_url} failed after {attempts} attempts: {e}")
            raise LlmBackendError(f"Request to {backend.base_url} failed after {attempts} attempts: {e}") from e
        except (OpenAIError, ValueError) as e:
            logger.error(f"LLM request to {backend.base_url} failed: {type(e).__name__}: {e}")
            raise LlmBackendError(f"LLM request failed: {type(e).__name__}: {e}") from e
        return decode_completion(completion)


def _raw_body(completion: Any) -> str:
    if isinstance(completion, BaseModel):
        return completion.model_dump_json()
    return repr(completion)


def decode_completion(completion: ChatCompletion) -> str:
    """First choice's message content of a chat completion"""
    try:
        content = completion.choices[0].message.content
    except (AttributeError, IndexError, TypeError) as e:
        raise LlmDecodeError(f"Unexpected chat completion ({type(e).__name__})", raw_body=_raw_body(completion)) from e
    if not isinstance(content, str):
        raise LlmDecodeError("Chat completion message content is not a string", raw_body=_raw_body(completion))
    return content


def complete(gateway: LlmGateway, prompt: str, purpose: PromptPurpose = PromptPurpose.GENERATION) -> str:
    return gateway.complete(prompt, purpose)


def load_transcript(path: Path) -> List[str]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read scripted transcript {path}: {e}") from e
    if not isinstance(data, list) or not all(isinstance(item, str) for item in data):
        raise ConfigError(f"Scripted transcript {path} must be a JSON array of strings")
    return data


def parse_backend_spec(spec: str, config=None) -> LlmBackend:
    """'scripted:<path>' or 'http'; http settings come from the environment config"""
    if spec.startswith("scripted:"):
        path = spec[len("scripted:"):]
        if not path:
            raise ConfigError("Scripted backend needs a transcript path: scripted:<path>")
        return LlmBackend(kind=BackendKind.SCRIPTED, transcript=load_transcript(Path(path)), transcript_path=path)
    if spec == "http":
        if config is None:
            from com.mhire.dlm.config.config import Config
            config = Config()
        try:
            return LlmBackend(
                kind=BackendKind.HTTP,
                base_url=config.llm_base_url,
                model=config.llm_model,
                api_key_env=config.llm_api_key_env,
                timeout=config.llm_timeout,
                max_retries=config.llm_max_retries,
                max_concurrency=config.llm_max_concurrency,
            )
        except ValidationError as e:
            raise ConfigError(f"Invalid LLM backend settings: {e}") from e
    raise ConfigError(f"Unknown LLM backend '{spec}'; expected 'scripted:<path>' or 'http'")


def build_generation_prompt(task: TaskSpec, prior_best: Sequence[str] = ()) -> str:
    task_text = task_sentence(task.prompt)
    lines = [GENERATION_OBJECTIVE.format(task=task_text), CATALOG_HEADER]
    lines.extend(get_feature_catalog_lines())
    lines += ["", SYNTAX_RULES, "", EXEMPLAR, "", GENERATION_CLOSING.format(task=task_text), PRIORS_HEADER]
    lines.extend(prior_best)
    return "\n".join(lines)


def parse_generation_response(text: str) -> RewardExpr:
    """Reward inside the first $$$ pair; must parse and avoid hidden features"""
    match = _CODE_RE.search(text)
    if match is None:
        raise ResponseFormatError("No $$$-delimited reward function in response")
    source = match.group(1).strip()
    if "\n" in source:
        raise ResponseFormatError("Reward function spans more than one line")
    expr = parse(source)
    hidden = sorted(used_features(expr) & set(SENSITIVE_INDICES))
    if hidden:
        raise SensitiveFeatureError(f"Reward uses hidden feature indices {hidden}")
    return expr


def build_reflection_prompt(task: TaskSpec, candidates: Sequence[Tuple[RewardExpr, str]]) -> str:
    if len(candidates) < 2:
        raise ValueError(f"Reflection needs at least 2 candidates, got {len(candidates)}")
    task_text = task_sentence(task.prompt)
    lines = [REFLECTION_PREAMBLE.format(task=task_text), CATALOG_HEADER]
    lines.extend(get_feature_catalog_lines())
    lines += ["", REFLECTION_BODY_HEADER]
    for index, (expr, distribution) in enumerate(candidates):
        lines += ["", REFLECTION_CANDIDATE.format(index=index, reward=render(expr), distribution=distribution)]
    lines += ["", REFLECTION_CLOSING.format(task=task_text)]
    return "\n".join(lines)


def parse_reflection_response(text: str, k: int) -> int:
    if k < 1:
        raise ValueError(f"Candidate count must be at least 1, got {k}")
    match = _ANSWER_RE.search(text)
    if match is None:
        raise ReflectionParseError(f"Reflection answer lacks '{ANSWER_PHRASE} <index>'")
    index = int(match.group(1))
    if not 0 <= index < k:
        raise ReflectionParseError(f"Reflection chose index {index}, outside [0, {k})")
    return index
