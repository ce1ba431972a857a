import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, model_validator

from com.mhire.dlm.common.errors import ConfigError
from com.mhire.dlm.services.bandit_services.rmab_core.rmab_core_schema import PopulationConfig
from com.mhire.dlm.services.dlm_services.dlm_loop.dlm_loop_schema import LoopConfig
from com.mhire.dlm.services.eval_services.eval_suite.eval_suite_schema import EvalProtocol

load_dotenv()

logger = logging.getLogger(__name__)

APP_VERSION = "1.0.0"


class Config:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Config, cls).__new__(cls)
            cls._instance._initialize()
        return cls._instance

    @classmethod
    def reset(cls):
        """Drop the cached instance so the environment is read again"""
        cls._instance = None

    def _initialize(self):
        self.llm_base_url = os.getenv("DLM_LLM_BASE_URL", "https://api.openai.com/v1")
        self.llm_model = os.getenv("DLM_LLM_MODEL", "gpt-3.5-turbo")
        self.llm_api_key_env = os.getenv("DLM_LLM_API_KEY_ENV", "OPENAI_API_KEY")
        self.llm_timeout = float(os.getenv("DLM_LLM_TIMEOUT", "30"))
        self.llm_max_retries = int(os.getenv("DLM_LLM_MAX_RETRIES", "3"))
        self.llm_max_concurrency = int(os.getenv("DLM_LLM_MAX_CONCURRENCY", "4"))
        self.log_level = os.getenv("DLM_LOG_LEVEL", "INFO").upper()
        self.workers = int(os.getenv("DLM_WORKERS", "1"))

        logger.debug(f"Config initialized - Model: {self.llm_model}, base URL: {self.llm_base_url}")
        if os.getenv(self.llm_api_key_env):
            logger.debug(f"LLM credential found in ${self.llm_api_key_env}")
        else:
            logger.warning(f"LLM credential variable ${self.llm_api_key_env} is not set; only scripted runs will work")


class RunSettings(BaseModel):
    """Every tunable of a command; echoed into the manifest"""

    n_arms: int = Field(48, ge=1)
    budget: int = Field(5, ge=1)
    discount: float = Field(0.9, ge=0.0, lt=1.0)
    population: PopulationConfig = Field(default_factory=PopulationConfig)
    loop: LoopConfig = Field(default_factory=LoopConfig)
    protocol: EvalProtocol = Field(default_factory=EvalProtocol)
    workers: int = Field(1, ge=1)

    @model_validator(mode="after")
    def check_budget(self) -> "RunSettings":
        if self.budget > self.n_arms:
            raise ValueError(f"budget {self.budget} exceeds n_arms {self.n_arms}")
        return self


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        elif isinstance(value, dict):
            merged[key] = _deep_merge({}, value)
        else:
            merged[key] = value
    return merged


def _read_config_file(config_path: Path) -> Any:
    try:
        return json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read config file {config_path}: {e}") from e


def _is_manifest(raw: Any) -> bool:
    return isinstance(raw, dict) and "command" in raw and isinstance(raw.get("config"), dict)


def load_settings(config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunSettings:
    """Flags override the config file, which overrides built-in defaults; None flags are ignored"""
    data: Dict[str, Any] = {}
    if config_path is not None:
        raw = _read_config_file(config_path)
        # a previous run's manifest carries its settings under "config"
        data = raw.get("config", raw) if isinstance(raw, dict) else {}
        data = data.get("settings", data)
        logger.info(f"Loaded settings from {config_path}")
    try:
        return RunSettings.model_validate(_deep_merge(data, overrides or {}))
    except ValidationError as e:
        raise ConfigError(f"Invalid settings: {e}") from e


def load_manifest_options(config_path: Optional[Path]) -> Dict[str, Dict[str, Any]]:
    """Recorded command options of a manifest, keyed by command name; empty for a plain settings file"""
    if config_path is None:
        return {}
    raw = _read_config_file(config_path)
    if not _is_manifest(raw):
        return {}
    options = raw["config"].get("options") or {}
    if not isinstance(options, dict):
        raise ConfigError(f"Manifest {config_path} has malformed options")
    logger.info(f"Replaying '{raw['command']}' options from manifest {config_path}")
    return {raw["command"]: {key: value for key, value in options.items() if value is not None}}
