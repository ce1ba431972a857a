from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator


class BackendKind(str, Enum):
    SCRIPTED = "scripted"
    HTTP = "http"


class LlmBackend(BaseModel):
    """Where completions come from; holds no credentials, only the env var naming one"""

    kind: BackendKind
    # scripted
    transcript: List[str] = Field(default_factory=list)
    transcript_path: Optional[str] = None
    # http, passed to the OpenAI client which owns retries and backoff
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = Field(30.0, gt=0)
    max_retries: int = Field(3, ge=0)
    max_concurrency: int = Field(4, ge=1)

    @field_validator("base_url")
    @classmethod
    def check_scheme(cls, value: str) -> str:
        if not value.startswith(("http://", "https://")):
            raise ValueError(f"base_url must start with http:// or https://, got '{value}'")
        return value

    def descriptor(self) -> Dict[str, Any]:
        """Manifest-safe description of the backend"""
        if self.kind == BackendKind.SCRIPTED:
            return {"kind": self.kind.value, "transcript_path": self.transcript_path,
                    "transcript_length": len(self.transcript)}
        return {"kind": self.kind.value, "base_url": self.base_url, "model": self.model,
                "api_key_env": self.api_key_env, "timeout": self.timeout,
                "max_retries": self.max_retries, "max_concurrency": self.max_concurrency}


class ChatMessage(BaseModel):
    role: str
    content: str
