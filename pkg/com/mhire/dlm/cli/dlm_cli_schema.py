from typing import Any, Dict, Optional

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Everything needed to repeat a command; written next to its artifacts"""

    run_id: str
    command: str
    version: str
    started_at: str
    finished_at: Optional[str] = None
    # {"settings": RunSettings dump, "options": command flags}
    config: Dict[str, Any]
    seeds: Dict[str, Any] = Field(default_factory=dict)
    backend: Optional[Dict[str, Any]] = None
    # artifact name -> path relative to the manifest
    artifacts: Dict[str, str] = Field(default_factory=dict)
    exit_code: int = 0
