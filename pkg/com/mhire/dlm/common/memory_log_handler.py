import json
import logging
from collections import deque
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional


class MemoryLogHandler(logging.Handler):
    """Bounded in-memory log store, optionally tagging records with the active run id"""

    def __init__(self, max_logs: int = 2000):
        super().__init__()
        self.max_logs = max_logs
        self.logs = deque(maxlen=max_logs)
        self.run_id: Optional[str] = None

    def bind_run(self, run_id: Optional[str]):
        self.run_id = run_id

    def emit(self, record):
        try:
            self.logs.append({
                "timestamp": datetime.fromtimestamp(record.created).isoformat(),
                "level": record.levelname,
                "logger": record.name,
                "function": record.funcName,
                "line": record.lineno,
                "run_id": self.run_id,
                "message": self.format(record)
            })
        except Exception:
            self.handleError(record)

    def get_logs(self, limit: int = 100, run_id: Optional[str] = None) -> List[Dict]:
        logs = [log for log in self.logs if run_id is None or log["run_id"] == run_id]
        return logs[-limit:] if limit < len(logs) else logs

    def get_logs_by_level(self, level: str, limit: int = 100) -> List[Dict]:
        filtered = [log for log in self.logs if log["level"] == level.upper()]
        return filtered[-limit:] if limit < len(filtered) else filtered

    def clear_logs(self):
        self.logs.clear()

    def get_memory_usage_info(self) -> Dict:
        return {
            "current_logs": len(self.logs),
            "max_logs": self.max_logs,
            "memory_usage_percent": (len(self.logs) / self.max_logs) * 100
        }

    def write_json(self, path: Path, run_id: Optional[str] = None) -> Path:
        """Dump captured records (all, or one run's) as a JSON array"""
        path = Path(path)
        path.write_text(json.dumps(self.get_logs(self.max_logs, run_id=run_id), indent=2))
        return path


LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'


def install_memory_logging(level: str = "INFO", max_logs: int = 2000, console: bool = True) -> MemoryLogHandler:
    """Reset the root logger to a console handler plus a fresh memory handler"""
    handler = MemoryLogHandler(max_logs=max_logs)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root_logger = logging.getLogger()
    root_logger.setLevel(level.upper())
    root_logger.handlers.clear()
    if console:
        stream = logging.StreamHandler()
        stream.setFormatter(logging.Formatter(LOG_FORMAT))
        root_logger.addHandler(stream)
    root_logger.addHandler(handler)
    return handler
