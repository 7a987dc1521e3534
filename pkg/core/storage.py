"""
GRANULA - Storage

  - Atomic file output (temp file + rename).
  - Newline-delimited JSON results log: one record per line, appended
    under a lock, read back with key de-duplication so an interrupted
    sweep can resume.
"""

import json
import logging
import os
import tempfile
import threading
from typing import Any, Callable, Dict, Hashable, List

logger = logging.getLogger("granula.core.storage")


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def dump_json(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_json(path: str, data: Any) -> None:
    atomic_write_text(path, dump_json(data))


def read_json(path: str) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


class ResultsLog:
    """Append-only NDJSON log keyed by a record-derived identity."""

    def __init__(self, path: str, key: Callable[[Dict[str, Any]], Hashable]):
        self.path = path
        self.key = key
        self._lock = threading.Lock()

    def load(self) -> List[Dict[str, Any]]:
        """Records in file order; a later record with the same key replaces an earlier one."""
        if not os.path.exists(self.path):
            return []
        records: Dict[Hashable, Dict[str, Any]] = {}
        with open(self.path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as e:
                    # a torn final line from an interrupted append
                    logger.warning(f"[ResultsLog] Skipping unreadable line {line_no} in {self.path}: {e}")
                    continue
                records[self.key(obj)] = obj
        return list(records.values())

    def append(self, record: Dict[str, Any]) -> None:
        line = json.dumps(record, sort_keys=True) + "\n"
        with self._lock:
            directory = os.path.dirname(os.path.abspath(self.path))
            os.makedirs(directory, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
                f.flush()
                os.fsync(f.fileno())
