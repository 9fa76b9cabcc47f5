"""
Run Ledger

Records experiment events as structured JSON lines for later inspection.
One file per day under ``<output_dir>/logs``; rotated by size.

Events tracked:
- Command start and finish (with exit code)
- Completed fits (variant, gamma, k, fold, final metrics)
- Skipped folds and failed sweep cells
- Subsampling applied before similarity-matrix construction

Usage:
    from fairsurv.core.audit import RunLedger

    ledger = RunLedger(log_dir="runs/logs")
    ledger.record("fit_completed", variant="fair", gamma=1.0, k=10, fold=0)
"""
import json
import logging
import threading
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, List, Optional

logger = logging.getLogger(__name__)


class RunLedger:
    """Structured event recorder writing JSON lines to a file.

    Thread-safe. Each entry includes timestamp, event type, severity and
    event-specific details. Disabled ledgers accept records and drop them.
    """

    def __init__(self, log_dir: str = "./runs/logs", max_file_size_mb: int = 50, enabled: bool = True):
        self.log_dir = Path(log_dir)
        self.enabled = enabled
        self.max_file_size = max_file_size_mb * 1024 * 1024
        self._lock = threading.Lock()
        if self.enabled:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            self._rotate_if_needed()

    def _get_log_path(self) -> Path:
        today = datetime.now(timezone.utc).strftime("%Y-%m-%d")
        return self.log_dir / f"ledger-{today}.jsonl"

    def _rotate_if_needed(self) -> None:
        path = self._get_log_path()
        if path.exists() and path.stat().st_size > self.max_file_size:
            ts = datetime.now(timezone.utc).strftime("%H%M%S")
            path.rename(path.with_name(f"{path.stem}-{ts}{path.suffix}"))

    def record(self, event: str, severity: str = "info", **details: Any) -> None:
        """Record a run event.

        Args:
            event: Event type (e.g., "fit_completed", "fold_skipped")
            severity: info, warning, error
            **details: Additional event-specific metadata
        """
        if not self.enabled:
            return
        entry = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "event": event,
            "severity": severity,
            "details": {k: v for k, v in details.items() if v is not None},
        }
        with self._lock:
            try:
                self._rotate_if_needed()
                with open(self._get_log_path(), "a", encoding="utf-8") as f:
                    f.write(json.dumps(entry, default=str) + "\n")
            except OSError as e:
                logger.error(f"Failed to write run ledger: {e}")

    def get_recent(self, limit: int = 100, event_filter: Optional[str] = None) -> List[dict]:
        """Read recent ledger entries, newest first."""
        if not self.enabled:
            return []
        entries: List[dict] = []
        now = datetime.now(timezone.utc)
        for days_back in (1, 0):
            dt = now - timedelta(days=days_back)
            path = self.log_dir / f"ledger-{dt.strftime('%Y-%m-%d')}.jsonl"
            if not path.exists():
                continue
            try:
                lines = path.read_text(encoding="utf-8").splitlines()
            except OSError as e:
                logger.error(f"Failed to read run ledger {path}: {e}")
                continue
            for line in lines:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    logger.warning("Skipping corrupt ledger line in %s", path)
                    continue
                if event_filter and entry.get("event") != event_filter:
                    continue
                entries.append(entry)
        entries.reverse()
        return entries[:limit]
