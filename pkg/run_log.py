#!/usr/bin/env python3
"""
Run Log
Leveled, timestamped diagnostics on stderr (stdout is reserved for data)
"""

import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, TextIO

LEVELS = {
    'DEBUG': 10,
    'INFO': 20,
    'SUCCESS': 25,
    'WARNING': 30,
    'ERROR': 40,
}

COLORS = {
    'DEBUG': '\033[90m',   # Grey
    'INFO': '\033[94m',    # Blue
    'SUCCESS': '\033[92m', # Green
    'WARNING': '\033[93m', # Yellow
    'ERROR': '\033[91m',   # Red
}
RESET = '\033[0m'


class RunLog:
    def __init__(self, level: str = "WARNING", log_file: Optional[str] = None,
                 stream: Optional[TextIO] = None, color: Optional[bool] = None):
        self.threshold = LEVELS[level]
        self.log_file = Path(log_file) if log_file else None
        self.stream = stream
        self.color = color

    def _target(self) -> TextIO:
        # Resolved per call so pytest's capsys sees the swapped stderr
        return self.stream if self.stream is not None else sys.stderr

    def log(self, message: str, level: str = "INFO"):
        """Log message"""
        if LEVELS.get(level, 20) < self.threshold:
            return

        timestamp = datetime.now().isoformat(timespec="seconds")
        log_entry = f"[{timestamp}] [{level}] {message}"

        target = self._target()
        use_color = self.color if self.color is not None else target.isatty()
        if use_color:
            print(f"{COLORS.get(level, '')}{log_entry}{RESET}", file=target)
        else:
            print(log_entry, file=target)

        if self.log_file:
            with open(self.log_file, 'a') as f:
                f.write(log_entry + "\n")


_run_log = RunLog()


def configure_run_log(level: str = "WARNING", log_file: Optional[str] = None,
                      stream: Optional[TextIO] = None) -> RunLog:
    """Replace the shared run log (the CLI calls this once per invocation)"""
    global _run_log
    if level not in LEVELS:
        raise ValueError(f"Unknown log level '{level}'")
    _run_log = RunLog(level=level, log_file=log_file, stream=stream)
    return _run_log


def log(message: str, level: str = "INFO"):
    _run_log.log(message, level)
