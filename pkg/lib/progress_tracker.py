import sys
import time
from contextlib import contextmanager

from tqdm import tqdm


class ProgressTracker:
    """Status lines and check timing for CLI commands, printed to stderr"""

    def __init__(self, quiet=False, stream=None):
        self.quiet = quiet
        self.stream = stream or sys.stderr
        self.current_operation = None
        self.start_time = None
        self.timings = {}

    def _print(self, message):
        if not self.quiet:
            print(message, file=self.stream)

    @property
    def bars_enabled(self):
        return not self.quiet and self.stream.isatty()

    @contextmanager
    def track_operation(self, description):
        """Context manager printing start and completion of one command"""
        self.current_operation = description
        self.start_time = time.time()
        self._print(f"🚀 Starting {description}...")
        try:
            yield lambda msg: self._print(f"  - {msg}")
        except Exception:
            elapsed = time.time() - self.start_time
            self._print(f"❌ Failed {description} ({elapsed:.1f}s)")
            raise
        elapsed = time.time() - self.start_time
        self._print(f"✅ Completed {description} ({elapsed:.1f}s)")

    @contextmanager
    def track_check(self, check_id):
        """Time one group of checks; the elapsed seconds land in self.timings"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[check_id] = round(time.perf_counter() - start, 4)

    def progress(self, iterable, description, total=None):
        """tqdm over a long loop, silent when quiet or not on a terminal"""
        return tqdm(iterable, desc=description, total=total, file=self.stream,
                    disable=not self.bars_enabled, leave=False)

    def summary(self, counts):
        failed = counts.get('fail', 0)
        skipped = counts.get('skipped', 0)
        marker = "❌" if failed else "✅"
        line = f"{marker} {counts.get('pass', 0)} passed, {failed} failed"
        if skipped:
            line += f", ⏭️ {skipped} skipped"
        self._print(line)
