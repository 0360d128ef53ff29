import datetime
import json
import os
import threading
import time

import psutil

from logger_config import logger


def resource_snapshot():
    """Process RSS (MB) and CPU percentage since the previous call."""
    process = psutil.Process()
    return {
        "rss_mb": process.memory_info().rss / 1024 / 1024,
        "cpu_pct": process.cpu_percent(interval=None),
    }


class RunTimer:
    def __enter__(self):
        self.start = time.perf_counter()
        self.elapsed = 0.0
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        return False


class RunReporter:
    """
    Collects per-run summaries for one output directory. report.log is
    append-only and shared by every worker thread, so writes go through a lock.
    """

    def __init__(self, out_dir):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.report_path = os.path.join(out_dir, "report.log")
        self._lock = threading.Lock()
        self.summaries = []

    def _append(self, msg):
        with self._lock:
            with open(self.report_path, "a") as f:
                f.write(f"{datetime.datetime.now()} - {msg}\n")

    def log_run(self, label, seed, summary):
        """Records one finished chain: wall time, acceptance, resources."""
        resources = resource_snapshot()
        summary = {**summary, "label": label, "seed": seed, **resources}
        msg = (
            f"RUN {label} seed={seed} | steps: {summary.get('steps')} | "
            f"acceptance: {summary.get('acceptance_rate', 0.0):.4f} | "
            f"wall: {summary.get('wall_time', 0.0):.2f}s | "
            f"RAM: {resources['rss_mb']:.1f}MB | CPU: {resources['cpu_pct']:.1f}%"
        )
        logger.info(msg)
        self._append(msg)
        with self._lock:
            self.summaries.append(summary)
        return summary

    def log_event(self, msg):
        logger.info(msg)
        self._append(msg)

    def write_json(self, name, payload):
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        logger.info(f"Wrote {path}")
        return path

    def write_summary(self, name="summary.json"):
        ordered = sorted(self.summaries, key=lambda s: (s["label"], s["seed"]))
        return self.write_json(name, ordered)
