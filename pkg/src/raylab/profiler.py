"""Per-pass wall-time and invocation-count profiling."""

import json
import time
from contextlib import contextmanager
from dataclasses import dataclass


@dataclass
class PassRecord:
    pass_name: str
    wall_time: float
    invocation_count: int = 0

    def as_dict(self):
        return {"pass": self.pass_name, "wall_time": self.wall_time,
                "invocations": self.invocation_count}


class _Timer:
    def __init__(self):
        self.invocations = 0


class Profiler:
    """Collects one record per named pass, in execution order."""

    def __init__(self):
        self.records: list[PassRecord] = []

    @contextmanager
    def measure(self, name: str):
        timer = _Timer()
        t0 = time.perf_counter()
        try:
            yield timer
        finally:
            self.records.append(PassRecord(name, time.perf_counter() - t0,
                                           timer.invocations))

    def report(self) -> list[PassRecord]:
        return list(self.records)

    def to_json_lines(self) -> str:
        return "\n".join(json.dumps(r.as_dict()) for r in self.records)
