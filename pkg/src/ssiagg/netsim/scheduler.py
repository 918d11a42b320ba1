"""Cooperative scheduler for logically parallel protocol tasks.

Tasks are generators that yield at each protocol step. The deterministic
mode advances one randomly chosen ready task per tick using a seeded RNG, so
interleavings vary with the seed but replay exactly. The threaded mode runs
each task to completion on its own thread and is not reproducible.
"""

from __future__ import annotations

import random
from collections.abc import Generator, Mapping
from concurrent.futures import ThreadPoolExecutor
from typing import Any

Task = Generator[Any, None, Any]


class Scheduler:
    def __init__(self, seed: int = 0, threaded: bool = False) -> None:
        self.seed = seed
        self.threaded = threaded
        self._rng = random.Random(seed)
        self.ticks = 0

    def run(self, tasks: Mapping[str, Task]) -> dict[str, Any]:
        """Drive every task to completion and return each one's return value."""
        if self.threaded:
            return self._run_threaded(tasks)
        results: dict[str, Any] = {}
        ready = list(tasks.items())
        while ready:
            index = self._rng.randrange(len(ready))
            name, task = ready[index]
            self.ticks += 1
            try:
                next(task)
            except StopIteration as stop:
                results[name] = stop.value
                ready.pop(index)
            except BaseException:
                for _, other in ready:
                    other.close()
                raise
        return {name: results[name] for name in tasks}

    @staticmethod
    def _drain(task: Task) -> Any:
        while True:
            try:
                next(task)
            except StopIteration as stop:
                return stop.value

    def _run_threaded(self, tasks: Mapping[str, Task]) -> dict[str, Any]:
        with ThreadPoolExecutor(max_workers=max(1, len(tasks))) as pool:
            futures = {name: pool.submit(self._drain, task) for name, task in tasks.items()}
            return {name: future.result() for name, future in futures.items()}
