"""Microbenchmarks: thread vs process creation, emulated vs kernel PV.

Only orderings are meaningful across machines; absolute microseconds are
reported with a machine tag and compared against the reference table by
ratio, never asserted.
"""

from __future__ import annotations

import enum
import multiprocessing
import os
import platform
import statistics
import threading
import time
from dataclasses import dataclass

from threadport import sysv
from threadport.errors import Unsupported
from threadport.sem_sim import SemSet

# microseconds, measured on a 2 GHz Pentium 4
REFERENCE_US = {
    "create_thread": 52,
    "create_process": 1700,
    "pv_thread": 66,
    "pv_process": 200,
}

MIN_CREATE_ITERATIONS = 100
MIN_PV_ITERATIONS = 10_000
PV_BLOCK = 100


class CreateKind(enum.Enum):
    THREAD = "thread"
    PROCESS = "process"


class PvKind(enum.Enum):
    EMULATED = "emulated"
    OS_PROCESS = "os_process"


@dataclass(frozen=True)
class BenchResult:
    name: str
    iterations: int
    mean_us: float
    p95_us: float
    machine: str

    def record(self) -> str:
        return (
            f"bench={self.name} iterations={self.iterations} mean_us={self.mean_us:.2f} "
            f"p95_us={self.p95_us:.2f} machine={self.machine}"
        )


def machine_tag() -> str:
    return f"{platform.machine()}/{os.cpu_count()}cpu/py{platform.python_version()}".replace(" ", "_")


def _summarize(name: str, samples_us: list[float], iterations: int) -> BenchResult:
    p95 = statistics.quantiles(samples_us, n=20)[-1] if len(samples_us) >= 2 else samples_us[0]
    return BenchResult(name, iterations, statistics.fmean(samples_us), p95, machine_tag())


def _noop():
    pass


def bench_create(kind: CreateKind, n: int = 200) -> BenchResult:
    """Mean cost of creating a thread (or process) and waiting for it to end."""
    if n < MIN_CREATE_ITERATIONS:
        raise ValueError(f"need at least {MIN_CREATE_ITERATIONS} iterations, got {n}")
    if kind is CreateKind.THREAD:
        start = lambda: threading.Thread(target=_noop)  # noqa: E731
    else:
        if "fork" not in multiprocessing.get_all_start_methods():
            raise Unsupported("this platform cannot fork processes")
        ctx = multiprocessing.get_context("fork")
        start = lambda: ctx.Process(target=_noop)  # noqa: E731
    samples = []
    for _ in range(n):
        t0 = time.perf_counter_ns()
        unit = start()
        unit.start()
        unit.join()
        samples.append((time.perf_counter_ns() - t0) / 1000)
    return _summarize(f"create_{kind.value}", samples, n)


def bench_pv(kind: PvKind, n: int = MIN_PV_ITERATIONS) -> BenchResult:
    """Mean cost of one uncontended P+V pair."""
    if n < MIN_PV_ITERATIONS:
        raise ValueError(f"need at least {MIN_PV_ITERATIONS} iterations, got {n}")
    if kind is PvKind.EMULATED:
        sem = SemSet(0, 0, 1, initial=1)
        p, v, close = sem.p, sem.v, (lambda: None)
        final = lambda: sem.get_val(0)  # noqa: E731
    else:
        try:
            ksem = sysv.KernelSemaphore(1)
        except OSError as e:
            raise Unsupported(f"kernel semaphores unavailable: {e}") from e
        p, v, close, final = ksem.p, ksem.v, ksem.close, ksem.value
    samples = []
    blocks = max(1, n // PV_BLOCK)
    try:
        for _ in range(blocks):
            t0 = time.perf_counter_ns()
            for _ in range(PV_BLOCK):
                p()
                v()
            samples.append((time.perf_counter_ns() - t0) / 1000 / PV_BLOCK)
        if final() != 1:
            raise AssertionError(f"PV loop left the semaphore at {final()}")
    finally:
        close()
    return _summarize(f"pv_{kind.value}", samples, blocks * PV_BLOCK)


def reference_ratio(fast: str, slow: str) -> float:
    return REFERENCE_US[slow] / REFERENCE_US[fast]
