"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

from contextlib import contextmanager
import time

RESULTS: dict[int, str] = {}


@contextmanager
def criterion(number: int, title: str):
    start = time.perf_counter()
    info: dict = {}
    try:
        yield info
    except BaseException:
        RESULTS[number] = _line(number, "FAIL", title, start, info)
        raise
    RESULTS[number] = _line(number, "PASS", title, start, info)


def _line(number, status, title, start, info):
    extra = " ".join(f"{k}={v}" for k, v in info.items())
    took = time.perf_counter() - start
    return f"criterion {number:>2} {status}  {title}  ({took:.1f}s){'  ' + extra if extra else ''}"
