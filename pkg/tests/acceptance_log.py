"""Collects one verdict line per acceptance criterion for the terminal summary."""
import functools
import time

RESULTS: list[str] = []


def criterion(number: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS.append(f"AC{number:<2} FAIL  {title}: {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
                print(RESULTS[-1])
                raise
            RESULTS.append(f"AC{number:<2} PASS  {title}: {detail} [{time.perf_counter() - t0:.1f}s]")
            print(RESULTS[-1])

        return run

    return wrap
