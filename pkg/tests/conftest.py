import time

import pytest

from gluelab.fields_and_transforms import xi_box

# acceptance lines collected by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE: dict = {}


def record(num: int, title: str, passed: bool, detail: str, seconds: float | None = None):
    t = "" if seconds is None else f" [{seconds:.1f} s]"
    ACCEPTANCE[num] = f"criterion {num:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}{t}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])


class Timed:
    """Session cache of expensive objects, remembering how long each took to build."""

    def __init__(self):
        self.values, self.seconds = {}, {}

    def get(self, key, build):
        if key not in self.values:
            t0 = time.perf_counter()
            self.values[key] = build()
            self.seconds[key] = time.perf_counter() - t0
        return self.values[key]


@pytest.fixture(scope="session")
def cache():
    return Timed()


@pytest.fixture(scope="session")
def swirl_bg(cache):
    """Unstable default background: swirl, amplitude 300, side 4, 32^3 (about a minute)."""
    from gluelab.inner_space import compute_background
    return cache.get("swirl", lambda: compute_background("swirl", 300.0, xi_box(32, 4.0))[0])


@pytest.fixture(scope="session")
def glue_run(cache, swirl_bg):
    from gluelab import gluing_engine as ge

    def build():
        cfg = ge.make_config(swirl_bg, 2.0 ** -6, 1e-3)
        st, eng = ge.solve(cfg)
        return st, eng
    return cache.get("glue", build)
