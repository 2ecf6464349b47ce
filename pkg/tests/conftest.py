import time

import numpy as np
import pytest

from pwabound import alloc, bench, chain

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: long-running benchmark reproduction")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "criterion", None)
    if crit is not None:
        _CRITERIA.setdefault(crit, []).append((report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA):
        results = _CRITERIA[crit]
        failed = [name for name, outcome in results if outcome != "passed"]
        status = "PASS" if not failed else "FAIL"
        line = f"criterion {crit}: {status} ({len(results) - len(failed)}/{len(results)} checks)"
        if failed:
            line += " failing: " + ", ".join(failed)
        terminalreporter.write_line(line)


class TowerRun:
    """Staircases, P2 allocation, fitted graph and grid errors for the tower benchmark."""

    def __init__(self):
        f, box = bench.tower()
        self.graph = chain.decompose(f, box, inflate=bench.TOWER_INFLATE)
        t0 = time.perf_counter()
        self.staircases = alloc.graph_staircases(
            self.graph, bench.TOWER_TAU_RANGE, 500, "method1", bench.TOWER_BUDGET
        )
        self.staircase_seconds = time.perf_counter() - t0
        t0 = time.perf_counter()
        self.result = alloc.solve_p2(self.graph, self.staircases, bench.TOWER_BUDGET)
        self.solve_seconds = time.perf_counter() - t0
        self.fitted = chain.fit_tolerances(self.graph, self.result.taus)
        x = np.linspace(-5.0, 5.0, 201)
        self.grid = dict(zip(("x1", "x2"), np.meshgrid(x, x, indexing="ij")))
        exact, approx = chain.eval_composed(self.fitted, self.grid)
        self.empirical = float(np.max(np.abs(approx - exact)))
        counts = alloc.uniform_counts(self.graph, bench.TOWER_BUDGET)
        self.uniform = chain.fit_uniform(self.graph, counts)
        exact, approx = chain.eval_composed(self.uniform, self.grid)
        self.uniform_empirical = float(np.max(np.abs(approx - exact)))


@pytest.fixture(scope="session")
def tower_run():
    return TowerRun()
