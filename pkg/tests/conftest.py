import numpy as np
import pytest

from wgmaxwell.mesh import build_mesh

# criterion number -> list of (check name, passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


def record(criterion: int, check: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in checks)
        failed = [f"{name} ({detail})" for name, p, detail in checks if not p]
        line = f"criterion {crit}: {'PASS' if ok else 'FAIL'}"
        if failed:
            line += " -- failing: " + "; ".join(failed)
        tr.write_line(line)


@pytest.fixture(scope="session")
def mesh1():
    return build_mesh(1)


@pytest.fixture(scope="session")
def mesh2():
    return build_mesh(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)
