import numpy as np
import pytest

from catenoid_ac import domain, profile

R_CRIT = 2.1717


@pytest.fixture(scope="session")
def constants():
    return profile.compute_constants()


@pytest.fixture(scope="session")
def ball():
    return domain.make_ball(R_CRIT)


@pytest.fixture(scope="session")
def ball_placement(ball):
    return domain.critical_placement(ball)


@pytest.fixture(scope="session")
def ellipsoid_placement():
    return domain.critical_placement(domain.make_ellipsoid(2.0, 1.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Print and record one PASS/FAIL line for an acceptance criterion."""

    def emit(number, title, checks: dict, detail: str = ""):
        ok = all(bool(v) for v in checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"AC{number} {'PASS' if ok else 'FAIL'} {title}"
        if detail:
            line += f" | {detail}"
        if failed:
            line += f" | failed: {', '.join(failed)}"
        print(line)
        request.config.stash[_VERDICTS].append(line)
        return ok, failed

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][2:])):
            terminalreporter.write_line(line)
