import numpy as np
import pytest

from fatebands.simulate import ScenarioConfig, default_spec, simulate_scenario

ACCEPTANCE_LINES: list[str] = []

#: Seed shared by the 1000-replicate coverage scenarios.
COVERAGE_SEED = 20240601


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    def record(criterion: str, ok: bool, detail: str):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        return ok

    return record


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def spec():
    return default_spec()


@pytest.fixture(scope="session")
def scenario_cache():
    """Memoized 1000-replicate scenario runs shared across test modules."""
    cache = {}

    def get(design="fixed", family="gauss", n=500, types=("I", "II", "III", "IV"),
            replicates=1000, seed=COVERAGE_SEED):
        key = (design, family, n, tuple(types), replicates, seed)
        if key not in cache:
            s = default_spec(error_family=family)
            cfg = ScenarioConfig(design=design, n=n, master_seed=seed,
                                 replicates=replicates, band_types=tuple(types))
            cache[key] = simulate_scenario(s, cfg)
        return cache[key]

    return get
