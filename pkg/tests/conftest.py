from pathlib import Path

import pytest
from hypothesis import settings, strategies as st

from babel_ledger.quantities import AssetId, Quantities

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
GOLDEN = Path(__file__).resolve().parent / "golden"

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

# a small asset universe so generated bundles overlap
ASSETS = [AssetId(bytes([p]) * 32, name) for p in (1, 2) for name in (b"", b"x", b"y")]

asset_ids = st.sampled_from(ASSETS)
amounts = st.integers(min_value=-10**6, max_value=10**6)
bundles = st.dictionaries(asset_ids, amounts, max_size=len(ASSETS)).map(Quantities)


# one "CRITERION n PASS|FAIL" line per acceptance criterion, filled by test_acceptance
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def scenario_dir():
    return SCENARIOS
