import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

EXAMPLES = Path(__file__).parent / "data"


@pytest.fixture
def data_dir():
    return EXAMPLES


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", []))
            if "criterion" in props and rep.when == "call":
                lines.append((props["criterion"], outcome, props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, outcome, detail in sorted(lines):
            mark = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"{mark} criterion {num}: {detail}")
