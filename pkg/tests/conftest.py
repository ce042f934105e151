import re
from collections import OrderedDict

import numpy as np
import pytest
from hypothesis import settings

from tunable_ht import HypothesisPair, bernoulli

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bern_pair():
    """Bern(0.5) under H0 against Bern(0.7) under H1, uniform prior."""
    return HypothesisPair(bernoulli(0.5), bernoulli(0.7), (0.5, 0.5))


_CRITERION = re.compile(r"test_acceptance\.py::Test(?:Criterion)?(\d+)\w*::")


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion, aggregated over its tests."""
    verdicts = OrderedDict()
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            if getattr(rep, "when", "call") != "call" and key == "passed":
                continue
            match = _CRITERION.search(rep.nodeid)
            if not match:
                continue
            num = int(match.group(1))
            ok = key == "passed"
            verdicts[num] = verdicts.get(num, True) and ok
    if not verdicts:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(verdicts):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if verdicts[num] else 'FAIL'}")
