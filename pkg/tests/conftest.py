import math
import sys

import pytest

from ccrqed.model import PhysicalParams, gph_from_khz_over_pi

# g_ph / pi = 47 kHz expressed in rad/us
G_PH = gph_from_khz_over_pi(47.0)
KAPPA_TCAV = 1.0 / 440.0


@pytest.fixture
def params():
    return PhysicalParams(G_PH)


def carrier_period(g=G_PH):
    return math.pi / g


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
