import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from mmpep.core.channel import ChannelSchedule  # noqa: E402
from mmpep.core.engine import NS_PER_MS, NS_PER_S  # noqa: E402
from mmpep.core.simulation import SimParams, Simulation  # noqa: E402


@pytest.fixture
def make_sim():
    def build(mode="none", los=1.0, nlos=1.0, audit=False, trace=False, **kw):
        if los is None:
            sched = ChannelSchedule.always("LOS")
        else:
            sched = ChannelSchedule(int(los * NS_PER_S), int(nlos * NS_PER_S))
        return Simulation(SimParams(mode=mode, schedule=sched, **kw), trace=trace, audit=audit)
    return build


@pytest.fixture
def ms():
    return NS_PER_MS


def pytest_terminal_summary(terminalreporter):
    import verdicts
    if verdicts.LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(verdicts.LINES):
            terminalreporter.write_line(line)
