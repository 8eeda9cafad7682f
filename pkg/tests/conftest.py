import numpy as np
import pytest

from cuttiming import synth


@pytest.fixture(scope="session")
def season_small():
    return synth.generate_season(3, seed=1)


@pytest.fixture(scope="session")
def cut_play():
    """Attacker 3 jogs from frame 15 and bursts at frame 30."""
    script = synth.ScriptedPlay(90, (synth.cut(3, 30, direction=(1.0, 0.2), lead_in=15),))
    return synth.generate(script)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    from test_acceptance import VERDICTS

    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
