import pytest

from polatherm import presets


@pytest.fixture(scope="session")
def melppp():
    return presets.melppp_system()


@pytest.fixture(scope="session")
def setup():
    return presets.melppp_setup()


@pytest.fixture(scope="session")
def net():
    return presets.melppp_net()


_ACCEPTANCE = pytest.StashKey()


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(cid: str, ok: bool, detail: str):
        line = f"{cid:>4}  {'PASS' if ok else 'FAIL'}  {detail}"
        lines[cid] = line
        print(line)
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(lines, key=lambda c: int(c[1:])):
            terminalreporter.write_line(lines[cid])
