from pathlib import Path

import pytest

from erc_sentinel.llm import LlmConfig, mock_gateway
from erc_sentinel.rules import load_bundled

FIXTURES = Path(__file__).parent / "fixtures"
MOCKS = FIXTURES / "mocks"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


def mock_text(name: str) -> str:
    return (MOCKS / name).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def erc20():
    return load_bundled("erc20")


@pytest.fixture
def bypass_src():
    return fixture_text("allowance_bypass.sol")


@pytest.fixture
def complete_src():
    return fixture_text("erc20_complete.sol")


def gateway_for(script: str, **cfg):
    return mock_gateway(mock_text(script) if script.endswith(".yaml") else script, LlmConfig(**cfg))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per criterion; printed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> None:
        lines.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(lines[-1])

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
