"""Walk through one audit of the token whose transferFrom skips the allowance check, offline.

    python3 demos/allowance_bypass_walkthrough.py

Shows the slice sent for transferFrom, the prompt built for the privilege
rule, and the report produced with the scripted mock.
"""

from pathlib import Path

from erc_sentinel.audit import audit_contract
from erc_sentinel.llm import mock_gateway
from erc_sentinel.prompts import specialize_prompt
from erc_sentinel.report import render_report
from erc_sentinel.rules import load_bundled
from erc_sentinel.solidity import parse_contract, slice_public_function

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"


def main():
    source = (FIXTURES / "allowance_bypass.sol").read_text()
    rules = load_bundled("erc20")

    model = parse_contract(source)
    (fn,) = model.find_functions("transferFrom")
    code = slice_public_function(model, fn)
    print(code.dump())
    print()

    rule = rules.rule("erc20.transferFrom.throw-unauthorized")
    task = specialize_prompt(rule, code)
    print(f"-- prompt for {rule.id} (~{task.token_estimate} tokens) --")
    print(task.messages[1][1])
    print()

    gateway = mock_gateway((FIXTURES / "mocks" / "allowance_bypass.yaml").read_text())
    report = audit_contract(source, rules, gateway, path="allowance_bypass.sol")
    print(render_report(report))


if __name__ == "__main__":
    main()
