import json
import shutil

import pytest
import yaml

from erc_sentinel.cli import main, resolve_config, build_parser
from erc_sentinel.rules import bundled_rule_text

from conftest import FIXTURES, MOCKS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def pending_rules(tmp_path):
    path = tmp_path / "draft.yaml"
    path.write_text(bundled_rule_text("erc20").replace("review: approved", "review: pending", 3))
    return path


def test_validate_bundled(capsys, tmp_path):
    path = tmp_path / "erc20.yaml"
    path.write_text(bundled_rule_text("erc20"))
    code, out, _ = run(capsys, "validate", path)
    assert code == 0 and "35 rules" in out


def test_validate_pending_then_approve(capsys, pending_rules):
    code, out, _ = run(capsys, "validate", pending_rules)
    assert code == 1 and out.count("pending human review") == 3
    code, _, err = run(capsys, "validate", pending_rules, "--approve-all")
    assert code == 2 and "--yes" in err
    code, _, _ = run(capsys, "validate", pending_rules, "--approve-all", "--yes")
    assert code == 0
    assert run(capsys, "validate", pending_rules)[0] == 0


def test_validate_structural_problem(capsys, tmp_path):
    path = tmp_path / "dup.yaml"
    text = bundled_rule_text("erc20").replace("id: erc20.transfer.emit\n", "id: erc20.transfer.decl\n")
    path.write_text(text)
    code, out, _ = run(capsys, "validate", path)
    assert code == 1 and "duplicate id" in out


def test_unreadable_path(capsys, tmp_path):
    assert run(capsys, "validate", tmp_path / "missing.yaml")[0] == 2
    assert run(capsys, "extract-rules", tmp_path / "missing.md", "-o", tmp_path / "o.yaml",
               "--mock", MOCKS / "extract_erc20.yaml")[0] == 2


def test_extract_rules(capsys, tmp_path):
    out = tmp_path / "draft.yaml"
    args = ("extract-rules", FIXTURES / "erc20.md", "-o", out, "--mock", MOCKS / "extract_erc20.yaml")
    code, stdout, _ = run(capsys, *args)
    assert code == 0 and "draft rules" in stdout
    first = out.read_text()
    assert (tmp_path / "draft.yaml.log").exists()
    # refuses to overwrite, and leaves the file alone
    out.write_text("keep me")
    code, _, err = run(capsys, *args)
    assert code == 2 and "--force" in err and out.read_text() == "keep me"
    assert run(capsys, *args, "--force")[0] == 0
    assert out.read_text() == first
    # drafts are pending until reviewed
    assert run(capsys, "validate", out)[0] == 1


def test_slice_dump_and_json(capsys):
    code, out, _ = run(capsys, "slice", FIXTURES / "allowance_bypass.sol", "transferFrom")
    assert code == 0 and out.splitlines()[0] == "// slice: SimpleToken.transferFrom (26 lines)"
    code, out, _ = run(capsys, "slice", FIXTURES / "allowance_bypass.sol", "transferFrom", "--json")
    data = json.loads(out)
    assert len(data["lines"]) == 26 and {"line", "reason"} == set(data["lines"][0])


def test_slice_internal_function(capsys):
    code, _, err = run(capsys, "slice", FIXTURES / "allowance_bypass.sol", "_transfer")
    assert code == 2 and "not a public function" in err


def test_slice_unknown(capsys):
    assert run(capsys, "slice", FIXTURES / "allowance_bypass.sol", "mint")[0] == 2


def test_audit_compliant(capsys):
    code, out, _ = run(capsys, "audit", FIXTURES / "erc20_complete.sol", "--rules", "erc20",
                       "--mock", MOCKS / "all_compliant.yaml")
    assert code == 0 and "Findings: 0" in out


def test_audit_allowance_bypass_json(capsys, tmp_path):
    report = tmp_path / "r.json"
    code, _, _ = run(capsys, "audit", FIXTURES / "allowance_bypass.sol", "--rules", "erc20",
                     "--mock", MOCKS / "allowance_bypass.yaml", "--format", "json", "--out", report)
    assert code == 1
    data = json.loads(report.read_text())
    assert data["summary"] == {"high": 1, "medium": 0, "low": 0}


def test_audit_pending_rules(capsys, pending_rules):
    code, _, err = run(capsys, "audit", FIXTURES / "allowance_bypass.sol", "--rules", pending_rules,
                       "--mock", MOCKS / "allowance_bypass.yaml")
    assert code == 2 and "pending human review" in err


def test_audit_without_endpoint(capsys, monkeypatch):
    monkeypatch.delenv("ERC_SENTINEL_ENDPOINT", raising=False)
    monkeypatch.delenv("ERC_SENTINEL_CONFIG", raising=False)
    code, _, err = run(capsys, "audit", FIXTURES / "allowance_bypass.sol", "--rules", "erc20")
    assert code == 2 and "no LLM endpoint" in err


def test_audit_live_without_key(capsys, monkeypatch):
    monkeypatch.delenv("ERC_SENTINEL_API_KEY", raising=False)
    code, _, err = run(capsys, "audit", FIXTURES / "allowance_bypass.sol", "--rules", "erc20",
                       "--endpoint", "https://llm.invalid/v1/chat/completions")
    assert code == 2 and "ERC_SENTINEL_API_KEY" in err


def test_audit_budget_flag(capsys):
    code, out, _ = run(capsys, "audit", FIXTURES / "allowance_bypass.sol", "--rules", "erc20",
                       "--mock", MOCKS / "allowance_bypass.yaml", "--budget", "50")
    assert code == 0 and "BudgetExceeded" in out and "Prompts: 0" in out


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"endpoint": "https://file", "model": "file-model", "input_budget": 100}))
    args = build_parser().parse_args(["audit", "x.sol", "--rules", "erc20", "--config", str(cfg), "--model", "flag"])
    env = {"ERC_SENTINEL_MODEL": "env-model", "ERC_SENTINEL_BUDGET": "200"}
    resolved = resolve_config(args, env).llm
    assert (resolved.endpoint, resolved.model, resolved.input_budget) == ("https://file", "flag", 200)


def test_config_file_may_not_hold_keys(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("api_key: sk-123\n")
    code, _, err = run(capsys, "audit", FIXTURES / "allowance_bypass.sol", "--rules", "erc20", "--config", cfg)
    assert code == 2 and "not accepted" in err


def test_no_api_key_flag():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["audit", "x.sol", "--rules", "erc20", "--api-key", "k"])


def test_console_script_installed():
    assert shutil.which("erc-sentinel")
