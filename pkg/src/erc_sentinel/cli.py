"""Command-line entry point: ``erc-sentinel <command> ...``.

LLM settings resolve as flags, then environment variables, then a YAML
config file (``--config`` or ``ERC_SENTINEL_CONFIG``). The API key is read
only from the environment variable named by ``api_key_env``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import __version__
from .audit import AuditConfig, audit_contract
from .errors import AuthError, NotApproved, ParseError, SentinelError, ValidationError
from .ingest import ErcDocument, ExtractionLog, build_ruleset
from .llm import DEFAULT_KEY_ENV, Gateway, LlmConfig, RetryPolicy, live_gateway, mock_gateway
from .report import render_report
from .rules import BUNDLED_ERCS, bundled_rule_text, load_ruleset, parse_ruleset, save_ruleset, validate_ruleset
from .rules.validate import approve_all
from .solidity import linearization, parse_contract, slice_public_function
from .solidity.surface import getter_function

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2

_CONFIG_KEYS = {"endpoint", "model", "temperature", "max_in_flight", "input_budget", "api_key_env",
                "retry_attempts", "retry_backoff", "timeout", "ledger"}
_ENV = {
    "endpoint": "ERC_SENTINEL_ENDPOINT",
    "model": "ERC_SENTINEL_MODEL",
    "input_budget": "ERC_SENTINEL_BUDGET",
    "max_in_flight": "ERC_SENTINEL_MAX_IN_FLIGHT",
    "ledger": "ERC_SENTINEL_LEDGER",
}
_INTS = {"max_in_flight", "input_budget", "retry_attempts"}
_FLOATS = {"temperature", "retry_backoff", "timeout"}


class CliError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    llm: LlmConfig
    mock: str | None = None
    ledger: str | None = None


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from None


def _config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = yaml.safe_load(_read(path)) or {}
    except yaml.YAMLError as exc:
        raise CliError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise CliError(f"{path}: config must be a mapping")
    if "api_key" in data:
        raise CliError(f"{path}: API keys are not accepted in config files; set {DEFAULT_KEY_ENV}")
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise CliError(f"{path}: unknown config key(s): {', '.join(sorted(unknown))}")
    return data


def resolve_config(args: argparse.Namespace, environ=os.environ) -> CliConfig:
    """Merge flags > environment > config file into one settings object."""
    merged = _config_file(getattr(args, "config", None) or environ.get("ERC_SENTINEL_CONFIG"))
    for key, var in _ENV.items():
        if environ.get(var):
            merged[key] = environ[var]
    for key in ("endpoint", "model", "input_budget", "max_in_flight", "ledger"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    try:
        for key in _INTS & merged.keys():
            merged[key] = int(merged[key])
        for key in _FLOATS & merged.keys():
            merged[key] = float(merged[key])
        retry = RetryPolicy(merged.pop("retry_attempts", 3), merged.pop("retry_backoff", 1.0))
        ledger = merged.pop("ledger", None)
        llm = LlmConfig(retry=retry, **merged)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad configuration: {exc}") from None
    return CliConfig(llm, getattr(args, "mock", None), ledger)


def make_gateway(cfg: CliConfig) -> Gateway:
    """Exactly one backend: the mock script when given, otherwise the live adapter."""
    if cfg.mock:
        try:
            return mock_gateway(_read(cfg.mock), cfg.llm, cfg.ledger)
        except ParseError as exc:
            raise CliError(f"{cfg.mock}: {exc}") from None
    if not cfg.llm.endpoint:
        raise CliError("no LLM endpoint configured (use --endpoint, ERC_SENTINEL_ENDPOINT, a config file, or --mock)")
    return live_gateway(cfg.llm, cfg.ledger)


def _load_rules(spec: str):
    if not Path(spec).exists() and spec.lower().replace("-", "") in BUNDLED_ERCS:
        return load_ruleset(bundled_rule_text(spec))
    return load_ruleset(_read(spec))


# -- commands ------------------------------------------------------------------------


def cmd_extract_rules(args) -> int:
    out = Path(args.output)
    if out.exists() and not args.force:
        raise CliError(f"{out} exists; pass --force to overwrite")
    doc = ErcDocument.from_text(_read(args.document), args.erc)
    gateway = make_gateway(resolve_config(args))
    log = ExtractionLog()
    ruleset = build_ruleset(doc, gateway, log)
    out.write_text(save_ruleset(ruleset), encoding="utf-8")
    log_path = Path(args.log) if args.log else out.with_name(out.name + ".log")
    log_path.write_text(log.render(), encoding="utf-8")
    for w in log.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {len(ruleset.rules)} draft rules to {out} (log: {log_path}); review, then run validate")
    return EXIT_OK


def cmd_validate(args) -> int:
    text = _read(args.rules)
    try:
        ruleset = parse_ruleset(text)
    except ParseError as exc:
        print(f"{args.rules}: {exc}")
        return EXIT_FINDINGS
    if args.approve_all:
        if not args.yes:
            raise CliError("--approve-all rewrites every review field; confirm with --yes")
        ruleset = approve_all(ruleset)
        Path(args.rules).write_text(save_ruleset(ruleset), encoding="utf-8")
        print(f"marked {len(ruleset.rules)} rules approved in {args.rules}")
    issues = validate_ruleset(ruleset)
    for issue in issues:
        print(f"{issue.rule_id}: {issue.reason}")
    if issues:
        print(f"{len(issues)} issue(s)")
        return EXIT_FINDINGS
    print(f"{ruleset.erc_id}: {len(ruleset.rules)} rules, no issues")
    return EXIT_OK


def cmd_slice(args) -> int:
    model = parse_contract(_read(args.contract))
    scope = [args.in_contract] if args.in_contract else [c.name for c in reversed(model.contracts)]
    if args.in_contract and model.contract(args.in_contract) is None:
        raise CliError(f"no contract named {args.in_contract}")
    target = None
    for c in scope:
        for k in linearization(model, c):
            found = [f for f in model.functions_of(k) if f.name == args.function and f.has_body]
            if not found:
                found = [getter_function(fd) for fd in model.fields_of(k)
                         if fd.name == args.function and fd.visibility == "public"]
            if found:
                target = (found[0], c)
                break
        if target:
            break
    if target is None:
        raise CliError(f"no function named {args.function}")
    fn, context = target
    if fn.visibility not in ("public", "external"):
        raise CliError(f"{fn.qualname} is not a public function")
    code_slice = slice_public_function(model, fn, context)
    print(code_slice.to_json() if args.json else code_slice.dump())
    return EXIT_OK


def cmd_audit(args) -> int:
    try:
        rules = _load_rules(args.rules)
    except (ParseError, ValidationError) as exc:
        raise CliError(f"{args.rules}: {exc}") from None
    source = _read(args.contract)
    gateway = make_gateway(resolve_config(args))
    config = AuditConfig(contract=args.in_contract, budget=gateway.config.input_budget)
    report = audit_contract(source, rules, gateway, config, path=args.contract)
    text = render_report(report, args.format)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_FINDINGS if report.findings else EXIT_OK


# -- parser --------------------------------------------------------------------------


def _llm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mock", metavar="SCRIPT", help="answer prompts from a mock script; no network access")
    p.add_argument("--config", metavar="FILE", help="YAML config file")
    p.add_argument("--endpoint", help="chat-completion URL")
    p.add_argument("--model")
    p.add_argument("--budget", dest="input_budget", type=int, metavar="TOKENS", help="input token budget per prompt")
    p.add_argument("--max-in-flight", dest="max_in_flight", type=int, metavar="N")
    p.add_argument("--ledger", metavar="FILE", help="append one JSON line per LLM request")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="erc-sentinel", description="Audit Solidity contracts against ERC rules.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-rules", help="draft a rule file from an ERC document")
    p.add_argument("document")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--force", action="store_true", help="overwrite an existing output file")
    p.add_argument("--erc", help="ERC id when the document does not state it (e.g. ERC20)")
    p.add_argument("--log", help="extraction log path (default: <output>.log)")
    _llm_flags(p)
    p.set_defaults(func=cmd_extract_rules)

    p = sub.add_parser("validate", help="check a rule file and optionally approve it")
    p.add_argument("rules")
    p.add_argument("--approve-all", action="store_true")
    p.add_argument("--yes", action="store_true", help="confirm --approve-all")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("slice", help="print the code slice of one public function")
    p.add_argument("contract")
    p.add_argument("function")
    p.add_argument("--contract", dest="in_contract", metavar="NAME", help="contract to resolve the function in")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_slice)

    p = sub.add_parser("audit", help="audit a contract against an approved rule file")
    p.add_argument("contract")
    p.add_argument("--rules", required=True, help="rule file, or a bundled set name such as erc20")
    p.add_argument("--contract", dest="in_contract", metavar="NAME", help="contract to audit (default: auto)")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", metavar="FILE")
    _llm_flags(p)
    p.set_defaults(func=cmd_audit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NotApproved as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CliError, SentinelError, AuthError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
