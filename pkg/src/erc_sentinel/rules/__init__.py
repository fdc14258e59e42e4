"""ERC rule taxonomy, rule files, and review-gate validation."""

from importlib import resources

from .io import load_ruleset, parse_ruleset, ruleset_to_dict, save_ruleset
from .model import (
    APPayload,
    CPPayload,
    DeclPayload,
    EPPayload,
    ErcRule,
    ErcRuleSet,
    EventSpec,
    FunctionSpec,
    Param,
    RPPayload,
)
from .validate import ValidationIssue, approve_all, structural_issues, validate_ruleset

BUNDLED_ERCS = ("erc20", "erc721", "erc1155", "erc3525")


def bundled_rule_text(erc: str) -> str:
    """Raw text of a bundled, curated rule file (``"erc20"``, ``"erc721"``, ...)."""
    name = erc.lower().replace("-", "")
    return resources.files("erc_sentinel").joinpath(f"data/rules/{name}.yaml").read_text("utf-8")


def load_bundled(erc: str) -> ErcRuleSet:
    return load_ruleset(bundled_rule_text(erc))


__all__ = [
    "APPayload", "BUNDLED_ERCS", "CPPayload", "DeclPayload", "EPPayload", "ErcRule", "ErcRuleSet",
    "EventSpec", "FunctionSpec", "Param", "RPPayload", "ValidationIssue", "approve_all",
    "bundled_rule_text", "load_bundled", "load_ruleset", "parse_ruleset", "ruleset_to_dict",
    "save_ruleset", "structural_issues", "validate_ruleset",
]
