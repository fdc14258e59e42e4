"""Exception types shared across the package."""

from __future__ import annotations


class SentinelError(Exception):
    """Base class for every error raised by erc_sentinel."""


class ParseError(SentinelError):
    """A rule file, mock script, or extraction response could not be parsed."""

    def __init__(self, line: int | None, reason: str):
        self.line = line
        self.reason = reason
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{reason}")


class ValidationError(SentinelError):
    def __init__(self, rule_id: str | None, reason: str):
        self.rule_id = rule_id
        self.reason = reason
        super().__init__(f"{rule_id}: {reason}" if rule_id else reason)


class SoliditySyntaxError(SentinelError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class BudgetExceeded(SentinelError):
    """A prompt is larger than the configured input budget. Nothing is sent."""

    def __init__(self, token_estimate: int, budget: int):
        self.token_estimate = token_estimate
        self.budget = budget
        super().__init__(f"prompt needs ~{token_estimate} tokens, budget is {budget}")


class ExtractionParseError(SentinelError):
    pass


class TransportError(SentinelError):
    pass


class AuthError(SentinelError):
    pass


class RulesetMismatch(SentinelError):
    pass


class NotApproved(SentinelError):
    """Audits refuse rule sets that still carry unreviewed or invalid rules."""
