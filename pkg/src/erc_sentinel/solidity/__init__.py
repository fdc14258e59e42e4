"""Solidity front end: contract model, call graph, code slices, ERC surface checks."""

from .callgraph import direct_callees, linearization, ordered_related_code, related_code
from .model import CallSite, ContractDecl, ContractModel, EventDef, FieldDef, FunctionDef, ModelWarning
from .parser import parse_contract
from .slicing import CodeSlice, slice_public_function
from .surface import DeclFinding, check_declarations, match_erc_surface, select_contract

__all__ = [
    "CallSite", "CodeSlice", "ContractDecl", "ContractModel", "DeclFinding", "EventDef", "FieldDef",
    "FunctionDef", "ModelWarning", "check_declarations", "direct_callees", "linearization",
    "match_erc_surface", "ordered_related_code", "parse_contract", "related_code", "select_contract",
    "slice_public_function",
]
