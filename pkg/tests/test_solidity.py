import json
import random

import pytest
from hypothesis import given, settings, strategies as st

from erc_sentinel.errors import SoliditySyntaxError
from erc_sentinel.solidity import (
    direct_callees, linearization, match_erc_surface, parse_contract, related_code,
    select_contract, slice_public_function,
)
from erc_sentinel.solidity.slicing import REASONS
from erc_sentinel.solidity.surface import getter_function

from contract_gen import bfs_closure, random_program


def _fn(model, name, owner=None):
    found = model.find_functions(name, owner)
    assert len(found) == 1, found
    return found[0]


# -- parser ----------------------------------------------------------------------------

def test_bypass_headers(bypass_src):
    model = parse_contract(bypass_src)
    assert [(c.name, c.header_span[0]) for c in model.contracts] == [("TokenBase", 1), ("SimpleToken", 18)]
    assert model.contract("SimpleToken").parents == ("TokenBase",)


def test_empty_contract():
    model = parse_contract("contract A {}")
    assert [c.name for c in model.contracts] == ["A"]
    assert model.functions == () and model.fields == ()


def test_hand_counted_fixture():
    src = """pragma solidity ^0.8.0;
contract Counter {
    uint256 public count;
    address private owner;
    event Bumped(uint256 by);
    constructor() { owner = msg.sender; }
    function bump(uint256 by) external { count += by; emit Bumped(by); }
    function reset() public { require(msg.sender == owner); count = 0; }
}
"""
    model = parse_contract(src)
    assert len(model.functions) == 3  # constructor, bump, reset
    assert [f.name for f in model.fields] == ["count", "owner"]
    assert [e.name for e in model.events] == ["Bumped"]
    bump = _fn(model, "bump")
    assert bump.visibility == "external" and bump.arity == 1
    assert ("Bumped", 7) in bump.emits


def test_unbalanced_source_raises():
    with pytest.raises(SoliditySyntaxError):
        parse_contract("contract A { function f() public {")


def test_c3_linearization():
    src = """
contract O {}
contract A is O {}
contract B is O {}
contract C is A, B {}
"""
    model = parse_contract(src)
    assert linearization(model, "C") == ["C", "B", "A", "O"]


def test_modifier_is_a_callee():
    src = """
contract A {
    address owner;
    modifier onlyOwner() { require(msg.sender == owner); _; }
    function f() public onlyOwner { }
}
"""
    model = parse_contract(src)
    assert {g.name for g in direct_callees(model, _fn(model, "f"))} == {"onlyOwner"}
    _, fields = related_code(model, _fn(model, "f"))
    assert {fd.name for fd in fields} == {"owner"}


def test_overload_resolution_by_arity():
    src = """
contract A {
    function g(uint a) internal {}
    function g(uint a, uint b) internal {}
    function f() public { g(1, 2); }
}
"""
    model = parse_contract(src)
    (callee,) = direct_callees(model, _fn(model, "f"))
    assert callee.arity == 2


def test_context_binds_virtual_call_to_override():
    src = """
contract Base {
    function hook() internal virtual {}
    function run() public { hook(); }
}
contract Child is Base {
    function hook() internal override {}
}
"""
    model = parse_contract(src)
    run = _fn(model, "run")
    assert {g.owner for g in direct_callees(model, run)} == {"Base"}
    assert {g.owner for g in direct_callees(model, run, "Child")} == {"Child"}


# -- call graph --------------------------------------------------------------------------

def test_bypass_callees_and_fields(bypass_src):
    model = parse_contract(bypass_src)
    tf = _fn(model, "transferFrom")
    assert {g.name for g in direct_callees(model, tf)} == {"_transfer"}
    callees, fields = related_code(model, tf)
    assert {g.name for g in callees} == {"_transfer"}
    names = {fd.name for fd in fields}
    assert "_balances" in names and "_allowances" not in names


def test_leaf_and_isolated():
    model = parse_contract("""
contract A {
    uint256 x;
    function leaf() public view returns (uint256) { return x; }
    function pure_() public pure returns (uint256) { return 7; }
}
""")
    assert direct_callees(model, _fn(model, "leaf")) == set()
    assert related_code(model, _fn(model, "pure_")) == (set(), set())


def test_chain():
    model = parse_contract("""
contract A {
    function a() public { b(); }
    function b() internal { c(); }
    function c() internal { }
}
""")
    a = _fn(model, "a")
    assert {g.name for g in direct_callees(model, a)} == {"b"}
    assert {g.name for g in related_code(model, a)[0]} == {"b", "c"}


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_closure_matches_bfs_oracle(seed):
    src, adj, used = random_program(random.Random(seed))
    model = parse_contract(src)
    for i in adj:
        fn = _fn(model, f"f{i}")
        callees, fields = related_code(model, fn, "Token")
        expected = bfs_closure(adj, i)
        assert {g.name for g in callees} == {f"f{j}" for j in expected}
        touched = set(used[i]).union(*(used[j] for j in expected)) if expected else set(used[i])
        assert {fd.name for fd in fields} == touched


# -- slicing -----------------------------------------------------------------------------

BYPASS_SLICE = (1, 2, 8, 9, 10, 11, 12, 13, 14, 15, 17, 18, 42, 43, 44, 45, 46, 47, 48, 49, 50, 51, 52, 53, 54, 65)


def test_bypass_slice(bypass_src):
    model = parse_contract(bypass_src)
    s = slice_public_function(model, _fn(model, "transferFrom"))
    assert len(s) == 26
    assert s.lines == BYPASS_SLICE
    assert s.reasons[1] == s.reasons[18] == "contract-header"
    assert s.reasons[2] == "field"
    assert s.reasons[10] == "callee"
    assert s.reasons[47] == "anchor-fn"
    assert s.reasons[42] == s.reasons[51] == s.reasons[8] == "comment"
    assert s.reasons[17] == s.reasons[65] == "closing-brace"
    assert 3 not in s.lines
    assert s.dump().splitlines()[0] == "// slice: SimpleToken.transferFrom (26 lines)"


def test_minimal_slice():
    model = parse_contract("contract A {\n    function f() public {\n        return;\n    }\n}\n")
    s = slice_public_function(model, _fn(model, "f"))
    assert s.lines == (1, 2, 3, 4, 5)
    assert s.reasons == {1: "contract-header", 2: "anchor-fn", 3: "anchor-fn", 4: "anchor-fn", 5: "closing-brace"}


def test_slice_comments():
    src = """contract A {
    /// @notice does f
    function f() public {
        g();
    }
    function g() internal {
        // inline note
        uint256 y = 1;
    }
}
"""
    model = parse_contract(src)
    s = slice_public_function(model, _fn(model, "f"))
    assert s.lines == tuple(range(1, 11))
    assert s.reasons[2] == "comment" and s.reasons[7] == "comment"


def test_internal_function_rejected(bypass_src):
    model = parse_contract(bypass_src)
    with pytest.raises(ValueError, match="not a public function"):
        slice_public_function(model, _fn(model, "_transfer"))


def test_slice_json(bypass_src):
    model = parse_contract(bypass_src)
    data = json.loads(slice_public_function(model, _fn(model, "transferFrom")).to_json())
    assert data["function"] == "transferFrom"
    assert [e["line"] for e in data["lines"]] == list(BYPASS_SLICE)
    assert all(e["reason"] in REASONS for e in data["lines"])


def test_getter_slice(bypass_src):
    model = parse_contract(bypass_src)
    (fd,) = [f for f in model.fields if f.name == "name"]
    s = slice_public_function(model, getter_function(fd))
    assert s.lines == (18, 19, 65)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_slice_invariants(seed):
    src, adj, _ = random_program(random.Random(seed))
    model = parse_contract(src)
    for fn in model.functions:
        if fn.visibility not in ("public", "external"):
            continue
        s = slice_public_function(model, fn, "Token")
        # one reason per line, lines sorted and unique, anchor fully present
        assert list(s.lines) == sorted(set(s.lines)) and set(s.reasons) == set(s.lines)
        assert set(range(fn.span[0], fn.span[1] + 1)) <= set(s.lines)
        # the rendered text is the source lines verbatim
        assert s.rendered.split("\n") == [model.source_lines[n - 1] for n in s.lines]
        # every callee's slice is contained in the caller's slice
        for callee in related_code(model, fn, "Token")[0]:
            if callee.visibility in ("public", "external"):
                inner = slice_public_function(model, callee, "Token")
                assert set(inner.lines) - {n for n in inner.lines if inner.reasons[n] == "contract-header"
                                           or inner.reasons[n] == "closing-brace"} <= set(s.lines)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rendered_slice_reparses(seed):
    src, _, _ = random_program(random.Random(seed))
    model = parse_contract(src)
    for fn in model.functions:
        if fn.visibility in ("public", "external"):
            again = parse_contract(slice_public_function(model, fn, "Token").rendered)
            assert fn.name in {f.name for f in again.functions}


# -- ERC surface --------------------------------------------------------------------------

def test_auto_getter_binding(erc20):
    model = parse_contract("contract T {\n    uint256 public totalSupply;\n}\n")
    bound = dict((spec.name, fn) for spec, fn in match_erc_surface(model, erc20, "T"))
    assert bound["totalSupply"].getter_of == "totalSupply"
    assert bound["allowance"] is None


def test_most_derived_override(erc20):
    model = parse_contract("""
contract Base {
    function transfer(address to, uint256 v) public virtual returns (bool) { return true; }
}
contract Derived is Base {
    function transfer(address to, uint256 v) public override returns (bool) { return false; }
}
""")
    bound = dict((spec.name, fn) for spec, fn in match_erc_surface(model, erc20, "Derived"))
    assert bound["transfer"].owner == "Derived"


def test_select_contract_skips_interfaces(erc20, bypass_src):
    assert select_contract(parse_contract(bypass_src), erc20) == "SimpleToken"
    model = parse_contract("""
interface IERC20 { function transfer(address to, uint256 v) external returns (bool); }
contract Other { function ping() public {} }
""")
    # with no candidate binding anything, the last concrete contract is audited
    assert select_contract(model, erc20) == "Other"
    assert select_contract(parse_contract("interface I {}\nlibrary L {}\n"), erc20) is None
