"""Typing, external-name classification, and intent inference tests."""

import random
import string

import pytest

from segmigrate import analysis
from segmigrate.analysis import (
    IN,
    INOUT,
    OUT,
    RoutineSpec,
    classify_external_names,
    compute_uses,
    declared_types,
    default_implicit_type,
    implicit_rule_table,
    infer_implicit_types,
    infer_intents,
    load_intent_catalog,
    solve_intents,
)
from segmigrate.errors import MigrationError
from segmigrate.frontend.parser import parse_source
from segmigrate.model import build_project_model

from helpers import oracle_intents, random_program


def project(src, file_id="t.f"):
    units = build_project_model(parse_source(src, file_id))
    return parse_source(src, file_id), units


# --- implicit typing --------------------------------------------------------


def test_default_rule_matches_26_letter_oracle():
    # oracle computed directly from the standard's letter ranges
    for letter in string.ascii_lowercase:
        expected = "integer" if "i" <= letter <= "n" else "real"
        assert default_implicit_type(letter) == expected
        assert default_implicit_type(letter.upper() + "var") == expected


def test_implicit_statement_overrides_letters():
    src = (
        "      SUBROUTINE S(X)\n"
        "      IMPLICIT INTEGER(A-C, X), CHARACTER*8(D)\n"
        "      X = 1\n"
        "      END\n"
    )
    units, _ = project(src)
    table = implicit_rule_table(units[0])
    assert table["a"] == table["b"] == table["c"] == "integer"
    assert table["x"] == "integer"
    assert table["d"] == "character(len=8)"
    assert table["e"] == "real"
    assert table["i"] == "integer"


def test_declared_types_pointer_wins_over_integer():
    src = (
        "      SUBROUTINE S(P)\n"
        "      SEGMENT, A\n      INTEGER V(N)\n      END SEGMENT\n"
        "      INTEGER P\n"
        "      POINTEUR P.A\n"
        "      N = 1\n"
        "      SEGINI, P\n"
        "      END\n"
    )
    units, _ = project(src)
    assert declared_types(units[0])["p"] == "type(a), pointer"


def test_every_referenced_symbol_typed_exactly_once():
    src = (
        "      SUBROUTINE S(A, K)\n"
        "      REAL A\n"
        "      DIMENSION B(10)\n"
        "      B(1) = A + K + Z\n"
        "      END\n"
    )
    units, model = project(src)
    out = infer_implicit_types(units[0], model)
    symbols = [a.symbol for a in out]
    assert len(symbols) == len(set(symbols))
    assert set(symbols) == {"a", "k", "b", "z"}
    by_symbol = {a.symbol: a for a in out}
    assert by_symbol["a"].inferred_type == "real"
    assert by_symbol["k"].inferred_type == "integer"
    assert by_symbol["b"].origin == analysis.IMPLICIT_RULE
    assert by_symbol["z"].inferred_type == "real"


def test_variable_also_called_is_an_error():
    src = (
        "      SUBROUTINE S(X)\n"
        "      INTEGER FOO\n"
        "      FOO = 1\n"
        "      CALL FOO(X)\n"
        "      END\n"
    )
    units, model = project(src)
    with pytest.raises(MigrationError) as err:
        infer_implicit_types(units[0], model)
    assert "foo" in str(err.value)


# --- external-name classification -------------------------------------------


def test_classification_of_typed_names():
    src = (
        "      SUBROUTINE S(X)\n"
        "      EXTERNAL HELPER\n"
        "      INTEGER FN\n"
        "      REAL ARR(5)\n"
        "      INTEGER PLAIN\n"
        "      PLAIN = FN(X) + ARR(1)\n"
        "      END\n"
    )
    units, model = project(src)
    out = classify_external_names(units[0], model)
    assert out["helper"] == analysis.EXTERNAL_ROUTINE_DECL
    assert out["fn"] == analysis.RETURN_TYPE_DECL
    assert out["arr"] == analysis.PLAIN_VARIABLE_DECL
    assert out["plain"] == analysis.PLAIN_VARIABLE_DECL


def test_assigned_and_invoked_is_an_error():
    src = (
        "      SUBROUTINE S(X)\n"
        "      INTEGER FN\n"
        "      FN = 1\n"
        "      X = FN(2)\n"
        "      END\n"
    )
    units, model = project(src)
    with pytest.raises(MigrationError):
        classify_external_names(units[0], model)


# --- intent inference -------------------------------------------------------


def solve_one(events, nparams=1):
    spec = RoutineSpec(params=[f"p{i}" for i in range(nparams)], events=events)
    return solve_intents({"s": spec}, {})


def test_first_access_classification():
    assert solve_one([("r", "p0")])[("s", 0)] == IN
    assert solve_one([("w", "p0")])[("s", 0)] == OUT
    assert solve_one([("r", "p0"), ("w", "p0")])[("s", 0)] == INOUT
    assert solve_one([("w", "p0"), ("r", "p0")])[("s", 0)] == OUT
    assert solve_one([])[("s", 0)] == INOUT  # untouched: by-reference default


def test_forwarding_inherits_callee_intent():
    routines = {
        "top": RoutineSpec(["x"], [("f", "mid", 0, "x")]),
        "mid": RoutineSpec(["y"], [("f", "leaf", 0, "y")]),
        "leaf": RoutineSpec(["z"], [("r", "z")]),
    }
    table = solve_intents(routines, {})
    assert table[("leaf", 0)] == IN
    assert table[("mid", 0)] == IN
    assert table[("top", 0)] == IN


def test_forwarding_to_catalog_routine():
    routines = {"top": RoutineSpec(["x"], [("f", "ext", 0, "x")])}
    assert solve_intents(routines, {"ext": ["out"]})[("top", 0)] == OUT
    assert solve_intents(routines, {})[("top", 0)] == INOUT


def test_solution_is_order_independent():
    routines = {
        "a": RoutineSpec(["x"], [("f", "b", 0, "x"), ("w", "x")]),
        "b": RoutineSpec(["y"], [("r", "y")]),
        "c": RoutineSpec(["z"], [("f", "a", 0, "z")]),
    }
    forward = solve_intents(dict(routines), {})
    reversed_order = solve_intents(dict(reversed(list(routines.items()))), {})
    assert forward == reversed_order


def test_intents_from_parsed_source():
    src = (
        "      SUBROUTINE COPY(SRC, DST)\n"
        "      INTEGER SRC, DST\n"
        "      DST = SRC\n"
        "      END\n"
        "      SUBROUTINE TOP(A, B)\n"
        "      INTEGER A, B\n"
        "      CALL COPY(A, B)\n"
        "      END\n"
    )
    units, model = project(src)
    table = infer_intents(model, units)
    assert table[("copy", 0)] == IN and table[("copy", 1)] == OUT
    assert table[("top", 0)] == IN and table[("top", 1)] == OUT


def test_fixpoint_agrees_with_inlining_oracle():
    rng = random.Random(20260824)
    for _ in range(60):
        routines, catalog = random_program(rng, RoutineSpec)
        assert solve_intents(routines, catalog) == oracle_intents(routines, catalog)


# --- module imports and catalog ---------------------------------------------


def test_compute_uses_sorted_and_checked():
    module_of = {"foo": "foo_mod", "bar": "bar_mod"}
    uses = compute_uses({"foo", "bar", "x"}, {"x"}, module_of, set())
    assert uses == ["bar_mod", "foo_mod"]
    with pytest.raises(MigrationError):
        compute_uses({"ghost"}, set(), module_of, set())
    assert compute_uses({"ghost"}, set(), module_of, {"ghost"}) == []


def test_load_intent_catalog():
    catalog = load_intent_catalog(
        "# comment\nfoo(in, out)\nbar(inout)\nbaz()\n"
    )
    assert catalog == {"foo": ["in", "out"], "bar": ["inout"], "baz": []}
    with pytest.raises(MigrationError):
        load_intent_catalog("foo(in\n")
    with pytest.raises(MigrationError):
        load_intent_catalog("foo(sideways)\n")
