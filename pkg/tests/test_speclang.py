"""Spec language: parsing, printing, expansion, infix expressions, errors."""

import random

import pytest

import gen_specs
from hdopt.speclang import (
    AccuracySpec,
    HardwareModel,
    Perm,
    Prod,
    Ref,
    Requirement,
    SpecError,
    Sum,
    expand_vars,
    parse_hw_model,
    parse_infix,
    parse_spec,
    print_expr,
    print_hw_model,
    print_spec,
)

EDGE_SPEC = """\
spec {
    codebook interactions(2), relations(3), concepts(5);
    abs-data edge = prod(interactions,relations,concepts);
    abs-data ds = sum(4,edge);
    require-accuracy(edge, ds, 1, 0.99, 0.01, 0.003);
}
"""

ERROR_MODEL = """\
hardware-model {
    mem codebook = 0.0;
    mem item-mem = 0.0215;
    op bind = 0.0;
}
"""


def test_parse_edge_query_spec():
    spec = parse_spec(EDGE_SPEC)
    assert spec.codebooks == {"interactions": 2, "relations": 3, "concepts": 5}
    assert set(spec.bindings) == {"edge", "ds"}
    (req,) = spec.requirements
    assert req.k == 1 and req.acc == 0.99 and req.fp == 0.01 and req.fn == 0.003
    assert req.query == Ref("edge")
    assert req.ds == Ref("ds")


def test_expand_vars_inlines_definitions():
    spec = expand_vars(parse_spec(EDGE_SPEC))
    (req,) = spec.requirements
    want_edge = Prod((Ref("interactions"), Ref("relations"), Ref("concepts")))
    assert req.query == want_edge
    assert req.ds == Sum(4, (want_edge,))


def test_expand_vars_chained_definition():
    spec = parse_spec(
        "spec { codebook a(2), b(2); abs-data y = prod(a,b); abs-data x = sum(2,y);"
        " require-accuracy(x, x, 1, 0.9, 0.1, 0.1); }"
    )
    out = expand_vars(spec)
    assert out.requirements[0].query == Sum(2, (Prod((Ref("a"), Ref("b"))),))


def test_empty_spec_parses_and_prints_canonically():
    spec = parse_spec("spec { }")
    assert spec.codebooks == {} and spec.requirements == ()
    assert print_spec(spec) == "spec {\n}\n"


def test_undefined_variable_is_named_in_error():
    with pytest.raises(SpecError, match="ghost"):
        expand_vars(
            parse_spec("spec { codebook a(2); require-accuracy(ghost, a, 1, 0.9, 0.1, 0.1); }")
        )


def test_parse_errors_carry_position():
    with pytest.raises(SpecError, match=r"\d+:\d+"):
        parse_spec("spec {\n  codebook a(2)\n  junk;\n}")
    with pytest.raises(SpecError):
        parse_spec("spec { codebook a(0); }")


def test_hw_model_parses_with_defaults():
    hw = parse_hw_model(ERROR_MODEL)
    assert hw.mem_err == {"codebook": 0.0, "item-mem": 0.0215, "query": 0.0}
    assert hw.op_err == {"bind": 0.0, "bundle": 0.0, "perm": 0.0}


def test_hw_model_empty_body_is_all_zero():
    hw = parse_hw_model("hardware-model { }")
    assert all(v == 0.0 for v in hw.mem_err.values())
    assert all(v == 0.0 for v in hw.op_err.values())


def test_hw_model_rejects_out_of_range_rate():
    with pytest.raises(SpecError):
        parse_hw_model("hardware-model { mem item-mem = 0.6; }")
    with pytest.raises(SpecError):
        parse_hw_model("hardware-model { mem bogus = 0.1; }")


def test_roundtrip_edge_spec_structural_equality():
    spec = parse_spec(EDGE_SPEC)
    assert parse_spec(print_spec(spec)) == spec


def test_roundtrip_perm_shift():
    spec = parse_spec(
        "spec { codebook states(4); abs-data t = perm(1,states);"
        " require-accuracy(t, t, 1, 0.9, 0.1, 0.1); }"
    )
    again = parse_spec(print_spec(spec))
    assert again.bindings["t"] == Perm(1, Ref("states"))


def test_roundtrip_hw_model():
    hw = parse_hw_model(ERROR_MODEL)
    assert parse_hw_model(print_hw_model(hw)) == hw


def test_roundtrip_random_specs():
    rng = random.Random(2024)
    for _ in range(200):
        spec = gen_specs.random_spec(rng)
        text = print_spec(spec)
        again = parse_spec(text)
        assert again == spec, text
        assert print_spec(again) == text


def test_parse_infix_shapes():
    expr = parse_infix("a*c + b*c + a*b")
    assert isinstance(expr, Sum) and expr.bound == 3
    assert all(isinstance(t, Prod) for t in expr.terms)
    prod = parse_infix("(a+b)*(c+d)")
    assert isinstance(prod, Prod) and len(prod.factors) == 2
    assert parse_infix("x") == Ref("x")
    with pytest.raises(SpecError):
        parse_infix("a + * b")
    with pytest.raises(SpecError):
        parse_infix("a b")


def test_print_expr_is_parseable():
    e = Sum(3, (Prod((Ref("a"), Ref("b"))), Perm(2, Ref("c"))))
    spec = AccuracySpec(
        codebooks={"a": 2, "b": 2, "c": 2},
        bindings={},
        requirements=(Requirement(e, e, 1, 0.9, 0.1, 0.1),),
    )
    assert parse_spec(print_spec(spec)).requirements[0].query == e
    assert "sum(3," in print_expr(e)


def test_hardware_model_surfaces():
    ideal = HardwareModel.ideal()
    assert set(ideal.op_err) == {"bind", "bundle", "perm"}
    assert set(ideal.mem_err) == {"codebook", "item-mem", "query"}
    assert ideal.rates() == (0.0,) * 6
    with pytest.raises(KeyError):
        HardwareModel(op_err={"bind": 0.0}, mem_err={}).rates()
