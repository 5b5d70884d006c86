import math

import numpy as np
import pytest

from dynpop import expr as ex
from dynpop.errors import (ArityError, EvalError, ExprIndexError,
                           ExprSyntaxError, UnknownIdentifierError)


def evaluate(text, pi=None, d=None, g=None):
    pi = np.zeros((1, 1, 1)) if pi is None else np.asarray(pi, float)
    d = np.ones((1, 1)) if d is None else np.asarray(d, float)
    g = np.ones(1) if g is None else np.asarray(g, float)
    return ex.evaluate(ex.parse_expr(text), pi, d, g)


def test_reference_arithmetic():
    # 2*0.4 + 0.3 = 1.1
    pi = np.zeros((1, 1, 1))
    pi[0, 0, 0] = 0.3
    d = np.array([[0.6, 0.4]])
    assert evaluate("2*d(0,1) + pi(0,0,0)", pi, d) == pytest.approx(1.1, abs=1e-15)


def test_precedence_and_unary():
    assert evaluate("2 + 3*4") == 14.0
    assert evaluate("(2 + 3)*4") == 20.0
    assert evaluate("-2*3") == -6.0
    assert evaluate("2 - -3") == 5.0
    assert evaluate("8/4/2") == 1.0
    assert evaluate("8 - 4 - 2") == 2.0


def test_functions():
    assert evaluate("exp(0)") == 1.0
    assert evaluate("log(exp(2))") == pytest.approx(2.0, abs=1e-12)
    assert evaluate("min(3, max(1, 2))") == 2.0
    assert evaluate("exp(1000)") == math.inf   # saturates, evaluation is total


def test_number_formats():
    assert evaluate("1e-3") == 1e-3
    assert evaluate("2.5E2") == 250.0
    assert evaluate(".5") == 0.5
    assert evaluate("7") == 7.0


@pytest.mark.parametrize("text", ["1 +", "(1+2", "", "1 2", "2 @ 3", "g()"])
def test_syntax_errors_carry_position(text):
    with pytest.raises(ExprSyntaxError) as err:
        ex.parse_expr(text)
    assert err.value.line == 1
    assert err.value.col >= 1


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError, match="foo"):
        ex.parse_expr("foo(1)")


@pytest.mark.parametrize("text", ["min(1)", "exp(1,2)", "d(0)", "pi(0,0)",
                                  "d(0,1,2)"])
def test_arity_errors(text):
    with pytest.raises(ArityError):
        ex.parse_expr(text)


def test_index_out_of_range_names_reference():
    tree = ex.parse_expr("d(0,5)")
    with pytest.raises(ExprIndexError, match=r"d\(0,5\)"):
        ex.check_refs(tree, 1, 2, 1)
    # also catchable as a plain IndexError
    with pytest.raises(IndexError):
        ex.check_refs(tree, 1, 2, 1)


def test_masked_reference_rejected():
    mask = np.ones((1, 1, 2), dtype=bool)
    mask[0, 0, 1] = False
    tree = ex.parse_expr("pi(0,1,0)")
    with pytest.raises(ExprIndexError, match="masked"):
        ex.check_refs(tree, 1, 1, 2, mask)
    ex.check_refs(ex.parse_expr("pi(0,0,0)"), 1, 1, 2, mask)


def test_division_by_zero_and_log_errors():
    with pytest.raises(EvalError, match="division by zero"):
        evaluate("1/(d(0,0) - 1)")
    with pytest.raises(EvalError, match="non-positive"):
        evaluate("log(0)")
    with pytest.raises(EvalError, match="non-positive"):
        evaluate("log(0 - 2)")


def test_evaluation_is_pure_and_bitwise_stable(rng):
    tree = ex.parse_expr("exp(d(0,0)*pi(0,0,0)) - log(g(0) + 1)/3 + min(d(0,1), 0.25)")
    pi = rng.random((1, 2, 1))
    d = rng.random((1, 2))
    g = np.array([1.0])
    first = ex.evaluate(tree, pi, d, g)
    assert all(ex.evaluate(tree, pi, d, g) == first for _ in range(5))


ROUND_TRIP = [
    "2.0 * d(0,1) + pi(0,0,0)",
    "-(d(0,0) - d(0,1)) / g(0)",
    "min(max(1.0,2.0),exp(0.0))",
    "1.0 - (2.0 - 3.0)",
    "1.0 / (2.0 / 3.0)",
    "--2.0",
    "0.001 * pi(0,0,0)",
]


@pytest.mark.parametrize("text", ROUND_TRIP)
def test_unparse_round_trip(text):
    tree = ex.parse_expr(text)
    assert ex.unparse(tree) == text
    assert ex.parse_expr(ex.unparse(tree)) == tree


def test_compile_matches_evaluate(rng):
    texts = [
        "d(0,0)*pi(0,0,1) - g(0)/2 + exp(-d(0,1))",
        "max(d(0,0), d(0,1)) * min(pi(0,0,0), pi(0,1,0))",
        "1.5 - 0.25*(d(0,1)/g(0))",
    ]
    for text in texts:
        tree = ex.parse_expr(text)
        fn = ex.compile_expr(tree, 1, 2, 2)
        for _ in range(10):
            pi = rng.random((1, 2, 2))
            d = rng.random((1, 2))
            g = np.array([1.0])
            assert fn(pi, d, g) == ex.evaluate(tree, pi, d, g)


def test_compile_rejects_bad_indices_eagerly():
    with pytest.raises(ExprIndexError):
        ex.compile_expr(ex.parse_expr("pi(2,0,0)"), 1, 1, 1)
