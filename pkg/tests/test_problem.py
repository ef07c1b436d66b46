import numpy as np
import pytest

from slroots.problem import (
    BUILTIN_PROBLEMS,
    Condition,
    ProblemError,
    UnknownProblemError,
    ValidationReport,
    builtin_parameters,
    builtin_problem,
    validate,
)

COERCIVE = [n for n in BUILTIN_PROBLEMS if n != "dbar_noncoercive_2d"]


def test_neumann_spec():
    spec = builtin_problem("neumann_1d", {"a00": 1})
    x = np.array([0.3])
    assert np.array_equal(spec.a_matrix(x), np.eye(1))
    assert spec.dirichlet_part == ()
    assert spec.b00(np.array([0.0])) == 0
    assert spec.s_exponent == 1.0


def test_dbar_spec():
    spec = builtin_problem("dbar_noncoercive_2d", {"b00": 1})
    x = np.array([0.5, 0.5])
    assert np.array_equal(spec.a_matrix(x), np.array([[1, 1j], [-1j, 1]]))
    assert spec.b1(np.array([0.0, 0.5])) == 1
    assert spec.dirichlet_part == ()
    assert spec.s_exponent == 0.5


def test_zaremba_1d_boundary_indicators():
    spec = builtin_problem("zaremba_1d", {})
    assert spec.dirichlet_part == ("left",)
    left, right = np.array([0.0]), np.array([1.0])
    assert spec.b1(left) == 0 and spec.b1(right) == 1
    assert spec.b00(left) == 1 and spec.b00(right) == 0


def test_unknown_problem():
    with pytest.raises(UnknownProblemError, match="unknown problem"):
        builtin_problem("heat_3d")


@pytest.mark.parametrize(
    "params",
    [{"a00": -1}, {"a00": [1, 1]}, {"bogus": 1}, {"a00": "x"}, {"a00": True}],
)
def test_bad_parameters(params):
    with pytest.raises(ProblemError):
        builtin_problem("neumann_1d", params)


def test_complex_parameter_forms():
    for raw in (0.5j, [0, 0.5], {"re": 0, "im": 0.5}):
        spec = builtin_problem("neumann_1d", {"delta_a0": raw})
        assert spec.params["delta_a0"] == 0.5j


def test_defaults_listed_for_every_builtin():
    for name in BUILTIN_PROBLEMS:
        defaults = builtin_parameters(name)
        assert builtin_problem(name).params == {k: complex(v) for k, v in defaults.items()}


def test_validate_neumann():
    rep = validate(builtin_problem("neumann_1d", {"a00": 1}), 16)
    assert rep.strongly_elliptic and rep.coercive
    assert rep.condition_one_of_three == Condition.A00_POSITIVE_MASS


def test_validate_zaremba_uses_dirichlet_part():
    assert validate(builtin_problem("zaremba_1d"), 16).condition_one_of_three == Condition.S_NONEMPTY


def test_validate_robin_uses_boundary_mass():
    rep = validate(builtin_problem("robin_1d", {"a00": 0, "b00": 1}), 16)
    assert rep.condition_one_of_three == Condition.B00_POSITIVE_MASS


def test_validate_neumann_without_mass_fails_condition():
    rep = validate(builtin_problem("neumann_1d", {"a00": 0}), 16)
    assert rep.condition_one_of_three == Condition.NONE


def test_dbar_is_elliptic_not_coercive():
    rep = validate(builtin_problem("dbar_noncoercive_2d", {"b00": 1}), 16)
    assert rep.strongly_elliptic
    assert not rep.coercive


def test_dbar_form_vanishes_on_holomorphic_gradient():
    # u = z has grad u = (1, i); sum a_ij d_i conj(u) d_j u = 0
    a = builtin_problem("dbar_noncoercive_2d").a_matrix(np.array([0.5, 0.5]))
    g = np.array([1, 1j])
    assert abs(g.conj() @ a @ g) == 0


@pytest.mark.parametrize("name", COERCIVE)
def test_coercive_builtins(name):
    rep = validate(builtin_problem(name), 16)
    assert rep.strongly_elliptic and rep.coercive and rep.boundary_ok and rep.hermitian
    assert rep.condition_one_of_three != Condition.NONE


@pytest.mark.parametrize("name", BUILTIN_PROBLEMS)
def test_sampling_stability(name):
    a = validate(builtin_problem(name), 16).to_dict()
    b = validate(builtin_problem(name), 64).to_dict()
    for key in ("strongly_elliptic", "coercive", "hermitian", "boundary_ok", "condition_one_of_three"):
        assert a[key] == b[key]


@pytest.mark.parametrize("name", BUILTIN_PROBLEMS)
def test_coercive_implies_elliptic(name):
    rep = validate(builtin_problem(name), 16)
    assert rep.strongly_elliptic or not rep.coercive


def test_validation_report_round_trip():
    rep = validate(builtin_problem("zaremba_2d", {"eps": 0.1}), 16)
    assert ValidationReport.from_dict(rep.to_dict()) == rep
