import io
from dataclasses import replace

import numpy as np
import pytest

from conftest import lag_spec, positive_kernel_spec, sign_change_spec
from impulsive_dde.fundamental import fundamental_function, fundamental_solution
from impulsive_dde.integrator import MeshOptions, solve
from impulsive_dde.model import FunctionDescriptor, ImpulseSchedule
from impulsive_dde.representation import (
    RepresentationInput,
    evaluate_representation,
    representation_residual,
    representation_terms,
    split_points,
    write_representation_csv,
)

OPTS = MeshOptions(1e-2)


def forced_example():
    return sign_change_spec(forcing=FunctionDescriptor.constant(1.0), history=FunctionDescriptor.constant(1.0))


def test_homogeneous_problem_is_initial_term_only():
    spec = sign_change_spec(initial_value=2.5)
    targets = (0.0, 0.3, 1.0, 1.7)
    parts = representation_terms(RepresentationInput(spec, targets, 1e-2, OPTS))
    assert not parts["forcing"].any() and not parts["history"].any() and not parts["jumps"].any()
    X = fundamental_solution(spec, 1.7, OPTS)
    np.testing.assert_allclose(parts["initial"], 2.5 * X(np.array(targets)), atol=1e-14)
    assert representation_residual(spec, 2.0, OPTS) <= 1e-10


def test_single_jump():
    imp = ImpulseSchedule((0.8,), (1.5,), (2.0,))
    spec = lag_spec(0.6, 0.3, imp)
    targets = (0.5, 0.8, 1.4, 2.0)
    rep = evaluate_representation(RepresentationInput(spec, targets, 1e-2, OPTS))
    G = fundamental_function(spec, 0.8, 2.0, OPTS)
    expected = [0.0] + [2.0 * G(t) for t in targets[1:]]
    np.testing.assert_allclose(rep, expected, atol=1e-14)


def test_jump_sum_alone_reproduces_solution():
    imp = ImpulseSchedule.periodic(0.5, 6, 0.8, 1.0)
    spec = lag_spec(0.9, 0.2, imp)
    assert representation_residual(spec, 3.0, OPTS) <= 1e-12


@pytest.mark.parametrize("t", [0.2, 0.5, 0.9])
def test_worked_example_with_inputs(t):
    spec = forced_example()
    rep = evaluate_representation(RepresentationInput(spec, (t,), 1e-2, MeshOptions(1e-3)))
    assert rep[0] == pytest.approx(solve(spec, 1.0, MeshOptions(1e-3))(t), abs=1e-5)


def test_history_integral_confined_to_first_lag():
    base = replace(positive_kernel_spec(), initial_value=0.0)
    near = replace(base, history=FunctionDescriptor.constant(2.0))
    # differs from ``near`` only below -0.3, which h(s) = s - 0.3 never reaches for s >= 0
    far = replace(base, history=FunctionDescriptor.piecewise([-0.3], [-7.0, 2.0]))
    targets = (0.2, 0.3, 1.0, 2.5)
    a = representation_terms(RepresentationInput(near, targets, 1e-2, OPTS))["history"]
    b = representation_terms(RepresentationInput(far, targets, 1e-2, OPTS))["history"]
    assert np.all(a != 0.0)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    assert representation_residual(near, 3.0, OPTS) <= 1e-5


def test_residual_with_forcing():
    assert representation_residual(forced_example(), 2.0, MeshOptions(1e-3), 1e-2) <= 1e-5


def test_residual_decreases_when_steps_halve():
    spec = forced_example()
    coarse = representation_residual(spec, 2.0, MeshOptions(0.02), 0.04)
    fine = representation_residual(spec, 2.0, MeshOptions(0.01), 0.02)
    assert fine <= coarse


def test_tabulated_forcing_and_piecewise_coefficient():
    term_coef = FunctionDescriptor.piecewise([0.9], [0.4, 1.1])
    spec = lag_spec(1.0, 0.35, ImpulseSchedule((0.5, 1.2), (1.4, -0.7), (0.3, 0.0)), initial_value=-1.0)
    spec = replace(
        spec,
        terms=(replace(spec.terms[0], coefficient=term_coef),),
        forcing=FunctionDescriptor.tabulated([0.0, 1.0, 2.0], [0.0, 1.0, -1.0]),
        history=FunctionDescriptor.piecewise([-0.2], [1.0, -2.0]),
    )
    assert representation_residual(spec, 2.0, MeshOptions(5e-3), 1e-2) <= 1e-6


def test_refuses_coarse_quadrature():
    spec = sign_change_spec()
    with pytest.raises(ValueError, match="impulse gap"):
        evaluate_representation(RepresentationInput(spec, (1.0,), 0.5))


@pytest.mark.parametrize("bad", [{"quadrature_step": 0.0}, {"target_times": (-1.0,)}])
def test_input_invariants(bad):
    kw = {"spec": sign_change_spec(), "target_times": (1.0,), **bad}
    with pytest.raises(ValueError):
        RepresentationInput(**kw)


def test_split_points_include_backward_images():
    spec = lag_spec(1.0, 0.3, ImpulseSchedule((0.5,), (2.0,)))
    pts = split_points(spec, 1.0, depth=3)
    for p in (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0):
        assert np.any(np.isclose(pts, p, atol=1e-12)), p
    assert pts[0] == 0.0 and pts[-1] == 1.0


def test_csv_header():
    buf = io.StringIO()
    write_representation_csv(buf, [(0.5, 1.0, 1.0, 0.0)])
    assert buf.getvalue().splitlines()[0] == "t,direct,representation,abs_error"
