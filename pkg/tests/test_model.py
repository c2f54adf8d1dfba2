import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alignsteer.model import (
    InfeasibleControlError,
    ModelError,
    check_feasible,
    grid_point,
    load_model,
    phi,
    population,
    reward,
    validate_model,
)

from conftest import FOUR_U_STAR, FOUR_X_STAR

IDENTITY_RAW = {"num_states": 2, "alpha": 0.5, "P0": [[1, 0], [0, 1]], "P1": [[1, 0], [0, 1]],
                "r0": [1, 0], "r1": [0, 1]}


def test_identity_model_is_valid():
    m = validate_model(IDENTITY_RAW)
    assert m.num_states == 2 and m.alpha == 0.5
    np.testing.assert_array_equal(m.P0, np.eye(2))


def test_builtin_four_state(four):
    m, x_init = four
    assert m.num_states == 4
    np.testing.assert_allclose(x_init, [0.4, 0, 0.6, 0])
    np.testing.assert_allclose(m.P_alpha.sum(axis=1), 1.0)


def test_non_stochastic_row_reports_index_and_sum():
    raw = dict(IDENTITY_RAW, P0=[[0.5, 0.6], [0, 1]])
    with pytest.raises(ModelError, match="non-stochastic row 0, sum 1.1"):
        validate_model(raw)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.2, 1.5])
def test_alpha_outside_unit_interval(alpha):
    with pytest.raises(ModelError, match="alpha"):
        validate_model(dict(IDENTITY_RAW, alpha=alpha))


def test_dimension_mismatch():
    with pytest.raises(ModelError, match="dimension mismatch"):
        validate_model(dict(IDENTITY_RAW, r1=[0, 1, 2]))


def test_missing_key_is_error_unknown_key_is_warning(tmp_path, caplog):
    raw = dict(IDENTITY_RAW)
    del raw["r0"]
    with pytest.raises(ModelError, match="r0"):
        validate_model(raw)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(dict(IDENTITY_RAW, colour="red", x_init=[0.3, 0.7])))
    m, x_init = load_model(path)
    assert "colour" in caplog.text
    np.testing.assert_allclose(x_init, [0.3, 0.7])


def test_fingerprint_is_stable(four):
    m, _ = four
    again, _ = load_model("builtin:four-state")
    assert m.fingerprint() == again.fingerprint()


def test_population_clamps_within_tolerance():
    x = population([0.5 + 5e-10, 0.5, -1e-13])
    assert x[2] == 0.0
    with pytest.raises(ModelError):
        population([0.6, 0.6])
    with pytest.raises(ModelError):
        population([0.33, 0.67], N=10)


def test_phi_identity_fixes_every_point():
    m = validate_model(IDENTITY_RAW)
    for x, u in [((0.3, 0.7), (0.0, 0.5)), ((0.5, 0.5), (0.25, 0.25)), ((1.0, 0.0), (0.5, 0.0))]:
        np.testing.assert_allclose(phi(m, x, u), x)


def test_phi_stationary_point(four):
    m, _ = four
    np.testing.assert_allclose(phi(m, FOUR_X_STAR, FOUR_U_STAR), FOUR_X_STAR, atol=1e-15)


def test_phi_matches_hand_product(four):
    m, _ = four
    x = np.array([0.4, 0, 0.6, 0])
    u = np.array([0.2, 0, 0.3, 0])
    # passive (0.2,0,0.3,0) and active (0.2,0,0.3,0) rows written out
    expected = np.zeros(4)
    for s in range(4):
        for t in range(4):
            expected[t] += (x[s] - u[s]) * m.P0[s, t] + u[s] * m.P1[s, t]
    np.testing.assert_allclose(phi(m, x, u), expected, atol=1e-15)
    np.testing.assert_allclose(expected, [0.38, 0.02, 0.57, 0.03])


def test_reward_examples(four):
    m, _ = four
    assert reward(m, FOUR_X_STAR, FOUR_U_STAR) == pytest.approx(1.0)
    ident = validate_model(IDENTITY_RAW)
    assert reward(ident, [0.3, 0.7], [0.0, 0.5]) == pytest.approx(0.8)
    zero = validate_model(dict(IDENTITY_RAW, r0=[0, 0], r1=[0, 0]))
    assert reward(zero, [0.3, 0.7], [0.1, 0.4]) == 0.0


def test_check_feasible_examples():
    assert check_feasible([0.5, 0.5], [0.25, 0.25], 0.5)
    assert not check_feasible([0.4, 0, 0.6, 0], [0.3, 0.2, 0, 0], 0.5)
    assert not check_feasible([1, 0], [0.4, 0], 0.5)


def test_phi_rejects_infeasible(four):
    m, _ = four
    with pytest.raises(InfeasibleControlError):
        phi(m, [0.4, 0, 0.6, 0], [0.3, 0.2, 0, 0])


def test_grid_point_largest_remainder():
    np.testing.assert_allclose(grid_point([1 / 3, 1 / 3, 1 / 3], 10), [0.4, 0.3, 0.3])
    np.testing.assert_allclose(grid_point([0.4, 0, 0.6, 0], 10), [0.4, 0, 0.6, 0])


simplex4 = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda v: sum(v) > 1e-3)


def _feasible_pair(weights, split, alpha):
    x = np.asarray(weights) / sum(weights)
    # u = alpha*x mixed with the greedy vertex that fills states in index order
    greedy = np.zeros_like(x)
    left = alpha
    for s in range(x.size):
        greedy[s] = min(x[s], left)
        left -= greedy[s]
    return x, split * alpha * x + (1 - split) * greedy


@settings(max_examples=200, deadline=None)
@given(simplex4, st.floats(0, 1), simplex4, st.floats(0, 1), st.floats(0, 1))
def test_phi_preserves_simplex_and_is_linear(w1, s1, w2, s2, lam):
    from alignsteer import builtin_model

    m, _ = builtin_model("four-state")
    x1, u1 = _feasible_pair(w1, s1, m.alpha)
    x2, u2 = _feasible_pair(w2, s2, m.alpha)
    y = phi(m, x1, u1)
    assert y.min() >= -1e-12 and abs(y.sum() - 1) <= 1e-9
    xm, um = lam * x1 + (1 - lam) * x2, lam * u1 + (1 - lam) * u2
    np.testing.assert_allclose(phi(m, xm, um), lam * y + (1 - lam) * phi(m, x2, u2), atol=1e-9)
    assert reward(m, xm, um) == pytest.approx(lam * reward(m, x1, u1) + (1 - lam) * reward(m, x2, u2), abs=1e-9)
    assert check_feasible(x1, m.alpha * x1, m.alpha)
