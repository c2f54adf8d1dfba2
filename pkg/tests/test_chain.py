import numpy as np
import pytest

from alignsteer import (
    AlignAndSteer,
    SteeringRule,
    analyze_chain,
    deterministic_trajectory,
    find_certificate,
    max_alignment_coef,
    solve_conventional_static,
    solve_refined_static,
    validate_model,
)
from alignsteer.static import StationaryPoint

from oracles import random_model

CYCLE = {"num_states": 2, "alpha": 0.5, "P0": [[0, 1], [1, 0]], "P1": [[0, 1], [1, 0]], "r0": [1, 0], "r1": [0, 1]}


def test_identity_is_not_weakly_communicating(identity):
    cs = analyze_chain(identity[0])
    assert cs.closed_classes == [[0], [1]]
    assert not cs.weakly_communicating


def test_four_state_is_communicating_and_aperiodic(four):
    cs = analyze_chain(four[0])
    assert cs.weakly_communicating
    assert cs.periods_under_Palpha == [1, 1, 1, 1]
    assert cs.transient_states == []


def test_two_cycle_has_period_two():
    cs = analyze_chain(validate_model(CYCLE))
    assert cs.closed_classes == [[0, 1]]
    assert cs.periods_under_Palpha == [2, 2]


def test_transient_states_and_weak_communication():
    # state 2 leads into the closed class {0,1} under either action
    raw = {"num_states": 3, "alpha": 0.5,
           "P0": [[0.5, 0.5, 0], [0.5, 0.5, 0], [0, 0.5, 0.5]],
           "P1": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
           "r0": [0, 0, 0], "r1": [1, 1, 1]}
    cs = analyze_chain(validate_model(raw))
    assert cs.closed_classes == [[0, 1]]
    assert cs.transient_states == [2]
    # the self-loop under action 1 lets a policy stay in state 2 forever
    assert not cs.weakly_communicating
    raw["P1"] = [[1, 0, 0], [0, 1, 0], [0, 1, 0]]
    assert analyze_chain(validate_model(raw)).weakly_communicating


def test_self_loop_has_period_one():
    raw = dict(CYCLE, P0=[[0.5, 0.5], [1, 0]])
    assert analyze_chain(validate_model(raw)).periods_under_Palpha == [1, 1]


def test_four_state_certificate(four, four_sp):
    m, _ = four
    cert = find_certificate(m, four_sp)
    assert cert is not None and cert.T0 <= 4 * 16
    Pa = np.linalg.matrix_power(m.P_alpha, cert.T0)
    assert cert.p0 == pytest.approx(Pa[:, four_sp.support].min())
    assert cert.theta == pytest.approx(cert.p0 / 0.25)
    # smallest such T0
    if cert.T0 > 1:
        prev = np.linalg.matrix_power(m.P_alpha, cert.T0 - 1)
        assert prev[:, four_sp.support].min() <= 1e-12


def test_identity_certificates_absent(identity):
    m, x_init = identity
    assert find_certificate(m, solve_conventional_static(m), cap=50) is None
    assert find_certificate(m, solve_refined_static(m, x_init), cap=50) is None


def test_two_cycle_full_support_certificate_absent():
    m = validate_model(CYCLE)
    sp = StationaryPoint(np.array([0.5, 0.5]), np.array([0.25, 0.25]), np.zeros(2), np.zeros(2), 0.5)
    assert find_certificate(m, sp, cap=40) is None


def test_cap_validation(four, four_sp):
    with pytest.raises(ValueError):
        find_certificate(four[0], four_sp, cap=0)


def test_aperiodic_weakly_communicating_models_get_certificates():
    rng = np.random.default_rng(17)
    checked = 0
    for _ in range(200):
        S = int(rng.integers(2, 6))
        m = validate_model(random_model(rng, S, density=0.4))
        cs = analyze_chain(m)
        sp = solve_refined_static(m, rng.dirichlet(np.ones(S)))
        if not cs.weakly_communicating or any(cs.periods_under_Palpha[s] != 1 for s in sp.support):
            continue
        checked += 1
        assert find_certificate(m, sp) is not None
    assert checked >= 20


def test_certificate_soundness_on_random_starts(four, four_sp):
    m, _ = four
    cert = find_certificate(m, four_sp)
    rule = AlignAndSteer(four_sp, SteeringRule(m, "linear"))
    rng = np.random.default_rng(8)
    for _ in range(100):
        x0 = rng.dirichlet(np.ones(4))
        traj = deterministic_trajectory(m, rule, x0, 60)
        d0 = max_alignment_coef(x0, four_sp.x_star)
        for k in range(60 // cert.T0 + 1):
            d = max_alignment_coef(traj.states[k * cert.T0], four_sp.x_star)
            assert 1 - d <= (1 - d0) * (1 - cert.theta) ** k + 1e-9


def test_positivity_persists_after_t0(four, four_sp):
    # sanity probe on an aperiodic model
    m, _ = four
    cert = find_certificate(m, four_sp)
    for extra in range(1, 5):
        Pa = np.linalg.matrix_power(m.P_alpha, cert.T0 + extra)
        assert Pa[:, four_sp.support].min() > 1e-12
