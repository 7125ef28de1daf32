import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize

from qubitamp.elements import coherent_attenuator, loss_channel
from qubitamp.entanglement import (
    AmplitudeDampedState,
    Measure,
    amplified_state,
    amplify_damped,
    attenuated_amplified,
    attenuated_lossy_state,
    best_negativity_gain,
    binary_entropy,
    concurrence,
    concurrence_of_matrix,
    distill_success_probability,
    distillation_point,
    entangling_efficiency,
    log_negativity,
    lossy_state,
    negativity,
    negativity_of_matrix,
    optimal_gain,
    partial_transpose_2q,
    ree_direct,
    relative_entropy,
    relative_entropy_of_entanglement,
    simulate_distillation,
    tradeoff_curve,
)
from qubitamp.errors import ParamError
from qubitamp.fock import VACUUM, FockState, StateVector, mode, to_density_matrix

unit = st.floats(0.0, 1.0)
open_unit = st.floats(0.01, 0.99)


@given(unit, unit)
def test_closed_forms_match_matrix_oracles(alpha, p):
    s = AmplitudeDampedState(alpha, p)
    rho = s.density_matrix()
    assert concurrence(s) == pytest.approx(concurrence_of_matrix(rho), abs=1e-10)
    assert negativity(s) == pytest.approx(negativity_of_matrix(rho), abs=1e-10)


@pytest.mark.parametrize("T", np.linspace(0.1, 1.0, 10))
def test_lossy_state_measures(T):
    s = lossy_state(T)
    assert negativity(s) == pytest.approx(T / 2, abs=1e-12)
    assert concurrence(s) == pytest.approx(math.sqrt(T), abs=1e-12)


def test_lossy_state_matches_fock_loss():
    T = 0.35
    k = 1 / math.sqrt(2)
    psi = StateVector({FockState.of("H_L"): k, FockState.of("H_R"): k}, modes=["L", "R"])
    rho = loss_channel(to_density_matrix(psi), "R", T)
    basis = [VACUUM, FockState.of("H_R"), FockState.of("H_L"), FockState.of("H_L", "H_R")]
    assert np.abs(rho.to_array(basis).real - lossy_state(T).density_matrix()).max() < 1e-12


@given(st.floats(0.05, 1.0), st.floats(1.0, 100.0))
def test_amplified_state_is_amplified_lossy_state(T, G):
    s, N = amplified_state(T, G)
    s2, D = amplify_damped(lossy_state(T), G)
    assert s.alpha == pytest.approx(s2.alpha, abs=1e-12)
    assert s.p == pytest.approx(s2.p, abs=1e-12)
    assert N == pytest.approx(1 / D, rel=1e-12)


def test_infinite_gain_limit():
    s, D = amplify_damped(lossy_state(0.3), math.inf)
    assert s.alpha == 1.0 and math.isinf(D)
    assert distill_success_probability(0.4, math.inf) == pytest.approx(0.05)


def test_parameter_checks():
    with pytest.raises(ParamError):
        lossy_state(0.0)
    with pytest.raises(ParamError):
        amplified_state(0.5, 0.5)
    with pytest.raises(ParamError):
        AmplitudeDampedState(1.2, 0.3)
    with pytest.raises(ParamError):
        attenuated_lossy_state(0.0, 0.5)


@pytest.mark.parametrize("T", [0.1, 0.3, 0.5, 0.8, 1.0])
def test_closed_form_optimal_gains(T):
    g_n = optimal_gain(T, Measure.NEGATIVITY)
    g_c = optimal_gain(T, Measure.CONCURRENCE)
    f_n = lambda G: negativity(amplified_state(T, G)[0])
    f_c = lambda G: concurrence(amplified_state(T, G)[0])
    for g, f in ((g_n, f_n), (g_c, f_c)):
        assert f(g) >= f(g * (1 + 1e-3)) and f(g) >= f(max(1.0, g * (1 - 1e-3)))
    assert g_c >= 1 / T - 1e-12 and g_n >= 1 / T - 1e-12


def test_ree_optimal_gain_frozen():
    # golden value from the first implementation
    assert optimal_gain(0.5, Measure.REE) == pytest.approx(5.512083757878282, abs=1e-4)


@given(unit, unit)
def test_ree_bounds(alpha, p):
    s = AmplitudeDampedState(alpha, p)
    e = relative_entropy_of_entanglement(s)
    assert -1e-12 <= e <= log_negativity(s) + 1e-9


@given(open_unit, st.floats(0.01, 0.999))
def test_ree_swap_symmetry(alpha, p):
    a = relative_entropy_of_entanglement(AmplitudeDampedState(alpha, p))
    b = relative_entropy_of_entanglement(AmplitudeDampedState(1 - alpha, p))
    assert a == pytest.approx(b, abs=1e-9)


def test_ree_pure_state():
    assert relative_entropy_of_entanglement(AmplitudeDampedState(0.3, 1.0)) == pytest.approx(binary_entropy(0.3))
    assert relative_entropy_of_entanglement(AmplitudeDampedState(0.3, 0.0)) == 0.0


@pytest.mark.parametrize("alpha", [0.02, 0.2, 0.45, 0.5, 0.5 + 1e-7, 0.7, 0.97])
@pytest.mark.parametrize("p", [1e-3, 0.3, 0.7, 0.99, 0.99999])
def test_ree_two_paths_agree(alpha, p):
    s = AmplitudeDampedState(alpha, p)
    assert relative_entropy_of_entanglement(s) == pytest.approx(ree_direct(s), abs=1e-8)


def _general_ppt_ree(alpha, p):
    """REE over all real PPT states via SLSQP on a Cholesky factor; slow but assumption-free."""
    rho = AmplitudeDampedState(alpha, p).density_matrix()
    iu = np.tril_indices(4)

    def sig(x):
        m = np.zeros((4, 4))
        m[iu] = x
        s = m @ m.T
        return s / np.trace(s)

    con = {"type": "ineq", "fun": lambda x: np.linalg.eigvalsh(partial_transpose_2q(sig(x)))[0]}
    best = math.inf
    for seed in range(4):
        x0 = np.eye(4)[iu] * 0.5 + 0.05 * np.random.default_rng(seed).normal(size=10)
        r = minimize(lambda x: relative_entropy(rho, sig(x)), x0, method="SLSQP", constraints=[con],
                     options={"ftol": 1e-15, "maxiter": 2000})
        if con["fun"](r.x) > -1e-12:
            best = min(best, r.fun)
    return best


@pytest.mark.parametrize("alpha,p", [(0.8 / 1.8, 0.9), (0.3, 0.5), (0.6, 0.2)])
def test_ree_matches_general_ppt_oracle(alpha, p):
    s = AmplitudeDampedState(alpha, p)
    assert relative_entropy_of_entanglement(s) == pytest.approx(_general_ppt_ree(alpha, p), abs=1e-6)


def test_ree_frozen_values():
    assert relative_entropy_of_entanglement(lossy_state(0.8)) == pytest.approx(0.6125115812194681, abs=1e-9)
    assert relative_entropy_of_entanglement(AmplitudeDampedState(0.3, 0.5)) == pytest.approx(
        0.1068000241117939, abs=1e-9)


def test_relative_entropy_support():
    rho = AmplitudeDampedState(0.5, 1.0).density_matrix()
    assert math.isinf(relative_entropy(rho, np.diag([1.0, 0, 0, 0])))
    assert relative_entropy(rho, rho) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("T", [0.2, 0.6, 1.0])
@pytest.mark.parametrize("G", [1.0, 2.5, 10.0, math.inf])
def test_distillation_matches_fock_simulation(T, G):
    rho, prob = simulate_distillation(T, G)
    assert prob == pytest.approx(distill_success_probability(T, G), abs=1e-8)
    if math.isinf(G):
        return
    # the low branch leaves a sign on the qubit, a local Z on the amplified arm
    z = np.diag([1.0, -1.0, 1.0, -1.0])
    expected = z @ amplified_state(T, G)[0].density_matrix() @ z
    assert np.abs(rho - expected).max() < 1e-10


def test_distillation_point():
    pt = distillation_point(0.5, 3.0)
    assert pt.N_norm == pytest.approx(2 / 3.0)
    assert pt.measures.ree is not None and pt.measures.ree > 0


@given(st.floats(0.01, 1.0), st.floats(0.05, 1.0))
def test_attenuated_state_matches_fock(nu, T):
    k = 1 / math.sqrt(2)
    psi = StateVector({FockState.of("H_L"): k, FockState.of("H_R"): k}, modes=["L", "R"])
    att, p_att = coherent_attenuator(psi, "R", nu)
    rho = loss_channel(to_density_matrix(att), "R", T)
    basis = [VACUUM, FockState.of("H_R"), FockState.of("H_L"), FockState.of("H_L", "H_R")]
    s, p = attenuated_lossy_state(nu, T)
    assert p == pytest.approx(p_att, abs=1e-12)
    assert np.abs(rho.to_array(basis).real - s.density_matrix()).max() < 1e-12


def test_attenuation_at_unity_is_plain_loss():
    s, p = attenuated_lossy_state(1.0, 0.4)
    assert p == 1.0 and s == lossy_state(0.4)
    a, pa = attenuated_amplified(1.0, 0.4, 3.0)
    assert pa == pytest.approx(distill_success_probability(0.4, 3.0), rel=1e-12)


@pytest.mark.parametrize("T", [0.25, 0.5, 0.75])
def test_entangling_efficiency_prefers_no_attenuation(T):
    _, (nu, _) = entangling_efficiency(T)
    assert nu == 1.0


def test_strong_attenuation_restores_negativity():
    _, N = best_negativity_gain(1e-4, 0.5)
    assert N >= 0.499


def test_tradeoff_curve_monotone():
    rows = tradeoff_curve(0.5, [1.0, 0.5, 0.1, 0.01])
    Ns = [r["negativity"] for r in rows]
    Ps = [r["success_prob"] for r in rows]
    assert Ns == sorted(Ns) and Ps == sorted(Ps, reverse=True)


def test_optimal_gain_examples():
    assert optimal_gain(0.5, Measure.CONCURRENCE) == pytest.approx(3.0, abs=1e-12)
    assert optimal_gain(0.5, Measure.NEGATIVITY) == pytest.approx(2 * (1.5 + 0.5 * math.sqrt(1.5)), abs=1e-12)
    assert optimal_gain(1.0, Measure.NEGATIVITY) == pytest.approx(1.0, abs=1e-12)


def test_state_examples():
    s = lossy_state(0.5)
    assert (s.alpha, s.p) == pytest.approx((1 / 3, 0.75), abs=1e-15)
    same, N1 = amplified_state(0.5, 1.0)
    assert N1 == 1.0 and (same.alpha, same.p) == pytest.approx((s.alpha, s.p), abs=1e-15)
    out, N = amplified_state(0.5, 3.0)
    assert N == pytest.approx(2 / 3) and concurrence(out) == pytest.approx(N * math.sqrt(1.5), abs=1e-12)
    assert concurrence_of_matrix(out.density_matrix()) == pytest.approx(N * math.sqrt(1.5), abs=1e-10)


@given(st.floats(0.01, 1.0), st.floats(1.0, 1e3))
def test_concurrence_after_amplification(T, G):
    s, N = amplified_state(T, G)
    assert concurrence(s) == pytest.approx(N * math.sqrt(G * T), rel=1e-12)


def test_measure_examples():
    bell = AmplitudeDampedState(0.5, 1.0)
    assert (concurrence(bell), negativity(bell), log_negativity(bell)) == pytest.approx((1, 0.5, 1), abs=1e-15)
    assert relative_entropy_of_entanglement(bell) == pytest.approx(1, abs=1e-15)
    vac = AmplitudeDampedState(0.3, 0.0)
    assert (concurrence(vac), negativity(vac), log_negativity(vac), relative_entropy_of_entanglement(vac)) == (0, 0, 0, 0)


def test_success_probability_examples():
    for T in (0.2, 0.7, 1.0):
        assert distill_success_probability(T, 1.0) == pytest.approx(1 / 9, abs=1e-15)
    # the quoted expression cancels badly at large G, so evaluate it with 50 digits
    T, G = mpmath.mpf("0.5"), mpmath.mpf(10) ** 6
    with mpmath.workdps(50):
        N = 2 / (2 + G * T - T)
        quoted = float((2 * G - 2 * mpmath.sqrt(G * G + 3 * G) + 3) / (9 * N))
    T, G = 0.5, 1e6
    assert distill_success_probability(T, G) == pytest.approx(quoted, rel=1e-9)
    assert distill_success_probability(T, G) > 0
