import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qubitamp.amplifier import (
    OUT_H,
    OUT_V,
    AmplifierConfig,
    EntangledQubitAmplifier,
    Policy,
    QubitVacuumInput,
    amplify_closed_form,
    amplify_simulated,
    gain,
    heralded_output,
    low_branch_r2,
    nominal_gain,
    reflectivity_for_gain,
    success_probability,
    sweep_gain_probability,
)
from qubitamp.errors import ParamError, PolicyError, ZeroSuccessError
from qubitamp.fock import VACUUM, FockState

weights = st.floats(0.0, 1.0)
angles = st.floats(0, 2 * math.pi)
refl = st.floats(0.0, 1.0)


def test_gain_law_examples():
    assert gain(1.0) == 1.0
    assert math.isinf(gain(0.0))
    assert gain(1 / math.sqrt(3)) == pytest.approx(0, abs=1e-15)
    assert gain(0.5) == pytest.approx(0.0625)


def test_gain_range():
    with pytest.raises(ParamError):
        gain(1.1)


@given(st.floats(1.0, 1e6))
def test_low_branch_inverts_gain(G):
    r_low, _ = reflectivity_for_gain(G)
    assert gain(r_low) == pytest.approx(G, rel=1e-9)
    assert r_low <= 1 / math.sqrt(3)


@given(st.floats(0.01, 1.0))
def test_both_branches_below_unit_gain(G):
    r_low, r_high = reflectivity_for_gain(G)
    assert r_high is not None and r_high >= 1 / math.sqrt(3)
    assert gain(r_high) == pytest.approx(G, rel=1e-8, abs=1e-12)
    assert gain(r_low) == pytest.approx(G, rel=1e-8)


def test_low_branch_limits():
    assert low_branch_r2(math.inf) == 0.0
    assert low_branch_r2(1.0) == pytest.approx(1 / 9)


def test_feed_forward_rejects_nonzero_r():
    with pytest.raises(PolicyError):
        AmplifierConfig(0.3, Policy.FEED_FORWARD)


def test_zero_success():
    with pytest.raises(ZeroSuccessError):
        amplify_closed_form(QubitVacuumInput(0, 1, 0), AmplifierConfig(1 / math.sqrt(3)))


@given(weights, angles, angles, refl)
def test_closed_form_matches_simulation(w, theta, phi, r):
    inp = QubitVacuumInput.from_vacuum_weight(w, theta, phi)
    try:
        cf = amplify_closed_form(inp, AmplifierConfig(r))
    except ZeroSuccessError:
        return
    sim = amplify_simulated(inp, AmplifierConfig(r))
    assert sim.success_prob == pytest.approx(cf.success_prob, abs=1e-10)
    assert sim.output.fidelity(cf.output) == pytest.approx(1, abs=1e-10)


@given(weights, angles, angles)
def test_feed_forward_matches_simulation(w, theta, phi):
    inp = QubitVacuumInput.from_vacuum_weight(w, theta, phi)
    if inp.qubit_weight < 1e-12:
        return
    cfg = AmplifierConfig(0.0, Policy.FEED_FORWARD)
    cf, sim = amplify_closed_form(inp, cfg), amplify_simulated(inp, cfg)
    assert sim.success_prob == pytest.approx(cf.success_prob, abs=1e-10)
    assert sim.output.fidelity(cf.output) == pytest.approx(1, abs=1e-10)


@given(weights, angles, angles, st.floats(0.05, 1.0))
def test_qubit_state_preserved(w, theta, phi, r):
    """The output qubit keeps the input polarization, up to the sign of the qubit factor."""
    inp = QubitVacuumInput.from_vacuum_weight(w, theta, phi)
    if inp.qubit_weight < 1e-6 or abs(3 * r * r - 1) < 1e-3:
        return
    out = amplify_simulated(inp, AmplifierConfig(r)).output
    qin = np.array([inp.beta_h, inp.beta_v]) / math.sqrt(inp.qubit_weight)
    qout = np.array([out.beta_h, out.beta_v]) / math.sqrt(out.qubit_weight)
    assert abs(np.vdot(qin, qout)) == pytest.approx(1, abs=1e-9)


@given(weights, angles, angles, st.floats(0.05, 1.0))
def test_intensity_ratio_scales_by_gain(w, theta, phi, r):
    inp = QubitVacuumInput.from_vacuum_weight(w, theta, phi)
    if not 1e-6 < w < 1 - 1e-6 or abs(3 * r * r - 1) < 1e-3:
        return
    sim = amplify_simulated(inp, AmplifierConfig(r))
    assert sim.gain == pytest.approx(gain(r), rel=1e-8)


def test_anchor_r_one_is_identity():
    inp = QubitVacuumInput.from_vacuum_weight(0.3, 0.4, 0.2)
    out = amplify_simulated(inp, AmplifierConfig(1.0))
    assert out.success_prob == pytest.approx(1, abs=1e-12)
    assert out.output.fidelity(inp) == pytest.approx(1, abs=1e-12)


def test_r_zero_blocks_multiphoton():
    inp = QubitVacuumInput.from_vacuum_weight(0.5, 0.3)
    rho = heralded_output(inp.as_state(), EntangledQubitAmplifier(0.0))
    multi = sum(v.real for fs, v in rho.diagonal().items() if fs.total >= 2)
    assert multi == pytest.approx(0, abs=1e-12)
    assert set(fs for fs, v in rho.diagonal().items() if abs(v) > 1e-14) <= {
        FockState({OUT_H: 1}), FockState({OUT_V: 1})}


@given(weights, refl)
def test_success_probability_bounds(w, r):
    p = success_probability(r, QubitVacuumInput.from_vacuum_weight(w))
    assert 0 <= p <= 1 + 1e-12


def test_nominal_gain_limit():
    inp = QubitVacuumInput.from_vacuum_weight(0.95)
    assert nominal_gain(0.0, inp) == pytest.approx(20, abs=1e-9)
    assert nominal_gain(1.0, inp) == pytest.approx(1, abs=1e-12)


def test_sweep_picks_better_branch_and_sorts():
    inp = QubitVacuumInput.from_vacuum_weight(0.5)
    rows = sweep_gain_probability(inp, [10.0, 1.0, math.inf])
    assert [r["gain"] for r in rows] == [1.0, 10.0, math.inf]
    assert rows[0]["r"] == pytest.approx(1.0)
    assert rows[0]["success_prob"] == pytest.approx(1.0)
    assert rows[-1]["success_prob"] == pytest.approx(0.125)
    with pytest.raises(ParamError):
        sweep_gain_probability(inp, [0.5])


def test_input_validation():
    with pytest.raises(ParamError):
        QubitVacuumInput(1, 1, 0)
    with pytest.raises(ParamError):
        QubitVacuumInput.normalize(0, 0, 0)
    assert QubitVacuumInput.from_vacuum_weight(1.0).as_state().amplitude(VACUUM) == 1


def test_vacuum_never_heralds_at_r0():
    rho = heralded_output(QubitVacuumInput.from_vacuum_weight(1.0).as_state(), EntangledQubitAmplifier(0.0))
    assert rho.trace() == pytest.approx(0, abs=1e-15)
