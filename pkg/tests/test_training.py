from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isingcdr.circuits import RZ, SX, Circuit, circuit_stats, rz_matrix, trotter_circuit, trotter_step
from isingcdr.model import ModelParams, ProductState, TimeGrid
from isingcdr.simulator import Backend, NoiseModel
from isingcdr.training import (
    EmptySelectionError,
    SubstitutionPolicy,
    TrainingRecord,
    TrainingSet,
    dispersion,
    gate_distance,
    make_training_circuit,
    make_training_set,
    make_training_sets,
    replacement_choice,
    replacement_probabilities,
    selection_weights,
)

FIG1 = ModelParams(J=1.0, hX=0.5, hZ=0.9, L=9)
# brute-force minimum over global phase of ||RZ(pi/4) - e^{i phi} I||_F^2
DIST2_PI4_0 = 0.30448186995485305
# normalised exp(-d^2 / 0.25) over n = 0..3 at theta = 3 pi / 4
P_3PI4 = [8.67518944e-05, 0.499913248, 0.499913248, 8.67518944e-05]


def trace_distance2(theta: float, n: int) -> float:
    s_n = np.diag([1, 1j**n])
    return 4 - 2 * abs(np.trace(rz_matrix(theta).conj().T @ s_n))


@pytest.mark.parametrize("theta,n,d", [(0.0, 0, 0.0), (math.pi / 2, 1, 0.0), (-math.pi / 2, 3, 0.0), (math.pi, 2, 0.0)])
def test_distance_zero_on_equivalent_gates(theta, n, d):
    assert gate_distance(theta, n) == pytest.approx(d, abs=1e-7)


def test_distance_frozen_value():
    assert gate_distance(math.pi / 4, 0) ** 2 == pytest.approx(DIST2_PI4_0, abs=1e-14)


@given(st.floats(-10, 10), st.integers(0, 3))
def test_distance_matches_trace_formula(theta, n):
    assert gate_distance(theta, n) ** 2 == pytest.approx(trace_distance2(theta, n), abs=1e-12)


@given(st.floats(-10, 10), st.integers(0, 3))
def test_distance_is_phase_invariant_under_2pi_shift(theta, n):
    assert gate_distance(theta + 2 * math.pi, n) == pytest.approx(gate_distance(theta, n), abs=1e-9)


def test_replacement_distribution_frozen():
    np.testing.assert_allclose(replacement_probabilities(3 * math.pi / 4), P_3PI4, rtol=1e-8)


@given(st.floats(-10, 10), st.floats(0.05, 3))
def test_replacement_probabilities_normalised(theta, sigma):
    p = replacement_probabilities(theta, sigma)
    assert p.sum() == pytest.approx(1.0, abs=1e-12) and np.all(p >= 0)


@pytest.mark.parametrize("theta,best", [(0.0, 0), (math.pi / 2, 1), (math.pi, 2), (-math.pi / 2, 3)])
def test_most_probable_replacement(theta, best):
    assert int(np.argmax(replacement_probabilities(theta))) == best


def test_replacement_choice_deterministic_and_distributed():
    a = [replacement_choice(0.3, np.random.default_rng(5)) for _ in range(3)]
    assert len(set(a)) == 1
    rng = np.random.default_rng(1)
    draws = np.bincount([replacement_choice(3 * math.pi / 4, rng) for _ in range(4000)], minlength=4)
    assert abs(draws[1] / 4000 - 0.5) < 4 * math.sqrt(0.25 / 4000)


def test_selection_weights_uniform_for_equal_angles():
    c = Circuit(2, (RZ(0, 0.3), SX(0), RZ(1, 0.3), RZ(0, 0.3)))
    np.testing.assert_allclose(selection_weights(c), [1 / 3] * 3)


def test_selection_weight_prefers_near_clifford():
    c = Circuit(1, (RZ(0, math.pi / 2 + 1e-3), RZ(0, math.pi / 4)))
    w = selection_weights(c)
    assert w[0] > w[1]


def test_selection_weights_step_circuit():
    c = trotter_step(FIG1, 0.5)
    w = selection_weights(c)

    def raw(theta):
        return sum(math.exp(-trace_distance2(theta, n) / 0.25) for n in range(4))

    angles = [c.ops[k].angle for k in c.non_clifford_indices()]
    expected = np.array([raw(a) for a in angles])
    np.testing.assert_allclose(w, expected / expected.sum(), rtol=1e-12)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert sorted(set(np.round(angles, 12))) == sorted(
        set(np.round([-0.9 - math.pi / 2, 0.5 + math.pi, -1.0], 12))
    )


def test_empty_selection():
    with pytest.raises(EmptySelectionError):
        selection_weights(Circuit(1, (SX(0),)))


def test_policy_validation_and_target():
    with pytest.raises(ValueError):
        SubstitutionPolicy(sigma=0)
    with pytest.raises(ValueError):
        SubstitutionPolicy(fractionReplaced=0)
    with pytest.raises(ValueError):
        SubstitutionPolicy(method=3)
    assert SubstitutionPolicy().target(26) == 13
    assert SubstitutionPolicy().target(416) == 50
    assert SubstitutionPolicy(nonCliffordCap=0).target(26) == 0


def test_clifford_circuit_unchanged():
    c = trotter_step(ModelParams(hX=0.0, hZ=0.0, L=3), 0.25 * math.pi)
    assert circuit_stats(c).nonCliffordCount == 0
    assert make_training_circuit(c, SubstitutionPolicy()) is c


@pytest.mark.parametrize("method", [1, 2])
@pytest.mark.parametrize("steps,remain", [(1, 13), (16, 50)])
def test_remaining_count(method, steps, remain):
    c = trotter_circuit(FIG1, TimeGrid(0.25, steps))
    t = make_training_circuit(c, SubstitutionPolicy(method=method, seed=3), circuitId=7)
    assert circuit_stats(t).nonCliffordCount == remain
    assert circuit_stats(t).cnotCount == circuit_stats(c).cnotCount


def test_method2_survivors_occupy_earliest_layers():
    c = trotter_circuit(FIG1, TimeGrid(0.25, 16))
    t = make_training_circuit(c, SubstitutionPolicy(method=2, seed=1))
    layers = c.layers()
    orig = set(c.non_clifford_indices())
    kept = set(t.non_clifford_indices())
    replaced = orig - kept
    assert max(layers[k] for k in kept) <= min(layers[k] for k in replaced)


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1000), st.sampled_from([1, 2]))
def test_target_met_and_deterministic(steps, seed, method):
    c = trotter_circuit(ModelParams(hX=0.5, hZ=0.9, L=5), TimeGrid(0.3, steps))
    pol = SubstitutionPolicy(method=method, seed=seed)
    a = make_training_circuit(c, pol, 2)
    assert a == make_training_circuit(c, pol, 2)
    n = circuit_stats(c).nonCliffordCount
    assert circuit_stats(a).nonCliffordCount == pol.target(n)
    # replaced gates are RZ(n pi/2) on the same qubit
    for g0, g1 in zip(c.ops, a.ops):
        assert g0.kind == g1.kind and g0.qubits == g1.qubits
        if g0.angle != g1.angle:
            assert g1.is_clifford and not g0.is_clifford


def test_different_ids_give_different_circuits():
    c = trotter_circuit(FIG1, TimeGrid(0.5, 2))
    pol = SubstitutionPolicy(seed=0)
    assert len({make_training_circuit(c, pol, k).to_text() for k in range(10)}) > 1


# -- training sets ---------------------------------------------------------


def test_single_record_without_noise():
    c = trotter_step(ModelParams(hX=0.5, hZ=0.9, L=4), 0.5)
    b = Backend(ProductState.all_up(4), NoiseModel(), shots=None)
    ts = make_training_set(c, SubstitutionPolicy(), b, "Z2", count=1, noiseLevels=(1, 3))
    assert len(ts) == 1
    np.testing.assert_allclose(ts.x[0], ts.y[0], atol=1e-12)


def test_global_depolarising_records_shrink_exactly():
    c = trotter_circuit(ModelParams(hX=0.5, hZ=0.9, L=5), TimeGrid(0.5, 2))
    b = Backend(ProductState.all_up(5), NoiseModel(globalEps=0.2), shots=None)
    ts = make_training_set(c, SubstitutionPolicy(), b, "Z3", count=8, noiseLevels=(1, 3))
    np.testing.assert_allclose(ts.level_column(1), 0.8 * ts.y, atol=1e-12)
    np.testing.assert_allclose(ts.level_column(3), 0.8**3 * ts.y, atol=1e-12)
    assert np.all(np.abs(ts.y) <= 1)


def test_multi_observable_sets_share_circuits():
    c = trotter_step(ModelParams(hX=0.5, hZ=0.9, L=4), 0.5)
    b = Backend(ProductState.all_up(4), NoiseModel(p2=0.02), shots=1024)
    sets = make_training_sets(c, SubstitutionPolicy(seed=2), b, ["Z1", "Z2"], count=4)
    single = make_training_set(c, SubstitutionPolicy(seed=2), b, "Z2", count=4)
    np.testing.assert_array_equal(sets["Z2"].x, single.x)
    np.testing.assert_array_equal(sets["Z2"].y, single.y)
    assert sets["Z1"].observableId == "Z1"


def test_training_set_csv_round_trip():
    ts = TrainingSet(
        [TrainingRecord(0, [0.1, 0.05], 0.2), TrainingRecord(3, [-0.3, 0.01], -0.5)], (1, 3), "Z5"
    )
    text = ts.to_csv()
    assert text.splitlines()[0] == "circuitId,level,noisyValue,exactValue,observableId"
    back = TrainingSet.from_csv(text)
    np.testing.assert_array_equal(back.x, ts.x)
    np.testing.assert_array_equal(back.y, ts.y)
    assert back.noiseLevels == (1, 3)


def test_record_shape_checked():
    with pytest.raises(ValueError):
        TrainingSet([TrainingRecord(0, [0.1], 0.2)], (1, 3), "Z1")


def test_dispersion_arithmetic():
    one = TrainingSet([TrainingRecord(0, [0.3], 0.4)], (1,), "Z1")
    assert dispersion(one, 0.3, 0.4) == 0.0
    two = TrainingSet([TrainingRecord(0, [1.0], 0.0), TrainingRecord(1, [0.0], 3.0)], (1,), "Z1")
    assert dispersion(two, 0.0, 0.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        dispersion(TrainingSet([], (1,), "Z1"), 0, 0)
