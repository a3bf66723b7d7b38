import math
import itertools
import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings, strategies as st
import util
import pauli_core
from pauli_core import QubitState, ModulationErrors

angles = st.floats(min_value=-0.3, max_value=0.3)
deltas = st.builds(ModulationErrors, angles, angles, angles)
# Any real pure state, anywhere on the X-Z great circle
states = st.floats(min_value=0, max_value=2 * math.pi, exclude_max=True).map(
    lambda theta: QubitState(math.cos(theta), math.sin(theta)))

ZERO = np.array([1.0, 0.0])
ONE = np.array([0.0, 1.0])
PLUS = np.array([1.0, 1.0]) / math.sqrt(2)
MINUS = np.array([1.0, -1.0]) / math.sqrt(2)


def test_ideal_reference_states():
    zero_z, one_z, zero_x = pauli_core.make_reference_states(ModulationErrors())
    npt.assert_allclose(zero_z.vector(), ZERO, atol=1e-15)
    npt.assert_allclose(one_z.vector(), ONE, atol=1e-15)
    npt.assert_allclose(zero_x.vector(), PLUS, atol=1e-15)


def test_ideal_bloch_vectors():
    zero_z, one_z, zero_x = pauli_core.make_reference_states(ModulationErrors())
    npt.assert_allclose(pauli_core.bloch_vector(zero_z).as_array(), [1, 0, 1], atol=1e-15)
    npt.assert_allclose(pauli_core.bloch_vector(one_z).as_array(), [1, 0, -1], atol=1e-15)
    npt.assert_allclose(pauli_core.bloch_vector(zero_x).as_array(), [1, 1, 0], atol=1e-15)


def test_modulation_error_rotates_zero_x():
    delta = 0.2
    zero_x = pauli_core.make_reference_state('0_X', ModulationErrors(delta3=delta))
    bloch = pauli_core.bloch_vector(zero_x)
    # Rotated by delta away from +X towards +Z
    assert bloch.s_x == pytest.approx(math.cos(delta), abs=1e-14)
    assert bloch.s_z == pytest.approx(math.sin(delta), abs=1e-14)


@given(deltas, deltas)
@settings(max_examples=200)
def test_two_qubit_bloch_factorizes(deltas_a, deltas_b):
    refs_a = pauli_core.make_reference_states(deltas_a)
    refs_b = pauli_core.make_reference_states(deltas_b)
    for state_a, state_b in itertools.product(refs_a, refs_b):
        s = pauli_core.two_qubit_bloch(state_a, state_b)
        single_a = pauli_core.bloch_vector(state_a).as_array()
        single_b = pauli_core.bloch_vector(state_b).as_array()
        npt.assert_allclose(s.as_array(), np.outer(single_a, single_b).ravel(), atol=1e-14)
        # Same coefficients from the 4x4 density operator
        rho = np.kron(state_a.density(), state_b.density())
        npt.assert_allclose(s.as_array(), pauli_core.bloch_from_operator(rho), atol=1e-12)


@given(states, states)
@settings(max_examples=1000)
def test_two_qubit_bloch_factorizes_for_any_states(state_a, state_b):
    single_a = pauli_core.bloch_vector(state_a)
    single_b = pauli_core.bloch_vector(state_b)
    # cos(theta)|0> + sin(theta)|1> has s_x = sin(2 theta), s_z = cos(2 theta)
    theta_a = math.atan2(state_a.amp1, state_a.amp0)
    assert single_a.s_x == pytest.approx(math.sin(2 * theta_a), abs=1e-12)
    assert single_a.s_z == pytest.approx(math.cos(2 * theta_a), abs=1e-12)
    s = pauli_core.two_qubit_bloch(state_a, state_b)
    npt.assert_allclose(s.as_array(), np.outer(single_a.as_array(), single_b.as_array()).ravel(), atol=1e-14)
    rho = np.kron(state_a.density(), state_b.density())
    npt.assert_allclose(s.as_array(), pauli_core.bloch_from_operator(rho), atol=1e-12)




def test_two_qubit_bloch_lookup():
    zero_z, _, zero_x = pauli_core.make_reference_states(ModulationErrors())
    s = pauli_core.two_qubit_bloch(zero_z, zero_x)
    assert s['I', 'I'] == pytest.approx(1.0)
    assert s['Z', 'X'] == pytest.approx(1.0)
    assert s['X', 'Z'] == pytest.approx(0.0, abs=1e-15)


def test_s_matrix_is_kronecker_product():
    refs = pauli_core.make_reference_states(ModulationErrors())
    single = np.array([pauli_core.bloch_vector(state).as_array() for state in refs])
    s_matrix = pauli_core.build_s_matrix(refs, refs)
    assert s_matrix.shape == (9, 9)
    npt.assert_allclose(s_matrix, np.kron(single, single), atol=1e-14)
    assert np.isfinite(np.linalg.cond(s_matrix))
    assert not s_matrix.flags.writeable


@given(deltas, deltas)
@settings(max_examples=100)
def test_s_matrix_invertible_for_small_errors(deltas_a, deltas_b):
    s_matrix = pauli_core.build_s_matrix(
        pauli_core.make_reference_states(deltas_a),
        pauli_core.make_reference_states(deltas_b),
    )
    assert np.linalg.cond(s_matrix) < 1e4


def test_s_matrix_needs_three_states_per_side():
    refs = pauli_core.make_reference_states(ModulationErrors())
    with pytest.raises(util.InputError):
        pauli_core.build_s_matrix(refs[:2], refs)


def test_ideal_virtual_ensemble():
    refs = pauli_core.make_reference_states(ModulationErrors())
    ensemble = pauli_core.build_virtual(refs[:2], refs[:2])
    npt.assert_allclose(ensemble.p_vir, [0.25, 0.25], atol=1e-15)
    npt.assert_allclose(ensemble.p_complement, [0.25, 0.25], atol=1e-15)
    plus_plus = np.kron(PLUS, PLUS)
    minus_minus = np.kron(MINUS, MINUS)
    npt.assert_allclose(ensemble.thetas[0], np.outer(plus_plus, plus_plus), atol=1e-15)
    npt.assert_allclose(ensemble.thetas[1], np.outer(minus_minus, minus_minus), atol=1e-15)
    # PAULI_PAIRS order: II, IX, IZ, XI, XX, XZ, ZI, ZX, ZZ
    npt.assert_allclose(ensemble.s_vir[0], [1, 1, 0, 1, 1, 0, 0, 0, 0], atol=1e-14)
    npt.assert_allclose(ensemble.s_vir[1], [1, -1, 0, -1, 1, 0, 0, 0, 0], atol=1e-14)


def _partial_trace_oracle(ref_a_z, ref_b_z):
    """Unnormalized kept states from an explicit 16-dimensional state vector."""
    ancilla = (ZERO, ONE)
    psi = sum(
        0.5 * np.kron(np.kron(ancilla[j], ancilla[s]), np.kron(ref_a_z[j].vector(), ref_b_z[s].vector()))
        for j, s in itertools.product(range(2), repeat=2)
    )
    x_bras = (PLUS, MINUS)
    kept = []
    for x in range(2):
        projector = np.kron(np.kron(x_bras[x], x_bras[x]), np.eye(4))
        v = projector @ psi
        kept.append(np.outer(v, v))
    return kept


@given(deltas, deltas)
@settings(max_examples=200)
def test_virtual_states_match_explicit_projection(deltas_a, deltas_b):
    ref_a = pauli_core.make_reference_states(deltas_a)[:2]
    ref_b = pauli_core.make_reference_states(deltas_b)[:2]
    ensemble = pauli_core.build_virtual(ref_a, ref_b)
    for p, theta, expected in zip(ensemble.p_vir, ensemble.thetas, _partial_trace_oracle(ref_a, ref_b)):
        npt.assert_allclose(p * theta, expected, atol=1e-13)
    assert ensemble.p_vir.sum() + ensemble.p_complement.sum() == pytest.approx(1.0, abs=1e-12)


@given(deltas)
@settings(max_examples=100)
def test_virtual_bloch_rows_describe_thetas(deltas_a):
    refs = pauli_core.make_reference_states(deltas_a)[:2]
    ensemble = pauli_core.build_virtual(refs, refs)
    for s_row, theta in zip(ensemble.s_vir, ensemble.thetas):
        rebuilt = sum(
            coefficient * operator
            for coefficient, operator in zip(s_row, pauli_core.PAULI_PAIR_OPERATORS)
        ) / 4
        npt.assert_allclose(rebuilt, theta, atol=1e-13)


def test_degenerate_virtual_state():
    same = QubitState(1.0, 0.0)
    refs = pauli_core.make_reference_states(ModulationErrors())
    with pytest.raises(util.DegenerateInputError):
        pauli_core.build_virtual((same, same), refs[:2])


@pytest.mark.parametrize('amps', [(1.0, 1.0), (0.5, 0.5), (float('nan'), 0.0), (1j, 0.0)])
def test_invalid_states(amps):
    with pytest.raises(util.InputError):
        QubitState(*amps)


def test_modulation_error_range():
    ModulationErrors(math.pi / 2 - 1e-6)
    with pytest.raises(util.InputError):
        ModulationErrors(delta2=math.pi / 2)
    with pytest.raises(util.InputError):
        ModulationErrors.uniform(-2.0)


def test_unknown_setting():
    with pytest.raises(util.InputError):
        pauli_core.make_reference_state('1_X', ModulationErrors())
