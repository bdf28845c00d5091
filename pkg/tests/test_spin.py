import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinrecon.errors import InvalidDirection, InvalidPhases, InvalidSampleGrid, SpinMismatch
from spinrecon.spin import (
    X,
    Y,
    Z,
    Direction,
    PureState,
    apply_phase_polynomial,
    basis_matrix,
    basis_states,
    char_function,
    char_grid,
    fidelity,
    invert_char_function,
    probabilities,
    random_state,
    rotation_operator,
    spin_component,
    spin_matrices,
    time_reversal,
)

two_s_values = st.integers(min_value=0, max_value=10)
directions = st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: np.linalg.norm(v) > 0.1)


def test_fundamental_representation():
    sx, sy, sz = spin_matrices(1)
    np.testing.assert_allclose(sx, [[0, 0.5], [0.5, 0]])
    np.testing.assert_allclose(sy, [[0, -0.5j], [0.5j, 0]])
    np.testing.assert_allclose(sz, np.diag([0.5, -0.5]))


def test_spin_one_matrices():
    sx, sy, sz = spin_matrices(2)
    r = np.sqrt(2) / 2
    np.testing.assert_allclose(sz, np.diag([1, 0, -1]))
    np.testing.assert_allclose(sx, r * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]))
    np.testing.assert_allclose(sy, r * 1j * np.array([[0, -1, 0], [1, 0, -1], [0, 1, 0]]))


@pytest.mark.parametrize("two_s", [1, 2, 3, 4])
def test_spin_matrices_match_sympy(two_s):
    from sympy import Rational
    from sympy.physics.quantum import represent
    from sympy.physics.quantum.constants import hbar
    from sympy.physics.quantum.spin import Jx, Jy, Jz

    j = Rational(two_s, 2)
    ours = spin_matrices(two_s)
    for op, mat in zip((Jx, Jy, Jz), ours):
        ref = np.array(represent(op, j=j).subs(hbar, 1).evalf(), dtype=complex)
        np.testing.assert_allclose(mat, ref, atol=1e-14)


@pytest.mark.parametrize("two_s", range(0, 11))
def test_commutator(two_s):
    sx, sy, sz = spin_matrices(two_s)
    assert np.abs(sx @ sy - sy @ sx - 1j * sz).max() < 1e-12


def test_rotation_identity_and_diagonal():
    for two_s in range(5):
        np.testing.assert_allclose(rotation_operator(two_s, "x", 0.0), np.eye(two_s + 1), atol=1e-14)
    a = 0.83
    np.testing.assert_allclose(
        rotation_operator(1, Z, a), np.diag([np.exp(0.5j * a), np.exp(-0.5j * a)]), atol=1e-14
    )


def test_quarter_turn_about_y_maps_z_basis_to_eigenbasis_of_image_axis():
    R = rotation_operator(2, Y, np.pi / 2)
    S = spin_matrices(2)
    top = R[:, 0]
    n = np.array([np.vdot(top, Si @ top).real for Si in S])  # image of z, from <S>/s
    assert np.isclose(np.linalg.norm(n), 1)
    nS = sum(c * Si for c, Si in zip(n, S))
    for k, mu in enumerate([1, 0, -1]):
        v = R[:, k]
        assert np.abs(nS @ v - mu * v).max() < 1e-12


@settings(max_examples=60, deadline=None)
@given(two_s_values, directions, st.floats(-20, 20))
def test_rotation_unitary(two_s, v, angle):
    R = rotation_operator(two_s, Direction.normalized(v), angle)
    assert np.abs(R.conj().T @ R - np.eye(two_s + 1)).max() < 1e-12
    assert abs(abs(np.linalg.det(R)) - 1) < 1e-10


def test_non_unit_axis_rejected():
    with pytest.raises(InvalidDirection):
        rotation_operator(2, [1.0, 1.0, 0.0], 0.1)


def test_basis_states_z_and_x():
    for k, b in enumerate(basis_states(3, Z)):
        np.testing.assert_allclose(b.amplitudes, np.eye(4)[k], atol=1e-14)
    up, down = basis_states(1, X)
    assert fidelity(up, PureState([1, 1])) == pytest.approx(1)
    assert fidelity(down, PureState([1, -1])) == pytest.approx(1)


@settings(max_examples=40, deadline=None)
@given(two_s_values, directions)
def test_basis_orthonormal_eigenvectors(two_s, v):
    n = Direction.normalized(v)
    B = basis_matrix(two_s, n)
    assert np.abs(B.conj().T @ B - np.eye(two_s + 1)).max() < 1e-12
    nS = spin_component(two_s, n)
    mus = two_s / 2 - np.arange(two_s + 1)
    assert np.abs(nS @ B - B * mus).max() < 1e-12


def test_basis_y_eigen_residual():
    nS = spin_component(2, Y)
    for mu, b in zip([1, 0, -1], basis_states(2, Y)):
        v = b.amplitudes
        assert np.linalg.norm(nS @ v - mu * v) < 1e-12


def test_probability_examples():
    up = PureState([1, 0])
    np.testing.assert_allclose(probabilities(up, Z).p, [1, 0], atol=1e-15)
    np.testing.assert_allclose(probabilities(up, X).p, [0.5, 0.5])
    # small Wigner d at pi/2: (1 + cos)/2, sin/sqrt2, (1 - cos)/2, squared
    np.testing.assert_allclose(probabilities(PureState([1, 0, 0]), X).p, [0.25, 0.5, 0.25])


@settings(max_examples=50, deadline=None)
@given(two_s_values, st.integers(0, 2**31), directions)
def test_probabilities_normalized(two_s, seed, v):
    p = probabilities(random_state(two_s, seed), Direction.normalized(v)).p
    assert abs(p.sum() - 1) < 1e-10
    assert p.min() >= -1e-14


def test_probabilities_phase_convention_free():
    st_ = random_state(4, 3)
    B = basis_matrix(4, Y) * np.exp(1j * np.arange(5))
    np.testing.assert_allclose(np.abs(B.conj().T @ st_.amplitudes) ** 2, probabilities(st_, Y).p)


def test_char_function_examples():
    st_ = random_state(3, 0)
    assert char_function(st_, X, 0.0) == pytest.approx(1)
    a = 1.3
    assert char_function(PureState([1, 0]), Z, a) == pytest.approx(np.exp(0.5j * a))
    # e^{i pi}/4 + 1/2 + e^{-i pi}/4
    assert abs(char_function(PureState([1, 0, 0]), X, np.pi)) < 1e-15


@pytest.mark.parametrize("two_s", range(0, 9))
def test_char_function_is_rotation_expectation(two_s):
    st_ = random_state(two_s, two_s)
    for a in np.linspace(-3, 7, 9):
        for axis in (X, Y, Z):
            ref = np.vdot(st_.amplitudes, rotation_operator(two_s, axis, a) @ st_.amplitudes)
            assert abs(char_function(st_, axis, a) - ref) < 1e-10


def test_invert_examples():
    samples = {a: char_function(PureState([1, 0]), Z, a) for a in char_grid(1)}
    np.testing.assert_allclose(invert_char_function(samples, 1).p, [1, 0], atol=1e-15)
    with pytest.raises(InvalidSampleGrid):
        invert_char_function({0.0: 1.0}, 1)
    with pytest.raises(InvalidSampleGrid):
        invert_char_function({0.0: 1.0, 1.0: 0.5}, 1)


@pytest.mark.parametrize("two_s", range(0, 11))
def test_invert_round_trip(two_s):
    st_ = random_state(two_s, 10 + two_s)
    p = probabilities(st_, Y).p
    samples = {a: char_function(st_, Y, a) for a in char_grid(two_s)}
    assert np.abs(invert_char_function(samples, two_s, Y).p - p).max() < 1e-10
    # shuffled sample points, shifted by the 4 pi period, are accepted
    shifted = {a + 4 * np.pi * (i % 2): samples[a] for i, a in enumerate(reversed(list(samples)))}
    assert np.abs(invert_char_function(shifted, two_s).p - p).max() < 1e-10


def test_phase_polynomial_trivial_cases():
    st_ = random_state(3, 5)
    assert fidelity(apply_phase_polynomial(st_, X, np.zeros(4)), st_) == pytest.approx(1)
    same = apply_phase_polynomial(st_, Y, np.full(4, 1.7))
    np.testing.assert_allclose(same.amplitudes, st_.amplitudes, atol=1e-12)
    with pytest.raises(InvalidPhases):
        apply_phase_polynomial(st_, X, np.zeros(3))


@pytest.mark.parametrize("two_s", range(1, 5))
def test_phase_polynomial_preserves_own_axis(two_s):
    rng = np.random.default_rng(two_s)
    changed = 0
    for trial in range(100):
        st_ = random_state(two_s, 1000 * two_s + trial)
        axis = Direction.normalized(rng.normal(size=3))
        out = apply_phase_polynomial(st_, axis, rng.uniform(0, 2 * np.pi, two_s + 1))
        assert np.abs(probabilities(out, axis).p - probabilities(st_, axis).p).max() < 1e-12
        other = Z if abs(axis.n[2]) < 0.9 else X
        changed += np.abs(probabilities(out, other).p - probabilities(st_, other).p).max() > 1e-6
    assert changed > 90


def test_fidelity():
    a = random_state(2, 1)
    assert fidelity(a, a) == pytest.approx(1)
    e0, e1 = basis_states(2, Z)[:2]
    assert fidelity(e0, e1) < 1e-15
    raw = np.exp(0.4j) * a.amplitudes
    assert fidelity(PureState(raw), a) == pytest.approx(1)
    with pytest.raises(SpinMismatch):
        fidelity(a, random_state(3, 1))


def test_gauge_convention():
    st_ = PureState([0.3j, -0.9, 0.3])
    assert st_.amplitudes[1] == pytest.approx(0.9 / np.linalg.norm([0.3, 0.9, 0.3]))
    assert st_.amplitudes[1].imag == 0
    tie = PureState([1j, 1j])
    assert tie.amplitudes[0] == pytest.approx(2**-0.5)


def test_random_state():
    np.testing.assert_array_equal(random_state(4, 9).amplitudes, random_state(4, 9).amplitudes)
    np.testing.assert_array_equal(random_state(0, 1).amplitudes, [1])
    mean = np.mean([probabilities(random_state(2, s), Z).p for s in range(1000)], axis=0)
    assert np.abs(mean - 1 / 3).max() < 0.05


def test_time_reversal():
    assert fidelity(time_reversal(PureState([1, 0])), PureState([0, 1])) == pytest.approx(1)
    for two_s in range(0, 7):
        st_ = random_state(two_s, two_s)
        assert fidelity(time_reversal(time_reversal(st_)), st_) == pytest.approx(1)
    st_ = random_state(3, 42)
    np.testing.assert_allclose(
        np.abs(time_reversal(st_).amplitudes), np.abs(st_.amplitudes)[::-1], atol=1e-15
    )


def test_state_json_round_trip():
    st_ = random_state(3, 8)
    back = PureState.from_json(st_.to_json())
    np.testing.assert_allclose(back.amplitudes, st_.amplitudes, atol=1e-15)
    with pytest.raises(SpinMismatch):
        PureState.from_json({"two_s": 2, "amplitudes": [[1, 0], [0, 0]]})
