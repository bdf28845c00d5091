import math

import numpy as np
import pytest

from spinrecon.errors import CoplanarAxes, InvalidShotCount, OracleTooExpensive, SpinMismatch
from spinrecon.majorana import RootSet, state_from_roots
from spinrecon.spin import PureState, ProbabilityVector, X, Y, Z, basis_matrix, fidelity, random_state
from spinrecon.tomography import (
    ORTHOGONAL,
    DataSet,
    ReconVerdict,
    brute_force_oracle,
    conjugate_partner_check,
    noise_sweep,
    reconstruct,
    residual,
    simulate_dataset,
    sweep_to_csv,
    validate_axes,
)

A = math.sqrt(0.91 / 2)
SKEW = ((0, 0, 1), (1, 0, 0), (A, 0.3, A))


def test_validate_axes_examples():
    assert validate_axes([X, Y, Z]).triple_product == pytest.approx(1)
    with pytest.raises(CoplanarAxes):
        validate_axes([X, Y, np.array([1, 1, 0]) / np.sqrt(2)])
    t = validate_axes([X, Y, np.ones(3) / np.sqrt(3)])
    assert t.triple_product == pytest.approx(1 / np.sqrt(3))
    assert abs(validate_axes(SKEW).triple_product) == pytest.approx(0.3)


def test_simulate_exact_spin_half():
    d = simulate_dataset(PureState([1, 0]))
    np.testing.assert_allclose(d.arrays(), [[0.5, 0.5], [0.5, 0.5], [1, 0]], atol=1e-15)
    assert d.exact


def test_simulate_shots_close_to_exact():
    d = simulate_dataset(PureState([1, 0]), shots=10**6, seed=4)
    np.testing.assert_allclose(d.arrays(), [[0.5, 0.5], [0.5, 0.5], [1, 0]], atol=0.005)
    again = simulate_dataset(PureState([1, 0]), shots=10**6, seed=4)
    np.testing.assert_array_equal(d.arrays(), again.arrays())


def test_simulate_normalized_and_validated():
    d = simulate_dataset(random_state(2, 3))
    assert np.abs(d.arrays().sum(axis=1) - 1).max() < 1e-12
    with pytest.raises(InvalidShotCount):
        simulate_dataset(random_state(2, 3), shots=0)


def test_residual_examples():
    st_ = random_state(4, 1)
    d = simulate_dataset(st_)
    assert residual(st_, d) < 1e-20
    assert residual(PureState(st_.amplitudes * np.exp(0.7j)), d) == pytest.approx(residual(st_, d), abs=1e-25)
    top = simulate_dataset(PureState([1, 0, 0, 0]))
    assert residual(PureState([0, 0, 0, 1]), top) >= 2
    with pytest.raises(SpinMismatch):
        residual(PureState([1, 0]), top)


def test_residual_axis_permutation():
    st_, other = random_state(3, 5), random_state(3, 6)
    d = simulate_dataset(st_, SKEW)
    for order in ((1, 2, 0), (2, 1, 0)):
        axes = validate_axes([SKEW[k] for k in order])
        perm = DataSet(d.spin, axes, tuple(d.p[k] for k in order))
        assert residual(other, perm) == pytest.approx(residual(other, d), rel=1e-12)


def test_reconstruct_bloch():
    rng = np.random.default_rng(2)
    for _ in range(5):
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        # spin-1/2 state with Bloch vector n, in (up, down) order
        th, ph = np.arccos(n[2]), np.arctan2(n[1], n[0])
        st_ = PureState([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)])
        d = simulate_dataset(st_)
        np.testing.assert_allclose(d.arrays()[:, 0], (1 + n) / 2, atol=1e-12)
        res = reconstruct(d)
        assert res.verdict is ReconVerdict.UNIQUE
        assert fidelity(res.best.state, st_) > 1 - 1e-10


def test_reconstruct_spin_two():
    st_ = random_state(4, 42)
    res = reconstruct(simulate_dataset(st_), restarts=50, reference=st_)
    assert res.verdict is ReconVerdict.UNIQUE
    assert res.best.fidelity_to_reference >= 1 - 1e-8
    assert res.diagnostics["restarts"] == 50
    assert res.to_json()["verdict"] == "UNIQUE"


def test_reconstruct_exceptional_matches_oracle():
    st_ = state_from_roots(RootSet.of([1 + 2j, -1 + 4j]))
    d = simulate_dataset(st_)
    res = reconstruct(d)
    oracle = brute_force_oracle(d)
    assert len(res.candidates) == len(oracle)
    for c in res.candidates:
        assert max(fidelity(c.state, o.state) for o in oracle) >= 1 - 1e-8


def test_candidates_reproduce_moduli():
    st_ = random_state(6, 8)
    d = simulate_dataset(st_, SKEW)
    res = reconstruct(d)
    tol = math.sqrt(res.diagnostics["accept_tol"])
    for c in res.candidates:
        for axis, pv in zip(d.axes, d.p):
            mod = np.abs(basis_matrix(6, axis).conj().T @ c.state.amplitudes)
            assert np.abs(mod - np.sqrt(pv.p)).max() <= tol


def test_reconstruct_failed_on_inconsistent_data():
    spin = PureState([1, 0]).spin
    pvs = tuple(ProbabilityVector(spin, a, [1, 0]) for a in ORTHOGONAL)
    res = reconstruct(DataSet(spin, ORTHOGONAL, pvs))
    assert res.verdict is ReconVerdict.FAILED
    assert res.candidates == []


def test_reconstruct_deterministic():
    d = simulate_dataset(random_state(5, 2))
    a, b = reconstruct(d, seed=3), reconstruct(d, seed=3)
    np.testing.assert_array_equal(a.best.state.amplitudes, b.best.state.amplitudes)


def test_reconstruct_threads_agree(monkeypatch):
    d = simulate_dataset(random_state(5, 2))
    serial = reconstruct(d, seed=1)
    monkeypatch.setenv("SPINRECON_THREADS", "4")
    threaded = reconstruct(d, seed=1)
    assert threaded.verdict is serial.verdict
    assert fidelity(threaded.best.state, serial.best.state) > 1 - 1e-12


def test_conjugate_partner_examples():
    real = PureState([0.3, -0.5, 0.8, 0.1])
    chk = conjugate_partner_check(real, simulate_dataset(real))
    assert not chk["is_partner"]
    assert fidelity(chk["partner"], real) == pytest.approx(1)
    top = PureState([1, 0, 0])
    assert not conjugate_partner_check(top, simulate_dataset(top))["is_partner"]


def test_conjugate_partner_against_oracle():
    st_ = PureState(np.array([1, 1j, 1]) / np.sqrt(3))
    d = simulate_dataset(st_)
    chk = conjugate_partner_check(st_, d)
    oracle = brute_force_oracle(d)
    reproduced = any(fidelity(o.state, chk["partner"]) >= 1 - 1e-8 for o in oracle)
    distinct = fidelity(chk["partner"], st_) < 1 - 1e-8
    assert chk["is_partner"] == (reproduced and distinct)
    assert chk["is_partner"] and len(oracle) == 2
    assert chk["odd_sy_moments_vanish"]
    assert abs(chk["sy_expectation"]) < 1e-10 and abs(chk["sy3_expectation"]) < 1e-10


def test_generic_state_has_no_partner():
    st_ = random_state(2, 9)
    chk = conjugate_partner_check(st_, simulate_dataset(st_))
    assert not chk["is_partner"]
    assert not chk["odd_sy_moments_vanish"]


def test_oracle_examples():
    d = simulate_dataset(PureState([0.6, 0.8j]))
    assert len(brute_force_oracle(d, 90)) == 1
    st_ = random_state(2, 1)
    d = simulate_dataset(st_)
    oracle = brute_force_oracle(d, 120)
    res = reconstruct(d)
    assert len(oracle) == 1 == len(res.candidates)
    assert fidelity(oracle[0].state, st_) > 1 - 1e-8
    with pytest.raises(OracleTooExpensive):
        brute_force_oracle(simulate_dataset(random_state(3, 0)))


def test_noise_sweep_edges():
    st_ = random_state(2, 4)
    assert noise_sweep(st_, repeats=0) == []
    rows = noise_sweep(st_, shot_grid=[None], repeats=3)
    assert rows[0]["shots"] == "inf"
    assert rows[0]["median_infidelity"] < 1e-8
    csv = sweep_to_csv(rows)
    assert csv.splitlines()[0] == "shots,median_infidelity,q25,q75"


def test_dataset_json_round_trip():
    d = simulate_dataset(random_state(3, 1), SKEW, shots=(100, 200, 300), seed=2)
    back = DataSet.from_json(d.to_json())
    np.testing.assert_array_equal(back.arrays(), d.arrays())
    assert back.shots == (100, 200, 300)
