"""Spin-s Hilbert space primitives.

Amplitude vectors are ordered by magnetic quantum number mu = s, s-1, ..., -s
in the eigenbasis of s_z. Spin is stored as the integer ``two_s`` so that
half-integer spins stay exact. Units have hbar = 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import (
    InvalidDirection,
    InvalidPhases,
    InvalidSampleGrid,
    SpinMismatch,
    ZeroState,
)

UNIT_TOL = 1e-12
GAUGE_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class SpinLabel:
    two_s: int

    def __post_init__(self):
        if int(self.two_s) != self.two_s or self.two_s < 0:
            raise ValueError(f"two_s must be a non-negative integer, got {self.two_s!r}")
        object.__setattr__(self, "two_s", int(self.two_s))

    @property
    def s(self) -> float:
        return self.two_s / 2

    @property
    def dim(self) -> int:
        return self.two_s + 1

    def mus(self) -> np.ndarray:
        """Magnetic quantum numbers s, s-1, ..., -s."""
        return self.s - np.arange(self.dim)


SpinLike = Union[SpinLabel, int]


def as_spin(spin: SpinLike) -> SpinLabel:
    return spin if isinstance(spin, SpinLabel) else SpinLabel(int(spin))


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def gauge_fix(amplitudes: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-modulus amplitude is real and >= 0.

    Ties (within a relative 1e-12) go to the largest mu, i.e. the lowest index.
    """
    amps = np.asarray(amplitudes, dtype=complex)
    mods = np.abs(amps)
    top = mods.max()
    if top == 0:
        return amps.copy()
    k = int(np.flatnonzero(mods >= top * (1 - GAUGE_TIE_RTOL))[0])
    out = amps * (np.conj(amps[k]) / mods[k])
    out[k] = mods[k]
    return out


@dataclass(frozen=True, eq=False)
class PureState:
    """A normalized, gauge-fixed spin-s state in the s_z eigenbasis.

    The constructor normalizes and gauge-fixes whatever amplitudes it is given,
    so ``PureState([1, 1j])`` and ``PureState([1j, -1])`` are the same object
    up to floating point.
    """

    amplitudes: np.ndarray
    spin: SpinLabel = field(init=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size == 0:
            raise ValueError("a state needs at least one amplitude")
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0:
            raise ZeroState("amplitudes vanish or are not finite")
        amps = gauge_fix(amps / norm)
        object.__setattr__(self, "amplitudes", _readonly(amps))
        object.__setattr__(self, "spin", SpinLabel(amps.size - 1))

    @property
    def two_s(self) -> int:
        return self.spin.two_s

    def __repr__(self):
        return f"PureState(two_s={self.two_s}, amplitudes={self.amplitudes.tolist()})"

    def to_json(self) -> dict:
        return {
            "two_s": self.two_s,
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "PureState":
        amps = np.array([complex(re, im) for re, im in obj["amplitudes"]])
        if "two_s" in obj and int(obj["two_s"]) != amps.size - 1:
            raise SpinMismatch(
                f"two_s={obj['two_s']} but {amps.size} amplitudes given"
            )
        return cls(amps)


@dataclass(frozen=True, eq=False)
class Direction:
    n: np.ndarray

    def __post_init__(self):
        n = np.array(self.n, dtype=float).reshape(-1)
        if n.shape != (3,) or not np.all(np.isfinite(n)):
            raise InvalidDirection(f"direction must be a finite 3-vector, got {self.n!r}")
        if abs(np.linalg.norm(n) - 1) > UNIT_TOL:
            raise InvalidDirection(f"direction {n.tolist()} is not unit length")
        object.__setattr__(self, "n", _readonly(n))

    @classmethod
    def normalized(cls, v) -> "Direction":
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidDirection("zero vector has no direction")
        return cls(v / norm)

    def __repr__(self):
        return f"Direction({self.n.tolist()})"

    def to_json(self) -> dict:
        return {"n": [float(c) for c in self.n]}

    @classmethod
    def from_json(cls, obj) -> "Direction":
        return cls(obj["n"] if isinstance(obj, Mapping) else obj)


X = Direction([1.0, 0.0, 0.0])
Y = Direction([0.0, 1.0, 0.0])
Z = Direction([0.0, 0.0, 1.0])
_NAMED = {"x": X, "y": Y, "z": Z}

DirectionLike = Union[Direction, str, Sequence[float], np.ndarray]


def as_direction(axis: DirectionLike) -> Direction:
    if isinstance(axis, Direction):
        return axis
    if isinstance(axis, str):
        try:
            return _NAMED[axis.lower()]
        except KeyError:
            raise InvalidDirection(f"unknown axis name {axis!r}") from None
    return Direction(axis)


@dataclass(frozen=True, eq=False)
class ProbabilityVector:
    spin: SpinLabel
    axis: Direction
    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).reshape(-1)
        if p.size != self.spin.dim:
            raise SpinMismatch(f"expected {self.spin.dim} probabilities, got {p.size}")
        object.__setattr__(self, "p", _readonly(p))


# --- operators -------------------------------------------------------------


@lru_cache(maxsize=None)
def _spin_matrices(two_s: int):
    s = two_s / 2
    mus = s - np.arange(two_s + 1)
    # <mu+1| s_+ |mu> = sqrt(s(s+1) - mu(mu+1)); row index of mu+1 is one above mu
    ladder = np.sqrt(s * (s + 1) - mus[1:] * (mus[1:] + 1))
    s_plus = np.diag(ladder, k=1).astype(complex)
    s_minus = s_plus.conj().T
    sx = (s_plus + s_minus) / 2
    sy = (s_plus - s_minus) / 2j
    sz = np.diag(mus).astype(complex)
    return _readonly(sx), _readonly(sy), _readonly(sz)


def spin_matrices(spin: SpinLike):
    """Return (s_x, s_y, s_z) in the s_z eigenbasis, built from ladder operators."""
    return _spin_matrices(as_spin(spin).two_s)


def spin_component(spin: SpinLike, axis: DirectionLike) -> np.ndarray:
    """The Hermitian matrix n . S."""
    n = as_direction(axis).n
    sx, sy, sz = spin_matrices(spin)
    return n[0] * sx + n[1] * sy + n[2] * sz


@lru_cache(maxsize=4096)
def _eigvecs(two_s: int, n: tuple) -> np.ndarray:
    _, vecs = np.linalg.eigh(spin_component(two_s, n))
    # eigh sorts ascending; flip to mu = s ... -s
    return _readonly(vecs[:, ::-1].copy())


def rotation_operator(spin: SpinLike, axis: DirectionLike, angle) -> np.ndarray:
    """exp(i * angle * n.S), via the eigendecomposition of n.S.

    The spectrum of n.S is known exactly (mu = s ... -s) and is substituted for
    the numerical eigenvalues. ``angle`` may be complex.
    """
    spin = as_spin(spin)
    n = as_direction(axis).n
    vecs = _eigvecs(spin.two_s, tuple(n))
    phases = np.exp(1j * angle * spin.mus())
    return (vecs * phases) @ vecs.conj().T


@lru_cache(maxsize=4096)
def _basis_matrix(two_s: int, n: tuple) -> np.ndarray:
    theta = np.arctan2(np.hypot(n[0], n[1]), n[2])
    phi = np.arctan2(n[1], n[0]) if np.hypot(n[0], n[1]) > 0 else 0.0
    # exp(-i phi s_z) exp(-i theta s_y) carries z onto n
    rot = rotation_operator(two_s, Z, -phi) @ rotation_operator(two_s, Y, -theta)
    return _readonly(rot)


def basis_matrix(spin: SpinLike, axis: DirectionLike) -> np.ndarray:
    """Columns are the eigenvectors |s, mu; n> of n.S, ordered mu = s ... -s.

    Phases follow R(theta, phi) = exp(-i phi s_z) exp(-i theta s_y) acting on the
    z basis, where (theta, phi) are the polar angles of n.
    """
    spin = as_spin(spin)
    return _basis_matrix(spin.two_s, tuple(as_direction(axis).n))


def basis_states(spin: SpinLike, axis: DirectionLike) -> list[PureState]:
    """Eigenstates of n.S as gauge-fixed PureStates (phase convention dropped)."""
    B = basis_matrix(spin, axis)
    return [PureState(B[:, k]) for k in range(B.shape[1])]


# --- measurement -----------------------------------------------------------


def probability_array(state: PureState, axis: DirectionLike) -> np.ndarray:
    B = basis_matrix(state.spin, axis)
    return np.abs(B.conj().T @ state.amplitudes) ** 2


def probabilities(state: PureState, axis: DirectionLike) -> ProbabilityVector:
    """Stern-Gerlach outcome probabilities p(mu) = |<s, mu; n | psi>|^2."""
    axis = as_direction(axis)
    return ProbabilityVector(state.spin, axis, probability_array(state, axis))


def char_function(state: PureState, axis: DirectionLike, alpha) -> complex:
    """m(alpha) = sum_mu exp(i mu alpha) p(mu) along ``axis``."""
    p = probability_array(state, axis)
    return complex(np.sum(np.exp(1j * alpha * state.spin.mus()) * p))


def char_grid(spin: SpinLike) -> np.ndarray:
    """Sample points alpha_j = 2 pi j / (2s + 1) used for inversion."""
    dim = as_spin(spin).dim
    return 2 * np.pi * np.arange(dim) / dim


def invert_char_function(
    samples: Mapping[float, complex], spin: SpinLike, axis: DirectionLike = Z
) -> ProbabilityVector:
    """Recover p(mu) from characteristic-function samples on ``char_grid(spin)``.

    exp(i s alpha) m(alpha) is a polynomial of degree 2s in exp(i alpha), so a
    length-(2s+1) DFT inverts it exactly for integer and half-integer spin.
    """
    spin = as_spin(spin)
    grid = char_grid(spin)
    if len(samples) != spin.dim:
        raise InvalidSampleGrid(f"need {spin.dim} samples, got {len(samples)}")
    alphas = np.array([float(np.real(a)) for a in samples], dtype=float)
    values = np.array(list(samples.values()), dtype=complex)
    wrapped = np.mod(alphas, 2 * np.pi)
    idx = np.rint(wrapped / (2 * np.pi) * spin.dim).astype(int) % spin.dim
    if np.any(np.abs(np.mod(wrapped - grid[idx] + np.pi, 2 * np.pi) - np.pi) > 1e-9):
        raise InvalidSampleGrid("sample points are not on the 2 pi j/(2s+1) grid")
    if len(set(idx.tolist())) != spin.dim:
        raise InvalidSampleGrid("sample points repeat a grid node")
    shifted = np.empty(spin.dim, dtype=complex)
    shifted[idx] = values * np.exp(1j * spin.s * alphas)
    # coefficient k of the polynomial is p at mu = k - s
    coeffs = np.fft.fft(shifted) / spin.dim
    p = coeffs.real[::-1]
    return ProbabilityVector(spin, as_direction(axis), p)


# --- transformations -------------------------------------------------------


def apply_phase_polynomial(state: PureState, axis: DirectionLike, chi) -> PureState:
    """Apply exp(i chi(n.S)): phase chi[k] on the eigenvector with mu = s - k."""
    chi = np.asarray(chi, dtype=float).reshape(-1)
    if chi.size != state.spin.dim:
        raise InvalidPhases(f"need {state.spin.dim} phases, got {chi.size}")
    B = basis_matrix(state.spin, axis)
    return PureState(B @ (np.exp(1j * chi) * (B.conj().T @ state.amplitudes)))


def fidelity(a: PureState, b: PureState) -> float:
    """|<a|b>|, equal to 1 exactly when a and b are the same ray."""
    if a.two_s != b.two_s:
        raise SpinMismatch(f"two_s {a.two_s} vs {b.two_s}")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes))))


def random_state(spin: SpinLike, seed: int | None = None) -> PureState:
    """Draw from the unitarily invariant measure (normalized complex Gaussian)."""
    spin = as_spin(spin)
    rng = np.random.default_rng(seed)
    return PureState(rng.normal(size=spin.dim) + 1j * rng.normal(size=spin.dim))


def time_reversal(state: PureState) -> PureState:
    """T|s,mu> = (-1)^(s-mu) |s,-mu>, with T anti-unitary."""
    signs = (-1.0) ** np.arange(state.spin.dim)
    return PureState((signs * state.amplitudes.conj())[::-1])


def expectation(state: PureState, op: np.ndarray) -> complex:
    return complex(np.vdot(state.amplitudes, op @ state.amplitudes))
