"""Majorana (stellar) representation of spin-s pure states.

A state is encoded by the 2s zeroes of

    f(z) = sum_mu (-z)^(mu+s) psi_mu / N_mu,   N_mu = sqrt((s-mu)! (s+mu)! / (2s)!)

counted with multiplicity. When the top coefficients vanish the missing zeroes
sit at the point at infinity, represented by :data:`INF`.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from math import comb
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyRecombination, InvalidSampleGrid, SpinMismatch, ZeroState
from .spin import PureState, SpinLabel, SpinLike, as_spin, char_grid

DEGREE_DROP_RTOL = 1e-12
ROOT_MATCH_TOL = 1e-8


class _Infinity:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_inf(root) -> bool:
    return root is INF


def _sort_key(root):
    if is_inf(root):
        return (1, 0.0, 0.0)
    return (0, root.real, root.imag)


def binomial_weights(spin: SpinLike) -> np.ndarray:
    """N_mu for mu = s ... -s."""
    spin = as_spin(spin)
    n = spin.two_s
    return np.array([1 / np.sqrt(comb(n, k)) for k in range(n + 1)])


@dataclass(frozen=True, eq=False)
class RootSet:
    """Multiset of 2s points on the Riemann sphere, stored canonically sorted."""

    spin: SpinLabel
    roots: tuple

    def __post_init__(self):
        roots = tuple(INF if is_inf(r) else complex(r) for r in self.roots)
        if len(roots) != self.spin.two_s:
            raise SpinMismatch(
                f"two_s={self.spin.two_s} needs {self.spin.two_s} roots, got {len(roots)}"
            )
        object.__setattr__(self, "roots", tuple(sorted(roots, key=_sort_key)))

    @classmethod
    def of(cls, roots: Iterable) -> "RootSet":
        roots = tuple(roots)
        return cls(SpinLabel(len(roots)), roots)

    @property
    def finite(self) -> list[complex]:
        return [r for r in self.roots if not is_inf(r)]

    @property
    def n_inf(self) -> int:
        return sum(is_inf(r) for r in self.roots)

    def same_multiset(self, other: "RootSet", tol: float = ROOT_MATCH_TOL) -> bool:
        if self.spin != other.spin or self.n_inf != other.n_inf:
            return False
        return _match_multisets(self.finite, other.finite, tol)

    def __repr__(self):
        return f"RootSet({list(self.roots)!r})"

    def to_json(self) -> dict:
        return {
            "two_s": self.spin.two_s,
            "roots": ["inf" if is_inf(r) else [r.real, r.imag] for r in self.roots],
        }

    @classmethod
    def from_json(cls, obj) -> "RootSet":
        roots = [INF if r == "inf" else complex(r[0], r[1]) for r in obj["roots"]]
        return cls(SpinLabel(int(obj["two_s"])), tuple(roots))


def _match_multisets(a: Sequence[complex], b: Sequence[complex], tol: float) -> bool:
    # Sorted comparison is fragile when real parts nearly tie, so match greedily
    # by per-component closeness instead.
    if len(a) != len(b):
        return False
    unused = list(b)
    for r in a:
        for j, q in enumerate(unused):
            if abs(r.real - q.real) <= tol and abs(r.imag - q.imag) <= tol:
                del unused[j]
                break
        else:
            return False
    return True


# --- state <-> roots -------------------------------------------------------


def polynomial_coefficients(state: PureState) -> np.ndarray:
    """Coefficients of f(z) in ascending powers of z, index k = mu + s."""
    n = state.two_s
    k = np.arange(n + 1)
    # amplitude index of mu = k - s is 2s - k
    psi = state.amplitudes[::-1]
    return (-1.0) ** k * psi / binomial_weights(state.spin)[::-1]


def roots_from_state(state: PureState) -> RootSet:
    """Majorana roots of ``state`` via companion-matrix eigenvalues."""
    if state.two_s == 0:
        return RootSet(state.spin, ())
    c = polynomial_coefficients(state)
    scale = np.abs(c).max()
    if scale == 0:
        raise ZeroState("all amplitudes vanish")
    live = np.flatnonzero(np.abs(c) >= DEGREE_DROP_RTOL * scale)
    degree = int(live[-1])
    c = c[: degree + 1]
    roots = np.roots(c[::-1]) if degree > 0 else np.array([], dtype=complex)
    roots = np.array([_newton_polish(c, r) for r in roots], dtype=complex)
    return RootSet(state.spin, tuple(roots) + (INF,) * (state.two_s - degree))


def _newton_polish(c: np.ndarray, z: complex) -> complex:
    """One Newton step on f (|z| <= 1) or on the reversed polynomial (|z| > 1)."""
    if abs(z) <= 1:
        p = np.polynomial.polynomial.polyval(z, c)
        dp = np.polynomial.polynomial.polyval(z, np.polynomial.polynomial.polyder(c))
        return z - p / dp if dp != 0 else z
    w = 1 / z
    rc = c[::-1]
    p = np.polynomial.polynomial.polyval(w, rc)
    dp = np.polynomial.polynomial.polyval(w, np.polynomial.polynomial.polyder(rc))
    if dp == 0:
        return z
    w = w - p / dp
    return 1 / w if w != 0 else z


def spinor_from_root(root) -> np.ndarray:
    """Unit spinor (Psi_+, Psi_-) with Psi_- / Psi_+ = root."""
    if is_inf(root):
        return np.array([0.0, 1.0], dtype=complex)
    z = complex(root)
    return np.array([1.0, z]) / np.sqrt(1 + abs(z) ** 2)


def root_from_spinor(spinor, tol: float = 1e-14):
    """Psi_- / Psi_+, or INF when Psi_+ is negligible."""
    plus, minus = complex(spinor[0]), complex(spinor[1])
    if abs(plus) <= tol * np.hypot(abs(plus), abs(minus)):
        return INF
    return minus / plus


def state_from_roots(rootset: RootSet) -> PureState:
    """Inverse of :func:`roots_from_state` up to the global phase."""
    if rootset.spin.two_s == 0:
        return PureState([1.0])
    # prod_r (Psi_-^r + w Psi_+^r) with w = -z, expanded in ascending powers of w;
    # normalized spinors keep large roots and INF well scaled
    poly = np.array([1.0 + 0j])
    for r in rootset.roots:
        plus, minus = spinor_from_root(r)
        poly = np.convolve(poly, np.array([minus, plus]))
    weights = binomial_weights(rootset.spin)
    return PureState(poly[::-1] * weights)


# --- ensembles and recombination ------------------------------------------


class Verdict(str, Enum):
    GENERIC = "GENERIC"
    EXCEPTIONAL = "EXCEPTIONAL"


@dataclass(frozen=True)
class EnsembleTriple:
    """Unordered real parts, imaginary parts and moduli of the roots.

    A root at infinity shows up as ``inf`` in all three.
    """

    xs: tuple
    ys: tuple
    mods: tuple

    def __post_init__(self):
        if not len(self.xs) == len(self.ys) == len(self.mods):
            raise SpinMismatch("ensembles must have equal cardinality")
        for name in ("xs", "ys", "mods"):
            object.__setattr__(self, name, tuple(sorted(float(v) for v in getattr(self, name))))


def ensembles_from_rootset(rootset: RootSet) -> EnsembleTriple:
    xs, ys, mods = [], [], []
    for r in rootset.roots:
        if is_inf(r):
            xs.append(np.inf)
            ys.append(np.inf)
            mods.append(np.inf)
        else:
            xs.append(r.real)
            ys.append(r.imag)
            mods.append(abs(r))
    return EnsembleTriple(tuple(xs), tuple(ys), tuple(mods))


def default_recombine_tol(ens: EnsembleTriple) -> float:
    finite = [m for m in ens.mods if np.isfinite(m)]
    top = max(finite, default=0.0)
    return 1e-9 * (1 + top**2)


def recombine(ens: EnsembleTriple, tol: float | None = None) -> list[RootSet]:
    """Every root multiset whose real parts, imaginary parts and moduli are ``ens``.

    Exhaustive backtracking over pairings x_r <-> y_r' such that x^2 + y^2 equals
    an unused squared modulus within ``tol``. Raises :class:`EmptyRecombination`
    when no pairing is consistent.
    """
    if tol is None:
        tol = default_recombine_tol(ens)
    n_inf = [sum(np.isinf(v) for v in seq) for seq in (ens.xs, ens.ys, ens.mods)]
    if len(set(n_inf)) != 1:
        raise EmptyRecombination("infinite markers do not line up across ensembles")
    xs = [v for v in ens.xs if np.isfinite(v)]
    ys = [v for v in ens.ys if np.isfinite(v)]
    m2 = [v * v for v in ens.mods if np.isfinite(v)]
    n = len(xs)
    spin = SpinLabel(len(ens.xs))
    tail = (INF,) * n_inf[0]

    memo: dict[tuple[int, int, int], list[tuple[complex, ...]]] = {}

    def search(i: int, used_y: int, used_m: int) -> list[tuple[complex, ...]]:
        if i == n:
            return [()]
        key = (i, used_y, used_m)
        if key in memo:
            return memo[key]
        out = []
        tried_y = []
        for j in range(n):
            if used_y >> j & 1:
                continue
            # equal y values lead to identical subtrees
            if any(abs(ys[j] - t) <= tol for t in tried_y):
                continue
            tried_y.append(ys[j])
            r2 = xs[i] ** 2 + ys[j] ** 2
            tried_m = []
            for k in range(n):
                if used_m >> k & 1 or abs(m2[k] - r2) > tol:
                    continue
                if any(abs(m2[k] - t) <= tol for t in tried_m):
                    continue
                tried_m.append(m2[k])
                head = complex(xs[i], ys[j])
                for rest in search(i + 1, used_y | 1 << j, used_m | 1 << k):
                    out.append((head,) + rest)
        memo[key] = out
        return out

    found: list[RootSet] = []
    for combo in search(0, 0, 0):
        candidate = RootSet(spin, combo + tail)
        if not any(candidate.same_multiset(f, ROOT_MATCH_TOL) for f in found):
            found.append(candidate)
    if not found:
        raise EmptyRecombination("no pairing of real and imaginary parts fits the moduli")
    found.sort(key=lambda rs: [_sort_key(r) for r in rs.roots])
    return found


@dataclass(frozen=True)
class GenericityReport:
    verdict: Verdict
    consistent_rootsets: list
    collisions: list

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "consistent_rootsets": [rs.to_json() for rs in self.consistent_rootsets],
            "collisions": [list(c) for c in self.collisions],
        }


def find_collisions(rootset: RootSet, tol: float) -> list[tuple[int, int]]:
    """Index pairs (r, r') with r != r' and x_r = +-y_r' within ``tol``."""
    roots = list(rootset.roots)
    pairs = []
    for a, ra in enumerate(roots):
        for b, rb in enumerate(roots):
            if a == b or is_inf(ra) or is_inf(rb):
                continue
            if abs(abs(ra.real) - abs(rb.imag)) <= tol:
                pairs.append((a, b))
    return pairs


def classify_genericity(state: PureState, tol: float | None = None) -> GenericityReport:
    """GENERIC iff the root ensembles recombine into exactly one root multiset."""
    rootset = roots_from_state(state)
    ens = ensembles_from_rootset(rootset)
    if tol is None:
        tol = default_recombine_tol(ens)
    found = recombine(ens, tol)
    verdict = Verdict.GENERIC if len(found) == 1 else Verdict.EXCEPTIONAL
    return GenericityReport(verdict, found, find_collisions(rootset, tol))


# --- product expectations -------------------------------------------------

_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _axis_name(axis) -> str:
    name = str(axis).lower()
    if name not in _PAULI:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    return name


def su2_rotation(axis, alpha) -> np.ndarray:
    """exp(i alpha sigma_k / 2) = cos(alpha/2) 1 + i sin(alpha/2) sigma_k, basis (+, -)."""
    sigma = _PAULI[_axis_name(axis)]
    return np.cos(alpha / 2) * np.eye(2) + 1j * np.sin(alpha / 2) * sigma


def product_expectation(rootset: RootSet, axis, alpha) -> complex:
    """prod_r <Psi^r| exp(i alpha sigma_k / 2) |Psi^r> for the spinors of the roots.

    ``alpha`` may be complex; the bra is conjugated, the operator is not.
    """
    u = su2_rotation(axis, alpha)
    value = 1.0 + 0j
    for r in rootset.roots:
        v = spinor_from_root(r)
        value *= np.vdot(v, u @ v)
    return complex(value)


def bloch_components(rootset: RootSet, axis) -> list[float]:
    """<Psi^r| sigma_k |Psi^r> for each root, i.e. c_{k,r} / (1 + |z_r|^2)."""
    sigma = _PAULI[_axis_name(axis)]
    return [float(np.vdot(v, sigma @ v).real) for v in map(spinor_from_root, rootset.roots)]


def sample_expectation(rootset: RootSet, axis) -> dict[float, complex]:
    """Product expectations on the grid used by :func:`bloch_from_expectation_zeros`."""
    return {float(a): product_expectation(rootset, axis, a) for a in char_grid(rootset.spin)}


def bloch_from_expectation_zeros(samples, spin: SpinLike) -> list[float]:
    """Recover the per-factor Bloch components {n_r} from samples of M(alpha).

    Each factor cos(alpha/2) + i n_r sin(alpha/2) equals
    exp(-i alpha/2) [(1 + n_r) u + (1 - n_r)] / 2 with u = exp(i alpha), so
    exp(i s alpha) M(alpha) is a degree-2s polynomial in u whose zeroes are
    u_r = -(1 - n_r) / (1 + n_r).
    """
    spin = as_spin(spin)
    grid = char_grid(spin)
    if len(samples) != spin.dim:
        raise InvalidSampleGrid(f"need {spin.dim} samples, got {len(samples)}")
    alphas = np.array(sorted(float(np.real(a)) for a in samples))
    if not np.allclose(alphas, grid, atol=1e-9):
        raise InvalidSampleGrid("samples must sit on alpha_j = 2 pi j / (2s + 1)")
    values = np.array([samples[a] for a in sorted(samples, key=lambda a: float(np.real(a)))])
    shifted = values * np.exp(1j * spin.s * alphas)
    coeffs = np.fft.fft(shifted) / spin.dim  # ascending powers of u
    if spin.two_s == 0:
        return []
    if not np.all(np.isfinite(coeffs)) or np.abs(coeffs).max() == 0:
        raise InvalidSampleGrid("degenerate samples")
    scale = np.abs(coeffs).max()
    # FFT round-off would otherwise split exact multiple roots at u = 0
    coeffs[np.abs(coeffs) <= 1e-14 * scale] = 0
    live = np.flatnonzero(coeffs)
    degree = int(live[-1])
    us = np.roots(coeffs[: degree + 1][::-1]) if degree > 0 else np.array([])
    # a vanishing top coefficient means a factor with n_r = -1
    out = [float(((1 + u) / (1 - u)).real) for u in us] + [-1.0] * (spin.two_s - degree)
    return sorted(out)


def moduli_from_expectation_zeros(samples, spin: SpinLike) -> list[float]:
    """Recover the multiset {|z_r|} from samples of the z-axis product expectation."""
    n = bloch_from_expectation_zeros(samples, spin)
    mods = []
    for nz in n:
        # n_z = (1 - |z|^2) / (1 + |z|^2)
        if nz <= -1 + 1e-15:
            mods.append(np.inf)
        else:
            mods.append(float(np.sqrt(max(0.0, (1 - nz) / (1 + nz)))))
    return sorted(mods)
