"""Tensor-product parent space of 2s spin-1/2 factors.

This is a small-s oracle (2s <= 12): everything is computed with dense
2^(2s)-dimensional vectors. Product basis states are indexed by binary
integers with sigma = +1 as bit 1 and factor r = 1 as the most significant
bit, so each factor is stored in the order (Psi_-, Psi_+) inside a Kronecker
product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import DimensionTooLarge, InvalidArity, OrthogonalToSymmetric, SpinMismatch
from .majorana import (
    ROOT_MATCH_TOL,
    RootSet,
    _match_multisets,
    ensembles_from_rootset,
    is_inf,
    recombine,
    root_from_spinor,
    roots_from_state,
    spinor_from_root,
    su2_rotation,
)
from .spin import PureState, SpinLabel, SpinLike, as_spin, fidelity

MAX_TWO_S = 12
CERTIFY_MAX_TWO_S = 6


def _check_cap(two_s: int, cap: int = MAX_TWO_S):
    if two_s > cap:
        raise DimensionTooLarge(f"two_s={two_s} exceeds the parent-space cap {cap}")


@dataclass(frozen=True, eq=False)
class SymmetricEmbedding:
    spin: SpinLabel
    basis_matrix: np.ndarray

    @property
    def projector(self) -> np.ndarray:
        B = self.basis_matrix
        return B @ B.conj().T


@lru_cache(maxsize=None)
def _embedding(two_s: int) -> np.ndarray:
    dim = 1 << two_s
    popcount = np.array([bin(i).count("1") for i in range(dim)])
    B = np.zeros((dim, two_s + 1))
    for col in range(two_s + 1):
        # column col has mu = s - col, i.e. 2s - col factors pointing up
        members = popcount == two_s - col
        B[members, col] = 1 / np.sqrt(members.sum())
    B.setflags(write=False)
    return B


def symmetric_embedding(spin: SpinLike) -> SymmetricEmbedding:
    """Columns are the symmetrized product states |s, mu>, mu = s ... -s."""
    spin = as_spin(spin)
    _check_cap(spin.two_s)
    return SymmetricEmbedding(spin, _embedding(spin.two_s))


@dataclass(frozen=True, eq=False)
class ParentState:
    """Product state of 2s unit spinors; ``factors[r]`` is (Psi_+, Psi_-) with its phase."""

    spin: SpinLabel
    factors: np.ndarray
    kappas: np.ndarray = field(default=None)

    def __post_init__(self):
        f = np.array(self.factors, dtype=complex).reshape(-1, 2)
        if f.shape[0] != self.spin.two_s:
            raise InvalidArity(f"expected {self.spin.two_s} factors, got {f.shape[0]}")
        norms = np.linalg.norm(f, axis=1)
        if np.any(np.abs(norms - 1) > 1e-12):
            raise ValueError("parent factors must be unit spinors")
        k = np.zeros(f.shape[0]) if self.kappas is None else np.asarray(self.kappas, float)
        f.setflags(write=False)
        object.__setattr__(self, "factors", f)
        object.__setattr__(self, "kappas", k)

    def vector(self) -> np.ndarray:
        _check_cap(self.spin.two_s)
        v = np.ones(1, dtype=complex)
        for plus, minus in self.factors:
            v = np.kron(v, np.array([minus, plus]))
        return v

    def roots(self) -> RootSet:
        return RootSet(self.spin, tuple(root_from_spinor(f) for f in self.factors))

    def permuted(self, order) -> "ParentState":
        order = list(order)
        return ParentState(self.spin, self.factors[order], self.kappas[order])


def _wrap(angle):
    return np.mod(angle, 2 * np.pi)


def parent_from_roots(rootset: RootSet, kappas=None) -> ParentState:
    """Parent whose factor r is exp(i kappa_r) times the spinor of root r.

    The last phase is overwritten so that prod_r exp(i kappa_r) = 1.
    """
    n = rootset.spin.two_s
    kappas = np.zeros(n) if kappas is None else np.array(kappas, dtype=float).reshape(-1)
    if kappas.size != n:
        raise InvalidArity(f"need {n} phases, got {kappas.size}")
    if n:
        kappas[-1] = -kappas[:-1].sum()
    kappas = _wrap(kappas)
    factors = np.array(
        [np.exp(1j * k) * spinor_from_root(r) for k, r in zip(kappas, rootset.roots)],
        dtype=complex,
    ).reshape(n, 2)
    return ParentState(rootset.spin, factors, kappas)


def daughter_of(parent: ParentState) -> tuple[PureState, float]:
    """Project onto the symmetric subspace; return (daughter, N_psi)."""
    if parent.spin.two_s == 0:
        return PureState([1.0]), 1.0
    B = symmetric_embedding(parent.spin).basis_matrix
    proj = B.T @ parent.vector()
    norm = float(np.linalg.norm(proj))
    if norm < 1e-13:
        raise OrthogonalToSymmetric("parent has no symmetric component")
    return PureState(proj), norm


def symmetric_projection(parent: ParentState) -> np.ndarray:
    """The raw coefficients <s, mu | Psi>, mu = s ... -s, without gauge fixing."""
    return symmetric_embedding(parent.spin).basis_matrix.T @ parent.vector()


# --- rotations on the parent space ----------------------------------------

_SWAP = np.array([[0, 1], [1, 0]])


def _factor_matrix(u: np.ndarray) -> np.ndarray:
    """Re-express a 2x2 operator from the (+, -) basis to the (-, +) bit order."""
    return _SWAP @ u @ _SWAP


def apply_local(vector: np.ndarray, two_s: int, ops) -> np.ndarray:
    """Apply ``ops[r]`` (2x2, (+, -) basis) to tensor factor r of ``vector``."""
    t = np.asarray(vector, dtype=complex).reshape((2,) * two_s)
    for r, u in enumerate(ops):
        t = np.moveaxis(np.tensordot(_factor_matrix(u), t, axes=([1], [r])), 0, r)
    return t.reshape(-1)


def product_rotation(spin: SpinLike, axis, alpha) -> np.ndarray:
    """Dense matrix of the tensor power of exp(i alpha sigma_k / 2)."""
    spin = as_spin(spin)
    _check_cap(spin.two_s)
    u = _factor_matrix(su2_rotation(axis, alpha))
    out = np.ones((1, 1), dtype=complex)
    for _ in range(spin.two_s):
        out = np.kron(out, u)
    return out


def tensor_expectation(parent: ParentState, axis, alpha, *, form: str = "contraction") -> complex:
    """<Psi| U_k(alpha) |Psi> with U_k the tensor power of exp(i alpha sigma_k / 2).

    ``form="contraction"`` acts on the full 2^(2s) vector; ``form="product"``
    multiplies the single-factor expectations.
    """
    u = su2_rotation(axis, alpha)
    if form == "product":
        value = 1.0 + 0j
        for f in parent.factors:
            value *= np.vdot(f, u @ f)
        return complex(value)
    if form != "contraction":
        raise ValueError(f"unknown form {form!r}")
    v = parent.vector()
    return complex(np.vdot(v, apply_local(v, parent.spin.two_s, [u] * parent.spin.two_s)))


def equivalence_check(a: ParentState, b: ParentState, tol: float = ROOT_MATCH_TOL) -> bool:
    """True iff both parents carry the same root multiset (order and phases ignored)."""
    if a.spin != b.spin:
        raise SpinMismatch(f"two_s {a.spin.two_s} vs {b.spin.two_s}")
    ra, rb = a.roots(), b.roots()
    if ra.n_inf != rb.n_inf:
        return False
    return _match_multisets(ra.finite, rb.finite, tol)


def parent_count(rootset: RootSet, tol: float = ROOT_MATCH_TOL) -> int:
    """Number of distinct factor orderings, (2s)! / prod(multiplicity!)."""
    groups: list[list] = []
    for r in rootset.roots:
        for g in groups:
            rep = g[0]
            if is_inf(r) and is_inf(rep):
                g.append(r)
                break
            if not is_inf(r) and not is_inf(rep) and abs(r - rep) <= tol:
                g.append(r)
                break
        else:
            groups.append([r])
    count = factorial(rootset.spin.two_s)
    for g in groups:
        count //= factorial(len(g))
    return count


# --- certificate ----------------------------------------------------------


@dataclass
class Check:
    name: str
    max_error: float
    passed: bool

    def to_json(self) -> dict:
        return {"name": self.name, "max_error": self.max_error, "pass": self.passed}


@dataclass
class CertificateReport:
    checks: list
    counterexamples: list
    escape: dict | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and not self.counterexamples

    def to_json(self) -> dict:
        out = {
            "checks": [c.to_json() for c in self.checks],
            "counterexamples": self.counterexamples,
            "verdict": "PASS" if self.passed else "FAIL",
        }
        if self.escape is not None:
            out["escape"] = self.escape
        return out


def _expectation_table(parent: ParentState, alphas) -> np.ndarray:
    return np.array(
        [[tensor_expectation(parent, k, a, form="product") for a in alphas] for k in "xyz"]
    )


def compare_parents(a: ParentState, b: ParentState, alphas=None, tol: float = 1e-10) -> dict:
    """Compare M_x, M_y, M_z of two parents on a grid and test equivalence.

    ``escape`` is set when all three expectation functions agree within ``tol``
    but the parents are not in the same equivalence class.
    """
    if alphas is None:
        alphas = np.linspace(0, 4 * np.pi, 32, endpoint=False)
    diff = np.abs(_expectation_table(a, alphas) - _expectation_table(b, alphas)).max(axis=1)
    same_m = bool(np.all(diff <= tol))
    equivalent = equivalence_check(a, b)
    return {
        "max_diff": {k: float(d) for k, d in zip("xyz", diff)},
        "expectations_match": same_m,
        "equivalent": equivalent,
        "escape": same_m and not equivalent,
    }


def certify_uniqueness_argument(
    state: PureState,
    trials: int = 100,
    seed: int = 0,
    *,
    n_alpha: int = 32,
    tol: float = 1e-10,
    partner: RootSet | None = None,
) -> CertificateReport:
    """Numerical falsification harness for the parent-space uniqueness argument.

    (a) Local phase operators W_k, diagonal in the sigma_k basis of every factor,
        leave <Psi| U_k(alpha) |Psi> unchanged.
    (b) Among random perturbations and permutations of a parent, and among all
        root multisets sharing its real/imaginary/modulus ensembles, any parent
        with matching M_x, M_y, M_z on the grid must be equivalent.

    ``partner`` adds an explicit rootset to compare against; the result is
    stored in ``report.escape``.
    """
    spin = state.spin
    _check_cap(spin.two_s, CERTIFY_MAX_TWO_S)
    alphas = np.linspace(0, 4 * np.pi, n_alpha, endpoint=False)
    rootset = roots_from_state(state)
    seeds = np.random.SeedSequence(seed).spawn(max(trials, 0))
    n = spin.two_s

    commute_err = 0.0
    product_err = 0.0
    daughter_err = 0.0
    counterexamples = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        base = parent_from_roots(rootset, rng.uniform(0, 2 * np.pi, n)).permuted(rng.permutation(n))
        daughter, _ = daughter_of(base)
        daughter_err = max(daughter_err, 1 - fidelity(daughter, state))
        v = base.vector()
        for k in "xyz":
            w_ops = [su2_rotation(k, a) for a in rng.uniform(0, 4 * np.pi, n)]
            wv = apply_local(v, n, w_ops)
            for a in alphas:
                u_ops = [su2_rotation(k, a)] * n
                lhs = np.vdot(wv, apply_local(wv, n, u_ops))
                rhs = np.vdot(v, apply_local(v, n, u_ops))
                commute_err = max(commute_err, abs(lhs - rhs))
                prod = tensor_expectation(base, k, a, form="product")
                product_err = max(product_err, abs(prod - rhs))

        # random candidate partners: permutations, rephasings, perturbed roots
        candidates = [
            parent_from_roots(rootset, rng.uniform(0, 2 * np.pi, n)).permuted(rng.permutation(n))
        ]
        scale = 10.0 ** rng.uniform(-12, 0)
        moved = [
            r if is_inf(r) else r + scale * complex(*rng.normal(size=2)) for r in rootset.roots
        ]
        candidates.append(parent_from_roots(RootSet(spin, tuple(moved))))
        for cand in candidates:
            cmp = compare_parents(base, cand, alphas, tol)
            if cmp["escape"]:
                counterexamples.append(
                    {"roots": cand.roots().to_json(), "max_diff": cmp["max_diff"]}
                )

    base = parent_from_roots(rootset)
    if n:
        for alt in recombine(ensembles_from_rootset(rootset)):
            cmp = compare_parents(base, parent_from_roots(alt), alphas, tol)
            if cmp["escape"]:
                counterexamples.append({"roots": alt.to_json(), "max_diff": cmp["max_diff"]})

    checks = [
        Check("local_phase_invariance", float(commute_err), bool(commute_err <= tol)),
        Check("product_vs_contraction", float(product_err), bool(product_err <= tol)),
        Check("daughter_round_trip", float(daughter_err), bool(daughter_err <= tol)),
    ]
    escape = None
    if partner is not None:
        escape = compare_parents(base, parent_from_roots(partner), alphas, tol)
        escape["partner"] = partner.to_json()
    return CertificateReport(checks, counterexamples, escape)
