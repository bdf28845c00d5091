"""Pure-state reconstruction from Stern-Gerlach intensities along three axes.

The unknowns are the phases of the amplitudes in the eigenbasis of the first
axis; their moduli are fixed by the first intensity vector. Phases are found by
multistart Levenberg-Marquardt on the squared intensity mismatch of the other
two axes, with all restarts advanced together as one batched problem.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import CoplanarAxes, InvalidShotCount, OracleTooExpensive, SpinMismatch
from .majorana import Verdict, classify_genericity
from .spin import (
    DirectionLike,
    ProbabilityVector,
    PureState,
    SpinLabel,
    X,
    Y,
    Z,
    as_direction,
    basis_matrix,
    expectation,
    fidelity,
    probabilities,
    probability_array,
    spin_matrices,
)

log = logging.getLogger(__name__)

VOLUME_TOL = 1e-9
EXACT_ACCEPT_TOL = 1e-18
DEDUP_TOL = 1e-8
PIN_TOL = 1e-14
NOISY_GAP = 10.0


@dataclass(frozen=True, eq=False)
class AxisTriple:
    axes: tuple
    triple_product: float

    def __iter__(self):
        return iter(self.axes)

    def to_json(self) -> list:
        return [[float(c) for c in a.n] for a in self.axes]


def validate_axes(axes: Sequence[DirectionLike], volume_tol: float = VOLUME_TOL) -> AxisTriple:
    """Check that three unit vectors span a volume."""
    dirs = tuple(as_direction(a) for a in axes)
    if len(dirs) != 3:
        raise CoplanarAxes(f"need exactly three axes, got {len(dirs)}")
    vol = float(np.dot(dirs[0].n, np.cross(dirs[1].n, dirs[2].n)))
    if abs(vol) < volume_tol:
        raise CoplanarAxes(f"axes are coplanar (triple product {vol:.3g})")
    return AxisTriple(dirs, vol)


ORTHOGONAL = validate_axes((X, Y, Z))


@dataclass(frozen=True, eq=False)
class DataSet:
    spin: SpinLabel
    axes: AxisTriple
    p: tuple
    shots: tuple | None = None

    def __post_init__(self):
        if len(self.p) != 3:
            raise ValueError("a dataset holds exactly three probability vectors")
        tol = 1e-10 if self.shots is None else 1e-6
        for pv in self.p:
            if pv.spin != self.spin:
                raise SpinMismatch("probability vector spin does not match dataset")
            if abs(pv.p.sum() - 1) > tol:
                raise ValueError(f"probabilities sum to {pv.p.sum()!r}, not 1")
        if self.shots is not None:
            if len(self.shots) != 3 or any(int(n) <= 0 for n in self.shots):
                raise InvalidShotCount(f"shots must be three positive integers, got {self.shots}")

    @property
    def exact(self) -> bool:
        return self.shots is None

    def arrays(self) -> np.ndarray:
        return np.array([pv.p for pv in self.p])

    def to_json(self) -> dict:
        return {
            "two_s": self.spin.two_s,
            "axes": self.axes.to_json(),
            "probabilities": [[float(v) for v in pv.p] for pv in self.p],
            "shots": None if self.shots is None else [int(n) for n in self.shots],
        }

    @classmethod
    def from_json(cls, obj, volume_tol: float = VOLUME_TOL) -> "DataSet":
        spin = SpinLabel(int(obj["two_s"]))
        axes = validate_axes(obj["axes"], volume_tol)
        probs = obj["probabilities"]
        if len(probs) != 3:
            raise ValueError("need three probability vectors")
        pvs = tuple(ProbabilityVector(spin, a, p) for a, p in zip(axes, probs))
        shots = obj.get("shots")
        return cls(spin, axes, pvs, None if shots is None else tuple(int(n) for n in shots))


def simulate_dataset(
    state: PureState,
    axes: AxisTriple | Sequence[DirectionLike] = ORTHOGONAL,
    shots: Sequence[int] | int | None = None,
    seed: int | None = None,
) -> DataSet:
    """Exact probabilities, or multinomial frequencies when ``shots`` is given."""
    if not isinstance(axes, AxisTriple):
        axes = validate_axes(axes)
    exact = [probabilities(state, a) for a in axes]
    if shots is None:
        return DataSet(state.spin, axes, tuple(exact))
    if np.ndim(shots) == 0:
        shots = (shots,) * 3
    shots = tuple(int(n) for n in shots)
    if len(shots) != 3 or any(n <= 0 for n in shots):
        raise InvalidShotCount(f"shots must be three positive integers, got {shots}")
    rng = np.random.default_rng(seed)
    pvs = []
    for pv, n in zip(exact, shots):
        p = np.clip(pv.p, 0, None)
        counts = rng.multinomial(n, p / p.sum())
        pvs.append(ProbabilityVector(state.spin, pv.axis, counts / n))
    return DataSet(state.spin, axes, tuple(pvs), shots)


def residual(state: PureState, dataset: DataSet) -> float:
    """Sum over axes and outcomes of the squared probability mismatch."""
    if state.spin != dataset.spin:
        raise SpinMismatch(f"two_s {state.two_s} vs {dataset.spin.two_s}")
    model = np.array([probability_array(state, a) for a in dataset.axes])
    return float(np.sum((model - dataset.arrays()) ** 2))


# --- phase-retrieval problem ----------------------------------------------


class _PhaseProblem:
    """Residuals and Jacobians as functions of the free phases, batched over rows."""

    def __init__(self, dataset: DataSet):
        self.dataset = dataset
        B = [basis_matrix(dataset.spin, a) for a in dataset.axes]
        data = dataset.arrays()
        p0 = np.clip(data[0], 0, None)
        self.moduli = np.sqrt(p0)
        live = np.flatnonzero(p0 >= PIN_TOL)
        self.anchor = int(live[np.argmax(p0[live])])
        self.free = np.array([k for k in live if k != self.anchor], dtype=int)
        self.B0 = B[0]
        # projections onto the other two bases, as maps from first-axis coordinates
        self.G = np.concatenate([B[1].conj().T @ B[0], B[2].conj().T @ B[0]])
        self.target = np.concatenate([data[1], data[2]])

    @property
    def n_free(self) -> int:
        return self.free.size

    def coords(self, phases: np.ndarray) -> np.ndarray:
        phases = np.atleast_2d(phases)
        v = np.zeros((phases.shape[0], self.moduli.size), dtype=complex)
        v[:, self.anchor] = self.moduli[self.anchor]
        v[:, self.free] = self.moduli[self.free] * np.exp(1j * phases)
        return v

    def residuals(self, phases: np.ndarray):
        v = self.coords(phases)
        c = v @ self.G.T
        return np.abs(c) ** 2 - self.target, c, v

    def jacobian(self, c: np.ndarray, v: np.ndarray) -> np.ndarray:
        # d|c_m|^2 / d phi_j = 2 Re(conj(c_m) i G_mj v_j)
        Gf = self.G[:, self.free]
        dv = 1j * v[:, self.free]
        return 2 * np.real(np.conj(c)[:, :, None] * Gf[None, :, :] * dv[:, None, :])

    def state(self, phases: np.ndarray) -> PureState:
        return PureState(self.B0 @ self.coords(phases)[0])


def levenberg_marquardt(problem: _PhaseProblem, phases: np.ndarray, max_iter: int = 300,
                        gtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Batched LM; returns (phases, costs) with cost = sum of squared residuals."""
    x = np.array(phases, dtype=float, copy=True)
    rows, n = x.shape
    r, c, v = problem.residuals(x)
    cost = np.einsum("ij,ij->i", r, r)
    lam = np.full(rows, 1e-3)
    active = np.ones(rows, dtype=bool)
    eye = np.eye(n)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        J = problem.jacobian(c[idx], v[idx])
        JtJ = np.einsum("bmi,bmj->bij", J, J)
        g = np.einsum("bmi,bm->bi", J, r[idx])
        gnorm = np.abs(g).max(axis=1)
        done = (gnorm < gtol) | (cost[idx] < 1e-32)
        active[idx[done]] = False
        keep = ~done
        idx, JtJ, g = idx[keep], JtJ[keep], g[keep]
        if idx.size == 0:
            break
        damp = lam[idx, None, None] * (np.einsum("bii->bi", JtJ)[:, :, None] * eye + eye)
        step = -np.linalg.solve(JtJ + damp, g[:, :, None])[:, :, 0]
        trial = x[idx] + step
        r_new, c_new, v_new = problem.residuals(trial)
        cost_new = np.einsum("ij,ij->i", r_new, r_new)
        better = cost_new < cost[idx]
        acc = idx[better]
        x[acc], r[acc], c[acc], v[acc], cost[acc] = (
            trial[better], r_new[better], c_new[better], v_new[better], cost_new[better],
        )
        lam[acc] = np.maximum(lam[acc] / 3, 1e-12)
        rej = idx[~better]
        lam[rej] *= 4
        # a rejected step that cannot move x any more is converged
        stalled = ~better & (np.abs(step).max(axis=1) < 1e-15 * (1 + np.abs(x[idx]).max(axis=1)))
        active[idx[stalled]] = False
        active[rej[lam[rej] > 1e16]] = False
    return x, cost


def _threads() -> int:
    try:
        return max(0, int(os.environ.get("SPINRECON_THREADS", "0")))
    except ValueError:
        return 0


def _solve_restarts(problem: _PhaseProblem, starts: np.ndarray):
    threads = _threads()
    if threads <= 1 or starts.shape[0] < 2 * threads:
        return levenberg_marquardt(problem, starts)
    chunks = np.array_split(starts, threads)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda ch: levenberg_marquardt(problem, ch), chunks))
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


# --- results ----------------------------------------------------------------


class ReconVerdict(str, Enum):
    UNIQUE = "UNIQUE"
    AMBIGUOUS = "AMBIGUOUS"
    FAILED = "FAILED"


@dataclass(frozen=True, eq=False)
class Candidate:
    state: PureState
    residual: float
    fidelity_to_reference: float | None = None

    def to_json(self) -> dict:
        return {
            "state": self.state.to_json(),
            "residual": self.residual,
            "fidelity_to_reference": self.fidelity_to_reference,
        }


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    candidates: list
    verdict: ReconVerdict
    diagnostics: dict = field(default_factory=dict)

    @property
    def best(self) -> Candidate | None:
        return self.candidates[0] if self.candidates else None

    def to_json(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "candidates": [c.to_json() for c in self.candidates],
            "diagnostics": self.diagnostics,
        }


@dataclass
class ReconstructionConfig:
    restarts: int = 50
    seed: int = 0
    accept_tol: float | None = None
    dedup_tol: float = DEDUP_TOL


def default_accept_tol(dataset: DataSet) -> float:
    if dataset.exact:
        return EXACT_ACCEPT_TOL
    return 3.0 / min(dataset.shots)


def _dedup(states_costs, dedup_tol: float):
    """Merge rays closer than ``dedup_tol`` in fidelity; input sorted by cost."""
    kept: list[tuple[PureState, float]] = []
    for st, cost in states_costs:
        if all(fidelity(st, k) < 1 - dedup_tol for k, _ in kept):
            kept.append((st, cost))
    return kept


def _ordering_key(item):
    st, cost = item
    return (cost, tuple(np.round(st.amplitudes.real, 12)), tuple(np.round(st.amplitudes.imag, 12)))


def reconstruct(dataset: DataSet, config: ReconstructionConfig | None = None,
                reference: PureState | None = None, **overrides) -> ReconstructionResult:
    """Find every state whose intensities along the three axes match ``dataset``.

    ``reference``, if given, is only used to annotate candidates with their
    fidelity to it.
    """
    config = config or ReconstructionConfig()
    for k, val in overrides.items():
        setattr(config, k, val)
    accept = config.accept_tol if config.accept_tol is not None else default_accept_tol(dataset)
    problem = _PhaseProblem(dataset)
    rng = np.random.default_rng(config.seed)
    restarts = max(1, int(config.restarts))
    if problem.n_free == 0:
        phases = np.zeros((1, 0))
        costs = np.array([residual(problem.state(phases[0]), dataset)])
        restarts = 1
    else:
        starts = rng.uniform(0, 2 * np.pi, size=(restarts, problem.n_free))
        phases, costs = _solve_restarts(problem, starts)

    minima = []
    for ph in phases:
        st = problem.state(ph)
        minima.append((st, residual(st, dataset)))
    minima.sort(key=_ordering_key)
    distinct = _dedup(minima, config.dedup_tol)
    accepted = [(st, c) for st, c in distinct if c <= accept]

    if not accepted:
        verdict = ReconVerdict.FAILED
    elif len(accepted) > 1:
        verdict = ReconVerdict.AMBIGUOUS
    elif dataset.exact:
        verdict = ReconVerdict.UNIQUE
    else:
        others = [c for _, c in distinct[1:]]
        best = accepted[0][1]
        runner_up = min(others) if others else math.inf
        verdict = ReconVerdict.UNIQUE if runner_up > NOISY_GAP * best else ReconVerdict.AMBIGUOUS

    candidates = [
        Candidate(st, c, None if reference is None else fidelity(st, reference))
        for st, c in accepted
    ]
    best_state = distinct[0][0]
    diagnostics = {
        "restarts": restarts,
        "accept_tol": accept,
        "best_residual": distinct[0][1],
        "distinct_minima": len(distinct),
        "triple_product": dataset.axes.triple_product,
        "genericity": _genericity(best_state),
    }
    return ReconstructionResult(candidates, verdict, diagnostics)


def _genericity(state: PureState) -> str | None:
    if state.two_s == 0:
        return Verdict.GENERIC.value
    try:
        return classify_genericity(state).verdict.value
    except Exception:  # inconsistent ensembles only matter as a diagnostic here
        log.debug("genericity classification failed", exc_info=True)
        return None


# --- conjugate partners ---------------------------------------------------


def conjugate_partner_check(state: PureState, dataset: DataSet,
                            accept_tol: float | None = None,
                            dedup_tol: float = DEDUP_TOL) -> dict:
    """Does the complex conjugate of ``state`` reproduce ``dataset`` as a distinct ray?"""
    accept = accept_tol if accept_tol is not None else default_accept_tol(dataset)
    partner = PureState(state.amplitudes.conj())
    res = residual(partner, dataset)
    f = fidelity(partner, state)
    _, sy, _ = spin_matrices(state.spin)
    odd1 = expectation(state, sy).real
    odd3 = expectation(state, sy @ sy @ sy).real
    return {
        "is_partner": bool(res <= accept and f < 1 - dedup_tol),
        "partner": partner,
        "partner_residual": res,
        "fidelity": f,
        "sy_expectation": odd1,
        "sy3_expectation": odd3,
        "odd_sy_moments_vanish": bool(abs(odd1) < 1e-10 and abs(odd3) < 1e-10),
    }


# --- brute-force oracle ---------------------------------------------------


def _grid_local_minima(values: np.ndarray) -> np.ndarray:
    """Flat indices of periodic-grid points no larger than any neighbour."""
    is_min = np.ones(values.shape, dtype=bool)
    dims = values.ndim
    for offset in np.ndindex(*(3,) * dims):
        shift = tuple(o - 1 for o in offset)
        if not any(shift):
            continue
        is_min &= values <= np.roll(values, shift, axis=tuple(range(dims)))
    return np.flatnonzero(is_min)


def brute_force_oracle(dataset: DataSet, grid_points_per_phase: int = 720,
                       accept_tol: float | None = None, dedup_tol: float = DEDUP_TOL,
                       max_refine: int = 256) -> list[Candidate]:
    """Exhaustive phase grid plus local refinement, for two_s <= 2.

    The grid holds at most ``grid_points_per_phase ** 2`` points; with more than
    two free phases the per-phase resolution drops to keep that budget.
    """
    if dataset.spin.two_s > 2:
        raise OracleTooExpensive(f"two_s={dataset.spin.two_s} is beyond the oracle's range")
    accept = accept_tol if accept_tol is not None else default_accept_tol(dataset)
    problem = _PhaseProblem(dataset)
    n = problem.n_free
    if n == 0:
        st = problem.state(np.zeros(0))
        res = residual(st, dataset)
        return [Candidate(st, res)] if res <= accept else []
    per = grid_points_per_phase if n <= 2 else int(grid_points_per_phase ** (2 / n))
    axis = 2 * np.pi * np.arange(per) / per
    mesh = np.stack(np.meshgrid(*([axis] * n), indexing="ij"), axis=-1).reshape(-1, n)
    values = np.empty(mesh.shape[0])
    for lo in range(0, mesh.shape[0], 65536):
        r, _, _ = problem.residuals(mesh[lo:lo + 65536])
        values[lo:lo + 65536] = np.einsum("ij,ij->i", r, r)
    minima = _grid_local_minima(values.reshape((per,) * n))
    minima = minima[np.argsort(values[minima], kind="stable")][:max_refine]

    found = []
    for idx in minima:
        ph, _ = levenberg_marquardt(problem, mesh[idx][None, :])
        st = problem.state(ph[0])
        found.append((st, residual(st, dataset)))
    found.sort(key=_ordering_key)
    return [Candidate(st, c) for st, c in _dedup(found, dedup_tol) if c <= accept]


# --- noise study ----------------------------------------------------------


def noise_sweep(state: PureState, axes=ORTHOGONAL, shot_grid=(100, 1000, 10000, 100000),
                repeats: int = 20, seed: int = 0, restarts: int = 50) -> list[dict]:
    """Median and quartile infidelity of the best candidate versus shot count.

    A ``None`` or infinite entry in ``shot_grid`` means exact probabilities.
    """
    if not isinstance(axes, AxisTriple):
        axes = validate_axes(axes)
    rows = []
    if repeats <= 0:
        return rows
    seeds = np.random.SeedSequence(seed).spawn(len(shot_grid))
    for shots, ss in zip(shot_grid, seeds):
        exact = shots is None or (isinstance(shots, float) and math.isinf(shots))
        infid = []
        for rep_ss in ss.spawn(repeats):
            sim_seed, rec_seed = rep_ss.generate_state(2)
            data = simulate_dataset(state, axes, None if exact else int(shots), int(sim_seed))
            result = reconstruct(data, ReconstructionConfig(restarts=restarts, seed=int(rec_seed)))
            if result.best is not None:
                best = result.best.state
            else:
                best = _best_any(data, restarts, int(rec_seed))
            infid.append(1 - fidelity(best, state))
        q25, med, q75 = np.percentile(infid, [25, 50, 75])
        rows.append({
            "shots": "inf" if exact else int(shots),
            "median_infidelity": float(med),
            "q25": float(q25),
            "q75": float(q75),
        })
    return rows


def _best_any(data: DataSet, restarts: int, seed: int) -> PureState:
    # FAILED verdicts still have a best local minimum worth scoring
    result = reconstruct(data, ReconstructionConfig(restarts=restarts, seed=seed, accept_tol=math.inf))
    return result.best.state


def sweep_to_csv(rows: list[dict]) -> str:
    import csv
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["shots", "median_infidelity", "q25", "q75"],
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
