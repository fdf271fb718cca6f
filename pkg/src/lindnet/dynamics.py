"""Time evolution and steady states of Lindblad generators.

The generator acts two ways: directly on a density matrix, and as a
column-stacked superoperator (sparse for propagation, dense for spectral
work). Propagation offers a fixed-step fourth-order Runge-Kutta integrator
over the sparse superoperator plus an exact matrix-exponential path for
cross-checks on small problems. Models that conserve total occupation and
start inside a single occupation sector are restricted to that sector
automatically, which keeps the larger presets cheap without changing any
reported observable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from lindnet.hilbert import (
    HERMITICITY_TOL,
    POSITIVITY_TOL,
    TRACE_TOL,
    DensityMatrix,
    ProductBasis,
    PureState,
)
from lindnet.model import NetworkSpec, build_hamiltonian, build_jump_operators

__all__ = [
    "PROPAGATION_HERMITICITY_TOL",
    "DENSE_DIMENSION_LIMIT",
    "InvariantViolation",
    "LindbladGenerator",
    "PropagationConfig",
    "Trajectory",
    "SteadyStateResult",
    "lindblad_apply",
    "build_superoperator",
    "propagate",
    "propagate_expm",
    "steady_states",
]

# Construction-time hermiticity is held to HERMITICITY_TOL; integration is
# allowed to drift up to this looser bound before a run is declared invalid.
PROPAGATION_HERMITICITY_TOL = 1e-9

# Largest Hilbert dimension for which dense superoperator work (expm, eig)
# is allowed; D = 64 means 4096 x 4096 dense matrices.
DENSE_DIMENSION_LIMIT = 64


class InvariantViolation(RuntimeError):
    """A propagated state broke a trace, hermiticity, or positivity bound."""

    def __init__(self, invariant: str, time: float, value: float, bound: float):
        super().__init__(
            f"{invariant} invariant violated at t={time:.6g}: "
            f"measured {value:.3e}, bound {bound:.3e}")
        self.invariant = invariant
        self.time = time
        self.value = value
        self.bound = bound


StateLike = Union[DensityMatrix, PureState, np.ndarray]


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus jump operators, with the basis kept for observables."""

    hamiltonian: np.ndarray
    jump_operators: tuple[np.ndarray, ...] = ()
    basis: ProductBasis | None = None

    def __post_init__(self):
        H = np.asarray(self.hamiltonian, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError(f"hamiltonian must be square, got shape {H.shape}")
        scale = max(1.0, float(np.abs(H).max()) if H.size else 1.0)
        if float(np.abs(H - H.conj().T).max()) > HERMITICITY_TOL * scale:
            raise ValueError("hamiltonian is not hermitian")
        jumps = tuple(np.asarray(L, dtype=complex) for L in self.jump_operators)
        for L in jumps:
            if L.shape != H.shape:
                raise ValueError(
                    f"jump operator shape {L.shape} does not match hamiltonian {H.shape}")
        if self.basis is not None and self.basis.dimension != H.shape[0]:
            raise ValueError(
                f"basis dimension {self.basis.dimension} does not match "
                f"hamiltonian dimension {H.shape[0]}")
        object.__setattr__(self, "hamiltonian", H)
        object.__setattr__(self, "jump_operators", jumps)

    @classmethod
    def from_network(cls, spec: NetworkSpec) -> "LindbladGenerator":
        basis = spec.basis()
        return cls(build_hamiltonian(spec, basis),
                   tuple(build_jump_operators(spec, basis)), basis)

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    @cached_property
    def _dissipator_products(self) -> tuple[np.ndarray, ...]:
        return tuple(L.conj().T @ L for L in self.jump_operators)


def lindblad_apply(gen: LindbladGenerator, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation acting on a density matrix."""
    H = gen.hamiltonian
    out = -1j * (H @ rho - rho @ H)
    for L, LdL in zip(gen.jump_operators, gen._dissipator_products):
        out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def _superoperator_csr(H: np.ndarray, jumps: Sequence[np.ndarray]) -> scipy.sparse.csr_matrix:
    """Column-stacked superoperator: d vec(rho)/dt = S vec(rho)."""
    D = H.shape[0]
    eye = scipy.sparse.identity(D, dtype=complex, format="csr")
    Hs = scipy.sparse.csr_matrix(H)
    S = -1j * (scipy.sparse.kron(eye, Hs, format="csr")
               - scipy.sparse.kron(Hs.T, eye, format="csr"))
    for L in jumps:
        Ls = scipy.sparse.csr_matrix(L)
        LdL = scipy.sparse.csr_matrix(L.conj().T @ L)
        S = S + scipy.sparse.kron(Ls.conj(), Ls, format="csr")
        S = S - 0.5 * (scipy.sparse.kron(eye, LdL, format="csr")
                       + scipy.sparse.kron(LdL.T, eye, format="csr"))
    return S.tocsr()


def build_superoperator(gen: LindbladGenerator,
                        max_dim: int = DENSE_DIMENSION_LIMIT) -> np.ndarray:
    """Dense column-stacked superoperator, bounded to keep memory sane."""
    D = gen.dimension
    if D > max_dim:
        raise ValueError(
            f"dense superoperator for dimension {D} exceeds the {max_dim} limit; "
            "use the sparse propagation path instead")
    return _superoperator_csr(gen.hamiltonian, gen.jump_operators).toarray()


@dataclass(frozen=True)
class PropagationConfig:
    """How to integrate and what to record.

    times is the output grid; the initial state is taken at times[0]. dt is
    the integrator substep cap for the Runge-Kutta method. coherences are
    (row, col) index pairs of the full density matrix to record. snapshots is
    'none', 'last', or 'all'. sector_filter 'auto' restricts to a conserved
    occupation sector when the model and the initial state allow it.
    """

    times: np.ndarray
    dt: float = 1e-3
    method: str = "fixed_step_rk4"
    coherences: tuple[tuple[int, int], ...] = ()
    snapshots: str = "none"
    sector_filter: str = "auto"
    rehermitize: bool = False
    check_invariants: bool = True

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a nonempty 1-D array")
        if not np.all(np.isfinite(times)):
            raise ValueError("times must be finite")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        if self.dt <= 0 or not np.isfinite(self.dt):
            raise ValueError("dt must be a positive step size")
        if self.method not in ("fixed_step_rk4", "superoperator_expm"):
            raise ValueError(
                f"unknown method {self.method!r}; "
                "valid: fixed_step_rk4, superoperator_expm")
        if self.snapshots not in ("none", "last", "all"):
            raise ValueError("snapshots must be none, last, or all")
        if self.sector_filter not in ("auto", "off"):
            raise ValueError("sector_filter must be auto or off")
        pairs = tuple((int(i), int(j)) for i, j in self.coherences)
        object.__setattr__(self, "coherences", pairs)


@dataclass
class Trajectory:
    """Observables recorded on the output grid, indices aligned with times."""

    times: np.ndarray
    site_labels: tuple[str, ...]
    populations: np.ndarray          # (n_times, n_sites) mean occupations
    purity: np.ndarray
    purity_rate: np.ndarray
    trace: np.ndarray
    min_eigenvalue: np.ndarray
    hermiticity_defect: np.ndarray
    coherences: dict[tuple[int, int], np.ndarray]
    snapshots: list[np.ndarray]
    snapshot_times: list[float]
    metadata: dict = field(default_factory=dict)

    def population(self, label: str) -> np.ndarray:
        try:
            k = self.site_labels.index(label)
        except ValueError:
            raise KeyError(f"no site labelled {label!r} in this trajectory") from None
        return self.populations[:, k]

    @property
    def final_snapshot(self) -> np.ndarray:
        if not self.snapshots:
            raise ValueError("run was recorded with snapshots='none'")
        return self.snapshots[-1]


def _as_density(gen: LindbladGenerator, state: StateLike) -> np.ndarray:
    if isinstance(state, PureState):
        state = state.to_density()
    if isinstance(state, DensityMatrix):
        rho = state.matrix
    else:
        rho = np.asarray(state, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"state must be a square matrix, got shape {rho.shape}")
        if float(np.abs(rho - rho.conj().T).max()) > HERMITICITY_TOL:
            raise ValueError("initial state is not hermitian")
        if abs(rho.trace() - 1.0) > TRACE_TOL:
            raise ValueError(f"initial state trace {rho.trace():.12g} is not 1")
    if rho.shape[0] != gen.dimension:
        raise ValueError(
            f"state dimension {rho.shape[0]} does not match generator {gen.dimension}")
    return np.array(rho, dtype=complex)


def _commutes_with_number(op: np.ndarray, nvec: np.ndarray, tol: float = 1e-12) -> bool:
    # N is diagonal, so [op, N]_{ij} = op_{ij} (n_j - n_i)
    if op.size == 0:
        return True
    scale = max(1.0, float(np.abs(op).max()))
    comm = op * (nvec[None, :] - nvec[:, None])
    return float(np.abs(comm).max()) <= tol * scale


def _sector_indices(gen: LindbladGenerator, rho0: np.ndarray) -> np.ndarray | None:
    """Indices of the conserved occupation sector holding rho0, or None."""
    if gen.basis is None:
        return None
    nvec = gen.basis.total_number
    if not _commutes_with_number(gen.hamiltonian, nvec):
        return None
    for L in gen.jump_operators:
        if not _commutes_with_number(L, nvec):
            return None
    sector_ids = np.rint(nvec).astype(int)
    support = (np.abs(rho0).max(axis=0) > 1e-14) | (np.abs(rho0).max(axis=1) > 1e-14)
    if not support.any():
        return None
    present = np.unique(sector_ids[support])
    if present.size != 1:
        return None
    indices = np.flatnonzero(sector_ids == present[0])
    if indices.size == rho0.shape[0]:
        return None
    return indices


class _Recorder:
    """Accumulates observables while a vectorized state marches forward."""

    def __init__(self, gen: LindbladGenerator, config: PropagationConfig,
                 S: scipy.sparse.csr_matrix, dim: int,
                 indices: np.ndarray | None, full_dim: int):
        self.gen = gen
        self.config = config
        self.S = S
        self.dim = dim
        self.indices = indices
        self.full_dim = full_dim
        n = config.times.size
        basis = gen.basis
        if basis is not None:
            self.site_labels = tuple(s.label for s in basis.sites)
            table = basis.occupation_table
            self.occ = table[indices] if indices is not None else table
        else:
            self.site_labels = ()
            self.occ = np.zeros((dim, 0))
        self.populations = np.zeros((n, len(self.site_labels)))
        self.purity = np.zeros(n)
        self.purity_rate = np.zeros(n)
        self.trace = np.zeros(n)
        self.min_eigenvalue = np.zeros(n)
        self.hermiticity_defect = np.zeros(n)
        self.coherences = {pair: np.zeros(n, dtype=complex) for pair in config.coherences}
        self.snapshots: list[np.ndarray] = []
        self.snapshot_times: list[float] = []
        # map requested full-basis coherence pairs onto the restricted block
        self._pair_local: dict[tuple[int, int], tuple[int, int] | None] = {}
        for (i, j) in config.coherences:
            if not (0 <= i < full_dim and 0 <= j < full_dim):
                raise ValueError(f"coherence index pair {(i, j)} out of range")
        if indices is not None:
            pos = {int(g): k for k, g in enumerate(indices)}
            for (i, j) in config.coherences:
                self._pair_local[(i, j)] = (pos[i], pos[j]) if i in pos and j in pos else None
        else:
            for (i, j) in config.coherences:
                self._pair_local[(i, j)] = (i, j)

    def _embed(self, rho: np.ndarray) -> np.ndarray:
        if self.indices is None:
            return rho
        full = np.zeros((self.full_dim, self.full_dim), dtype=complex)
        full[np.ix_(self.indices, self.indices)] = rho
        return full

    def record(self, k: int, t: float, v: np.ndarray) -> np.ndarray:
        """Store observables for output slot k; returns possibly hermitized v."""
        cfg = self.config
        rho = v.reshape(self.dim, self.dim, order="F")
        defect = float(np.abs(rho - rho.conj().T).max())
        if cfg.rehermitize and defect > 0:
            rho = 0.5 * (rho + rho.conj().T)
            v = rho.ravel(order="F")
            defect = 0.0
        self.hermiticity_defect[k] = defect
        tr = rho.trace()
        self.trace[k] = tr.real
        if self.occ.shape[1]:
            self.populations[k] = np.real(np.diag(rho)) @ self.occ
        self.purity[k] = float(np.vdot(v, v).real)
        self.purity_rate[k] = 2.0 * float(np.vdot(v, self.S @ v).real)
        lam_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if self.indices is not None and self.dim < self.full_dim:
            lam_min = min(lam_min, 0.0)
        self.min_eigenvalue[k] = lam_min
        for pair, local in self._pair_local.items():
            self.coherences[pair][k] = rho[local] if local is not None else 0.0
        want_snap = cfg.snapshots == "all" or (
            cfg.snapshots == "last" and k == cfg.times.size - 1)
        if want_snap:
            self.snapshots.append(self._embed(rho))
            self.snapshot_times.append(t)
        if cfg.check_invariants:
            if abs(tr - 1.0) > TRACE_TOL:
                raise InvariantViolation("trace", t, float(abs(tr - 1.0)), TRACE_TOL)
            if defect > PROPAGATION_HERMITICITY_TOL:
                raise InvariantViolation("hermiticity", t, defect,
                                         PROPAGATION_HERMITICITY_TOL)
            if lam_min < -POSITIVITY_TOL:
                raise InvariantViolation("positivity", t, lam_min, -POSITIVITY_TOL)
        return v

    def finish(self, method: str, dt: float, sector: int | None) -> Trajectory:
        meta = {
            "method": method,
            "dt": dt,
            "dimension": self.full_dim,
            "sector_filtered": self.indices is not None,
            "invariants_checked": self.config.check_invariants,
            "max_trace_error": float(np.abs(self.trace - 1.0).max()),
            "min_eigenvalue_floor": float(self.min_eigenvalue.min()),
            "max_hermiticity_defect": float(self.hermiticity_defect.max()),
        }
        if self.indices is not None:
            meta["sector"] = {"occupation": sector, "dimension": self.dim}
        return Trajectory(
            times=self.config.times.copy(), site_labels=self.site_labels,
            populations=self.populations, purity=self.purity,
            purity_rate=self.purity_rate, trace=self.trace,
            min_eigenvalue=self.min_eigenvalue,
            hermiticity_defect=self.hermiticity_defect,
            coherences=self.coherences, snapshots=self.snapshots,
            snapshot_times=self.snapshot_times, metadata=meta)


def _restrict(gen: LindbladGenerator, rho0: np.ndarray,
              config: PropagationConfig):
    """Apply the sector filter if allowed; returns (H, jumps, rho, indices, sector)."""
    indices = None
    if config.sector_filter == "auto":
        indices = _sector_indices(gen, rho0)
    if indices is None:
        return gen.hamiltonian, gen.jump_operators, rho0, None, None
    ix = np.ix_(indices, indices)
    H = gen.hamiltonian[ix]
    jumps = tuple(L[ix] for L in gen.jump_operators)
    sector = int(np.rint(gen.basis.total_number[indices[0]]))
    return H, jumps, rho0[ix], indices, sector


def propagate(gen: LindbladGenerator, state: StateLike,
              config: PropagationConfig) -> Trajectory:
    """Integrate the master equation and record observables on config.times."""
    rho0 = _as_density(gen, state)
    full_dim = gen.dimension
    H, jumps, rho, indices, sector = _restrict(gen, rho0, config)
    dim = H.shape[0]
    S = _superoperator_csr(H, jumps)
    rec = _Recorder(gen, config, S, dim, indices, full_dim)
    times = config.times

    if config.method == "superoperator_expm":
        if dim > DENSE_DIMENSION_LIMIT:
            raise ValueError(
                f"superoperator_expm needs effective dimension <= "
                f"{DENSE_DIMENSION_LIMIT}, got {dim}; use fixed_step_rk4")
        Sd = S.toarray()
        v = rho.ravel(order="F")
        v = rec.record(0, times[0], v)
        cache: dict[float, np.ndarray] = {}
        for k in range(1, times.size):
            gap = float(times[k] - times[k - 1])
            key = round(gap, 15)
            if key not in cache:
                cache[key] = scipy.linalg.expm(Sd * gap)
            v = cache[key] @ v
            v = rec.record(k, times[k], v)
        return rec.finish(config.method, math.nan, sector)

    v = rho.ravel(order="F")
    v = rec.record(0, times[0], v)
    dt = config.dt
    for k in range(1, times.size):
        gap = float(times[k] - times[k - 1])
        n_sub = max(1, math.ceil(gap / dt))
        h = gap / n_sub
        for _ in range(n_sub):
            k1 = S @ v
            k2 = S @ (v + (0.5 * h) * k1)
            k3 = S @ (v + (0.5 * h) * k2)
            k4 = S @ (v + h * k3)
            v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        v = rec.record(k, times[k], v)
    return rec.finish(config.method, dt, sector)


def propagate_expm(gen: LindbladGenerator, state: StateLike,
                   times: np.ndarray, **options) -> Trajectory:
    """Exact dense-exponential propagation on an output grid (small systems)."""
    config = PropagationConfig(times=np.asarray(times, dtype=float),
                               method="superoperator_expm", **options)
    return propagate(gen, state, config)


@dataclass
class SteadyStateResult:
    """Stationary solutions of the generator.

    state is the minimum-norm trace-one element of the stationary subspace;
    when the stationary state is unique this is that state. directions are
    traceless hermitian unit matrices spanning the remaining freedom, so
    every stationary density matrix has the form state + sum_m a_m
    directions[m] for real a_m (subject to positivity).
    """

    state: np.ndarray
    directions: tuple[np.ndarray, ...]
    multiplicity: int
    zero_eigenvalues: np.ndarray
    residual: float


def _hermitian_coords(M: np.ndarray, iu: tuple) -> np.ndarray:
    # isometric real coordinates for hermitian matrices (Frobenius metric)
    return np.concatenate([np.real(np.diag(M)),
                           math.sqrt(2.0) * M[iu].real,
                           math.sqrt(2.0) * M[iu].imag])


def _hermitian_from_coords(c: np.ndarray, D: int, iu: tuple) -> np.ndarray:
    m = iu[0].size
    out = np.zeros((D, D), dtype=complex)
    out[iu] = (c[D:D + m] + 1j * c[D + m:]) / math.sqrt(2.0)
    out = out + out.conj().T
    out[np.diag_indices(D)] = c[:D]
    return out


def steady_states(gen: LindbladGenerator, zero_tol: float = 1e-10,
                  max_dim: int = DENSE_DIMENSION_LIMIT) -> SteadyStateResult:
    """All stationary solutions via the dense superoperator spectrum."""
    S = build_superoperator(gen, max_dim=max_dim)
    D = gen.dimension
    evals, evecs = scipy.linalg.eig(S)
    scale = max(1.0, float(np.abs(evals).max()))
    mask = np.abs(evals) <= zero_tol * scale
    if not mask.any():
        raise ValueError("generator has no stationary mode within tolerance")
    zero_eigenvalues = evals[mask]

    # stationary subspace is closed under the adjoint, so split each null
    # vector into two hermitian parts and find the real span
    iu = np.triu_indices(D, 1)
    rows = []
    for col in np.flatnonzero(mask):
        X = evecs[:, col].reshape(D, D, order="F")
        rows.append(_hermitian_coords(0.5 * (X + X.conj().T), iu))
        rows.append(_hermitian_coords((X - X.conj().T) / 2j, iu))
    M = np.array(rows)
    _, sv, Vt = np.linalg.svd(M, full_matrices=False)
    rank = int(np.sum(sv > zero_tol * max(1.0, sv[0])))
    if rank == 0:
        raise ValueError("stationary subspace has no hermitian element")
    span = Vt[:rank]

    traces = span[:, :D].sum(axis=1)
    tnorm2 = float(traces @ traces)
    if tnorm2 <= zero_tol:
        raise ValueError("stationary subspace carries no trace; "
                         "no normalizable steady state")
    g_coords = (traces / tnorm2) @ span
    state = _hermitian_from_coords(g_coords, D, iu)

    kernel = span - np.outer(traces, g_coords)
    _, sv2, Vt2 = np.linalg.svd(kernel, full_matrices=False)
    keep = sv2 > zero_tol * max(1.0, sv2[0] if sv2.size else 1.0)
    directions = tuple(_hermitian_from_coords(row, D, iu) for row in Vt2[keep])

    residual = float(np.abs(S @ state.ravel(order="F")).max())
    return SteadyStateResult(state=state, directions=directions,
                             multiplicity=rank,
                             zero_eigenvalues=zero_eigenvalues,
                             residual=residual)
