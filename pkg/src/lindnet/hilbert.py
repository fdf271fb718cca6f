"""Tensor-product Hilbert space for networks of qubits and finite spins.

Sites are declared in a fixed order; the flat basis index is the mixed-radix
number whose most significant digit is the first declared site, with local
occupation ascending 0..d-1 within each site. All operators and states carry a
reference to the basis they live in.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from math import comb
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "SiteDescriptor",
    "ProductBasis",
    "PureState",
    "DensityMatrix",
    "build_basis",
    "embed_site_operator",
    "basis_state",
    "dicke_state",
    "reverse_occupation_order",
    "HERMITICITY_TOL",
    "TRACE_TOL",
    "POSITIVITY_TOL",
]

HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9

OP_KINDS = ("lower", "raise", "number", "sz", "identity")


@dataclass(frozen=True)
class SiteDescriptor:
    """One network site: a qubit (dim 2) or a spin of dimension 2s+1."""

    label: str
    kind: str
    dim: int

    def __post_init__(self):
        if not self.label:
            raise ValueError("site label must be non-empty")
        if self.kind not in ("qubit", "spin"):
            raise ValueError(f"unknown site kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError(f"site {self.label!r}: dimension must be >= 2")
        if self.kind == "qubit" and self.dim != 2:
            raise ValueError(f"qubit site {self.label!r} must have dim 2")

    @property
    def spin(self) -> float:
        """Spin quantum number s with dim = 2s + 1."""
        return (self.dim - 1) / 2


@dataclass(frozen=True)
class ProductBasis:
    """Ordered tensor product of sites with a mixed-radix index map.

    The first declared site is the most significant digit of the flat index,
    and local occupations ascend 0..d-1.
    """

    sites: tuple[SiteDescriptor, ...]

    def __post_init__(self):
        if not self.sites:
            raise ValueError("basis needs at least one site")
        labels = [s.label for s in self.sites]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate site labels in {labels}")

    @cached_property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.sites)

    @cached_property
    def dimension(self) -> int:
        out = 1
        for d in self.dims:
            out *= d
        return out

    @cached_property
    def _strides(self) -> np.ndarray:
        # stride of site k = product of dims of the sites after it
        strides = np.ones(len(self.sites), dtype=np.int64)
        for k in range(len(self.sites) - 2, -1, -1):
            strides[k] = strides[k + 1] * self.dims[k + 1]
        return strides

    @cached_property
    def occupation_table(self) -> np.ndarray:
        """(dimension, n_sites) array: occupation of each site in each basis ket."""
        idx = np.arange(self.dimension, dtype=np.int64)
        cols = []
        for k, d in enumerate(self.dims):
            cols.append((idx // self._strides[k]) % d)
        table = np.stack(cols, axis=1)
        table.flags.writeable = False
        return table

    @cached_property
    def total_number(self) -> np.ndarray:
        """Diagonal of the total occupation operator, one entry per basis ket."""
        n = self.occupation_table.sum(axis=1)
        n.flags.writeable = False
        return n

    def site_position(self, label: str) -> int:
        for k, s in enumerate(self.sites):
            if s.label == label:
                return k
        raise ValueError(f"unknown site {label!r}")

    def index(self, occupations: Sequence[int]) -> int:
        """Flat index of the product ket with the given occupations."""
        if len(occupations) != len(self.sites):
            raise ValueError(
                f"expected {len(self.sites)} occupations, got {len(occupations)}"
            )
        for eta, site in zip(occupations, self.sites):
            if not 0 <= eta < site.dim:
                raise ValueError(
                    f"occupation {eta} out of range for site {site.label!r}"
                )
        return int(np.dot(np.asarray(occupations, dtype=np.int64), self._strides))

    def occupations(self, index: int) -> tuple[int, ...]:
        """Occupation tuple of the basis ket with the given flat index."""
        if not 0 <= index < self.dimension:
            raise ValueError(f"index {index} out of range")
        return tuple(int(x) for x in self.occupation_table[index])


def build_basis(sites: Iterable[SiteDescriptor | tuple]) -> ProductBasis:
    """Build a ProductBasis from SiteDescriptors or (label, kind, dim) tuples."""
    descs = []
    for s in sites:
        if isinstance(s, SiteDescriptor):
            descs.append(s)
        else:
            label, kind, dim = s
            descs.append(SiteDescriptor(label, kind, int(dim)))
    return ProductBasis(tuple(descs))


def _local_operator(site: SiteDescriptor, op_kind: str) -> np.ndarray:
    d = site.dim
    if op_kind == "identity":
        return np.eye(d, dtype=complex)
    if op_kind == "number":
        return np.diag(np.arange(d, dtype=float)).astype(complex)
    if op_kind == "sz":
        if site.kind != "spin":
            raise ValueError(f"op_kind 'sz' only valid for spin sites, not {site.label!r}")
        s = site.spin
        return np.diag(np.arange(d, dtype=float) - s).astype(complex)
    if op_kind in ("lower", "raise"):
        low = np.zeros((d, d), dtype=complex)
        if site.kind == "qubit":
            low[0, 1] = 1.0
        else:
            s = site.spin
            for eta in range(d - 1):
                # S- |eta+1> = sqrt((eta+1)(2s-eta)) |eta>
                low[eta, eta + 1] = np.sqrt((eta + 1) * (2 * s - eta))
        return low if op_kind == "lower" else low.conj().T
    raise ValueError(f"unknown op_kind {op_kind!r}; valid: {OP_KINDS}")


def embed_site_operator(basis: ProductBasis, label: str, op_kind: str) -> np.ndarray:
    """Single-site operator embedded in the full product space.

    op_kind is one of 'lower', 'raise', 'number', 'sz', 'identity'. 'sz' is only
    defined for spin sites; on qubits the number operator plays that role via
    number = (pauli_z + 1)/2.
    """
    pos = basis.site_position(label)
    out = np.array([[1.0 + 0j]])
    for k, site in enumerate(basis.sites):
        local = _local_operator(site, op_kind) if k == pos else np.eye(site.dim, dtype=complex)
        out = np.kron(out, local)
    return out


@dataclass(frozen=True)
class PureState:
    """Normalized state vector over a ProductBasis."""

    amplitudes: np.ndarray
    basis: ProductBasis

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.shape != (self.basis.dimension,):
            raise ValueError(
                f"amplitude vector has shape {amp.shape}, expected ({self.basis.dimension},)"
            )
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"state norm {norm} deviates from 1 beyond 1e-12")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.basis)


@dataclass(frozen=True)
class DensityMatrix:
    """Density matrix over a ProductBasis, validated on construction.

    Hermiticity within 1e-12 (max entry), trace within 1e-9 of one, smallest
    eigenvalue >= -1e-9.
    """

    matrix: np.ndarray
    basis: ProductBasis

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        D = self.basis.dimension
        if m.shape != (D, D):
            raise ValueError(f"matrix has shape {m.shape}, expected ({D}, {D})")
        herm_dev = np.abs(m - m.conj().T).max()
        if herm_dev > HERMITICITY_TOL:
            raise ValueError(f"Hermiticity deviation {herm_dev:.3e} beyond {HERMITICITY_TOL}")
        tr = m.trace()
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} deviates from 1 beyond {TRACE_TOL}")
        min_eig = float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])
        if min_eig < -POSITIVITY_TOL:
            raise ValueError(f"smallest eigenvalue {min_eig:.3e} below -{POSITIVITY_TOL}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return self.basis.dimension


def basis_state(basis: ProductBasis, occupations: Sequence[int]) -> PureState:
    """Product ket with the given site occupations."""
    amp = np.zeros(basis.dimension, dtype=complex)
    amp[basis.index(occupations)] = 1.0
    return PureState(amp, basis)


def dicke_state(basis: ProductBasis, site_labels: Sequence[str], n: int) -> PureState:
    """Symmetric n-excitation state over the named qubit sites.

    Equal amplitudes binomial(N, n)^(-1/2) on every configuration with n of the
    N named sites occupied; all other sites empty.
    """
    positions = [basis.site_position(lbl) for lbl in site_labels]
    if len(set(positions)) != len(positions):
        raise ValueError("duplicate site labels")
    for p in positions:
        if basis.sites[p].kind != "qubit":
            raise ValueError(f"dicke_state needs qubit sites, {basis.sites[p].label!r} is not")
    N = len(positions)
    if not 0 <= n <= N:
        raise ValueError(f"excitation count {n} out of range 0..{N}")
    amp = np.zeros(basis.dimension, dtype=complex)
    weight = 1.0 / np.sqrt(comb(N, n))
    for chosen in combinations(positions, n):
        occ = [0] * len(basis.sites)
        for p in chosen:
            occ[p] = 1
        amp[basis.index(occ)] = weight
    return PureState(amp, basis)


def reverse_occupation_order(array: np.ndarray) -> np.ndarray:
    """Reindex a vector or matrix to descending-occupation basis order.

    Textbook displays for small qubit registers list kets with occupations
    descending (|1,1>, |1,0>, |0,1>, |0,0> for two qubits), which is exactly
    the reverse of this package's ascending flat order. The map is an
    involution and applies to any mixed-radix basis.
    """
    a = np.asarray(array)
    if a.ndim == 1:
        return a[::-1].copy()
    if a.ndim == 2:
        return a[::-1, ::-1].copy()
    raise ValueError("expected a vector or a matrix")
