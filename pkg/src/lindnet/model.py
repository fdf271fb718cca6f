"""Network models: Hamiltonians, jump processes, noise profiles, presets.

A NetworkSpec declares sites, hopping bonds, onsite energies, and incoherent
jump processes. Builders turn it into matrices over the product basis. The
preset registry provides ready-made configurations for every network studied
by this package, each with documented parameter conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence, Union

import numpy as np

from lindnet.hilbert import (
    ProductBasis,
    PureState,
    SiteDescriptor,
    basis_state,
    build_basis,
    dicke_state,
    embed_site_operator,
)

__all__ = [
    "Transfer",
    "Injection",
    "Extraction",
    "Dissipation",
    "Dephasing",
    "JumpProcess",
    "NetworkSpec",
    "PresetParams",
    "PresetRun",
    "build_hamiltonian",
    "build_jump_operators",
    "cosine_noise",
    "uniform_noise",
    "preset",
    "preset_names",
    "preset_defaults",
    "HBAR_MEV_PS",
    "NOISE_PHASE_CONSTANT",
]

# hbar in meV * ps: divides energies quoted in meV to get angular frequencies
# in rad/ps, so they can sit next to rates quoted in 1/ps.
HBAR_MEV_PS = 0.6582119

# Phase step of the deterministic diagonal noise profile eps_j = a * cos(c * j).
# An irrational multiple of pi is wanted so the profile never repeats; Euler's
# number is the documented choice.
NOISE_PHASE_CONSTANT = math.e


def _check_rate(rate: float, what: str) -> None:
    if not np.isfinite(rate) or rate < 0:
        raise ValueError(f"{what} must be a finite nonnegative rate, got {rate}")


@dataclass(frozen=True)
class Transfer:
    """Incoherent hop: lowers `source`, raises `target`, L = sqrt(rate) s- s+."""

    source: str
    target: str
    rate: float

    def __post_init__(self):
        _check_rate(self.rate, "transfer rate")
        if self.source == self.target:
            raise ValueError("transfer needs two distinct sites")


@dataclass(frozen=True)
class Injection:
    """Incoherent filling of one site, L = sqrt(rate) raise."""

    site: str
    rate: float

    def __post_init__(self):
        _check_rate(self.rate, "injection rate")


@dataclass(frozen=True)
class Extraction:
    """Incoherent draining of one site, L = sqrt(rate) lower."""

    site: str
    rate: float

    def __post_init__(self):
        _check_rate(self.rate, "extraction rate")


@dataclass(frozen=True)
class Dissipation:
    """Local loss to the environment, L = sqrt(rate) lower."""

    site: str
    rate: float

    def __post_init__(self):
        _check_rate(self.rate, "dissipation rate")


@dataclass(frozen=True)
class Dephasing:
    """Local phase noise, L = sqrt(rate) number."""

    site: str
    rate: float

    def __post_init__(self):
        _check_rate(self.rate, "dephasing rate")


JumpProcess = Union[Transfer, Injection, Extraction, Dissipation, Dephasing]

_JUMP_KINDS = {
    "transfer": Transfer,
    "injection": Injection,
    "extraction": Extraction,
    "dissipation": Dissipation,
    "dephasing": Dephasing,
}


@dataclass(frozen=True)
class NetworkSpec:
    """Declarative open-network model.

    hoppings are (site_a, site_b, amplitude) with H gaining
    amplitude * (lower_a raise_b + raise_a lower_b); the amplitude is the
    matrix element between the two single-excitation kets. onsite entries are
    (site, energy) adding energy * number_site.
    """

    sites: tuple[SiteDescriptor, ...]
    hoppings: tuple[tuple[str, str, float], ...] = ()
    onsite: tuple[tuple[str, float], ...] = ()
    jumps: tuple[JumpProcess, ...] = ()
    note: str = ""

    def __post_init__(self):
        labels = {s.label for s in self.sites}
        if len(labels) != len(self.sites):
            raise ValueError("duplicate site labels")

        def need(lbl: str, where: str) -> None:
            if lbl not in labels:
                raise ValueError(f"{where} references unknown site {lbl!r}")

        for a, b, amp in self.hoppings:
            need(a, "hopping")
            need(b, "hopping")
            if a == b:
                raise ValueError("hopping needs two distinct sites")
            if not np.isfinite(amp):
                raise ValueError(f"hopping amplitude {amp} not finite")
        for lbl, eps in self.onsite:
            need(lbl, "onsite term")
            if not np.isfinite(eps):
                raise ValueError(f"onsite energy {eps} not finite")
        for j in self.jumps:
            if isinstance(j, Transfer):
                need(j.source, "jump")
                need(j.target, "jump")
            else:
                need(j.site, "jump")

    def basis(self) -> ProductBasis:
        return ProductBasis(self.sites)

    def to_dict(self) -> dict:
        jumps = []
        for j in self.jumps:
            kind = type(j).__name__.lower()
            if isinstance(j, Transfer):
                jumps.append({"kind": kind, "source": j.source, "target": j.target,
                              "rate": j.rate})
            else:
                jumps.append({"kind": kind, "site": j.site, "rate": j.rate})
        return {
            "sites": [{"label": s.label, "kind": s.kind, "dim": s.dim} for s in self.sites],
            "hoppings": [[a, b, amp] for a, b, amp in self.hoppings],
            "onsite": [[lbl, eps] for lbl, eps in self.onsite],
            "jumps": jumps,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NetworkSpec":
        try:
            sites = tuple(
                SiteDescriptor(d["label"], d["kind"], int(d["dim"])) for d in data["sites"]
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid sites entry: {exc}") from exc
        hoppings = tuple((a, b, float(amp)) for a, b, amp in data.get("hoppings", ()))
        onsite = tuple((lbl, float(eps)) for lbl, eps in data.get("onsite", ()))
        jumps = []
        for j in data.get("jumps", ()):
            kind = j.get("kind")
            if kind not in _JUMP_KINDS:
                raise ValueError(f"unknown jump kind {kind!r}")
            if kind == "transfer":
                jumps.append(Transfer(j["source"], j["target"], float(j["rate"])))
            else:
                jumps.append(_JUMP_KINDS[kind](j["site"], float(j["rate"])))
        return cls(sites=sites, hoppings=hoppings, onsite=onsite, jumps=tuple(jumps),
                   note=str(data.get("note", "")))


def build_hamiltonian(spec: NetworkSpec, basis: ProductBasis | None = None) -> np.ndarray:
    """Hermitian Hamiltonian matrix of the hopping and onsite terms."""
    basis = basis or spec.basis()
    D = basis.dimension
    H = np.zeros((D, D), dtype=complex)
    for a, b, amp in spec.hoppings:
        term = embed_site_operator(basis, a, "lower") @ embed_site_operator(basis, b, "raise")
        H += amp * (term + term.conj().T)
    for lbl, eps in spec.onsite:
        H += eps * embed_site_operator(basis, lbl, "number")
    return H


def build_jump_operators(spec: NetworkSpec, basis: ProductBasis | None = None) -> list[np.ndarray]:
    """Jump operators in declaration order, rates folded in as sqrt(rate)."""
    basis = basis or spec.basis()
    ops = []
    for j in spec.jumps:
        root = np.sqrt(j.rate)
        if isinstance(j, Transfer):
            L = embed_site_operator(basis, j.source, "lower") @ embed_site_operator(
                basis, j.target, "raise")
        elif isinstance(j, Injection):
            L = embed_site_operator(basis, j.site, "raise")
        elif isinstance(j, (Extraction, Dissipation)):
            L = embed_site_operator(basis, j.site, "lower")
        elif isinstance(j, Dephasing):
            L = embed_site_operator(basis, j.site, "number")
        else:  # pragma: no cover - union is closed
            raise ValueError(f"unknown jump process {j!r}")
        ops.append(root * L)
    return ops


def cosine_noise(amplitude: float, count: int,
                 constant: float = NOISE_PHASE_CONSTANT) -> list[float]:
    """Deterministic diagonal noise profile eps_j = amplitude*cos(constant*j), j=1..count."""
    if count < 0:
        raise ValueError("count must be >= 0")
    return [amplitude * math.cos(constant * j) for j in range(1, count + 1)]


def uniform_noise(amplitude: float, count: int, seed: int) -> list[float]:
    """Seeded uniform diagonal noise in [-amplitude, amplitude]."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    return [float(x) for x in rng.uniform(-amplitude, amplitude, size=count)]


# --------------------------------------------------------------------------
# presets


@dataclass(frozen=True)
class PresetParams:
    """Preset selector plus parameter overrides (defaults fill the rest)."""

    name: str
    values: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class PresetRun:
    """Resolved preset: network, initial state, default output grid, metadata."""

    spec: NetworkSpec
    initial: PureState
    times: np.ndarray
    metadata: dict


def _merge(defaults: dict, overrides: Mapping[str, Any], name: str) -> dict:
    unknown = set(overrides) - set(defaults)
    if unknown:
        raise ValueError(f"preset {name!r}: unknown parameters {sorted(unknown)}")
    out = dict(defaults)
    out.update(overrides)
    return out


def _grid(t_max: float, samples: int) -> np.ndarray:
    return np.linspace(0.0, t_max, samples)


# Display convention for the exactly solvable networks: the coupling J quoted
# by a preset is the level splitting of the isolated two-site problem, so the
# single-excitation matrix element is J/2. The spectral calibration in the
# validate command measures this (see its report and each preset's metadata).
_SPLITTING_NOTE = (
    "hopping matrix element = J/2 (J is the two-site level splitting); "
    "frequency formulas quoting sqrt(4J^2 - ...) refer to twice the "
    "generator's imaginary pair"
)


def _two_site_transfer(p: dict) -> PresetRun:
    gamma = p["gamma"]
    if gamma <= 0:
        raise ValueError("two_site_transfer: gamma must be > 0")
    spec = NetworkSpec(
        sites=(SiteDescriptor("1", "qubit", 2), SiteDescriptor("2", "qubit", 2)),
        jumps=(Transfer("1", "2", gamma),),
        note="incoherent two-qubit transfer, exactly solvable entrywise",
    )
    basis = spec.basis()
    return PresetRun(spec, basis_state(basis, (1, 0)), _grid(5.0 / gamma, 501),
                     {"preset": "two_site_transfer", "params": dict(p)})


def _qubit_to_battery(p: dict) -> PresetRun:
    gamma, s, n_tot = p["gamma"], p["s"], p["n_tot"]
    dim = round(2 * s + 1)
    if abs(2 * s + 1 - dim) > 1e-12 or dim < 2:
        raise ValueError("qubit_to_battery: s must be a half-integer >= 1/2")
    if gamma <= 0:
        raise ValueError("qubit_to_battery: gamma must be > 0")
    if not isinstance(n_tot, (int, np.integer)) or not 0 <= n_tot <= dim:
        raise ValueError(f"qubit_to_battery: n_tot must be an integer in 0..{dim}")
    spec = NetworkSpec(
        sites=(SiteDescriptor("q", "qubit", 2), SiteDescriptor("b", "spin", dim)),
        jumps=(Transfer("q", "b", gamma),),
        note="qubit charging a finite spin battery at an occupation-dependent rate",
    )
    basis = spec.basis()
    occ = (1, n_tot - 1) if n_tot >= 1 else (0, 0)
    geff = gamma * n_tot * (dim - n_tot)
    t_max = 5.0 / geff if geff > 0 else 5.0 / gamma
    return PresetRun(spec, basis_state(basis, occ), _grid(t_max, 501),
                     {"preset": "qubit_to_battery", "params": dict(p),
                      "effective_rate": geff})


def _four_site_congestion(p: dict) -> PresetRun:
    J, gamma, gamma_b, exc = p["J"], p["gamma"], p["gamma_b"], p["excitations"]
    if exc not in (1, 2):
        raise ValueError("four_site_congestion: excitations must be 1 or 2")
    if gamma < 0 or gamma_b < 0 or J <= 0:
        raise ValueError("four_site_congestion: need J > 0 and nonnegative rates")
    spec = NetworkSpec(
        sites=tuple(SiteDescriptor(str(k), "qubit", 2) for k in range(1, 5)),
        hoppings=(("1", "2", J / 2),),
        jumps=(Transfer("2", "3", gamma), Transfer("3", "4", gamma_b)),
        note="coherent dimer feeding a two-step incoherent cascade",
    )
    basis = spec.basis()
    occ = (1, 1, 0, 0) if exc == 2 else (1, 0, 0, 0)
    return PresetRun(spec, basis_state(basis, occ), _grid(100.0, 1001),
                     {"preset": "four_site_congestion", "params": dict(p),
                      "convention": _SPLITTING_NOTE})


def _two_site_pump(p: dict) -> PresetRun:
    J, gin, gout = p["J"], p["gamma_in"], p["gamma_out"]
    if J <= 0 or gin < 0 or gout < 0 or gin + gout == 0:
        raise ValueError("two_site_pump: need J > 0 and rates >= 0, not both zero")
    spec = NetworkSpec(
        sites=(SiteDescriptor("1", "qubit", 2), SiteDescriptor("2", "qubit", 2)),
        hoppings=(("1", "2", J / 2),),
        jumps=(Injection("1", gin), Extraction("2", gout)),
        note="coherent dimer pumped at one end and drained at the other",
    )
    basis = spec.basis()
    initial = p["initial"]
    occ = {"empty": (0, 0), "site1": (1, 0), "site2": (0, 1)}.get(initial)
    if occ is None:
        raise ValueError("two_site_pump: initial must be empty, site1, or site2")
    return PresetRun(spec, basis_state(basis, occ), _grid(40.0, 2001),
                     {"preset": "two_site_pump", "params": dict(p),
                      "convention": _SPLITTING_NOTE})


def _three_site_pump(p: dict) -> PresetRun:
    J, gin, gout = p["J"], p["gamma_in"], p["gamma_out"]
    if J <= 0 or gin < 0 or gout < 0 or gin + gout == 0:
        raise ValueError("three_site_pump: need J > 0 and rates >= 0, not both zero")
    spec = NetworkSpec(
        sites=tuple(SiteDescriptor(str(k), "qubit", 2) for k in (1, 2, 3)),
        hoppings=(("1", "2", J / 2), ("2", "3", J / 2)),
        jumps=(Injection("1", gin), Extraction("3", gout)),
        note="uniform three-site chain pumped at one end and drained at the other",
    )
    basis = spec.basis()
    return PresetRun(spec, basis_state(basis, (0, 0, 0)), _grid(40.0, 2001),
                     {"preset": "three_site_pump", "params": dict(p),
                      "convention": _SPLITTING_NOTE})


def _hop_transfer(p: dict) -> PresetRun:
    J, gamma = p["J"], p["gamma"]
    if J <= 0 or gamma <= 0:
        raise ValueError("hop_transfer: need J > 0 and gamma > 0")
    spec = NetworkSpec(
        sites=tuple(SiteDescriptor(str(k), "qubit", 2) for k in (1, 2, 3)),
        hoppings=(("1", "2", J / 2),),
        jumps=(Transfer("2", "3", gamma),),
        note="coherent dimer with one excitation hopped off to a sink qubit",
    )
    basis = spec.basis()
    return PresetRun(spec, basis_state(basis, (1, 1, 0)), _grid(10.0 / gamma, 1001),
                     {"preset": "hop_transfer", "params": dict(p),
                      "convention": _SPLITTING_NOTE})


def _ring_labels(N: int) -> list[str]:
    return [f"r{j}" for j in range(1, N + 1)]


def _noise_profile(kind: str, amplitude: float, count: int, seed: int) -> list[float]:
    if kind == "cosine":
        return cosine_noise(amplitude, count)
    if kind == "uniform":
        return uniform_noise(amplitude, count, seed)
    if kind == "none":
        return [0.0] * count
    raise ValueError(f"unknown noise profile {kind!r}; valid: cosine, uniform, none")


def _lh1_ring(p: dict) -> PresetRun:
    N = p["N"]
    if not isinstance(N, (int, np.integer)) or N < 2 or N % 2:
        raise ValueError("lh1_ring: N must be an even integer >= 2")
    t_hop, J, delta = p["t"], p["J"], p["delta"]
    gamma, gamma_b = p["gamma"], p["gamma_b"]
    gdiss, gdeph = p["gamma_diss"], p["gamma_deph"]
    battery_dim = p["battery_dim"]
    n_exc = p["excitations"]
    if t_hop <= 0 or J < 0:
        raise ValueError("lh1_ring: need t > 0 and J >= 0")
    if not 0 <= delta < 1:
        raise ValueError("lh1_ring: delta must be in [0, 1)")
    for r, what in ((gamma, "gamma"), (gamma_b, "gamma_b"), (gdiss, "gamma_diss"),
                    (gdeph, "gamma_deph")):
        _check_rate(r, f"lh1_ring {what}")
    if battery_dim is not None and (not isinstance(battery_dim, (int, np.integer))
                                    or battery_dim < 2):
        raise ValueError("lh1_ring: battery_dim must be None or an integer >= 2")

    ring = _ring_labels(N)
    sites = [SiteDescriptor(lbl, "qubit", 2) for lbl in ring]
    sites.append(SiteDescriptor("c", "qubit", 2))
    sites.append(SiteDescriptor("rc", "qubit", 2))
    if battery_dim is not None:
        sites.append(SiteDescriptor("bat", "spin", int(battery_dim)))

    unit = p["energy_unit"]
    if unit == "meV":
        scale = 1.0 / HBAR_MEV_PS
    elif unit == "internal":
        scale = 1.0
    else:
        raise ValueError("lh1_ring: energy_unit must be 'meV' or 'internal'")

    hoppings = []
    for j in range(1, N + 1):
        a, b = ring[j - 1], ring[j % N]
        # dimerized bond j: t (1 + delta (-1)^j)
        hoppings.append((a, b, scale * t_hop * (1 + delta * (-1) ** j)))
    for lbl in ring:
        hoppings.append((lbl, "c", scale * J))

    onsite = [(lbl, scale * eps) for lbl, eps in
              zip(ring, _noise_profile(p["noise"], t_hop, N, p["seed"]))]

    jumps: list[JumpProcess] = [Transfer("c", "rc", gamma)]
    if battery_dim is not None:
        jumps.append(Transfer("rc", "bat", gamma_b))
    if gdiss > 0:
        jumps.extend(Dissipation(lbl, gdiss) for lbl in ring)
    if gdeph > 0:
        jumps.extend(Dephasing(lbl, gdeph) for lbl in ring)

    spec = NetworkSpec(
        sites=tuple(sites), hoppings=tuple(hoppings), onsite=tuple(onsite),
        jumps=tuple(jumps),
        note="dimerized antenna ring feeding a reaction-center qubit and battery",
    )
    basis = spec.basis()
    initial = dicke_state(basis, ring, n_exc)
    meta = {
        "preset": "lh1_ring", "params": dict(p),
        "energy_conversion": {"unit": unit, "hbar_meV_ps": HBAR_MEV_PS,
                              "scale_applied": scale},
        "noise": {"profile": p["noise"], "amplitude": t_hop,
                  "phase_constant": NOISE_PHASE_CONSTANT, "seed": p["seed"],
                  "sites": ring},
        "convention": "ring bond amplitudes and spoke J are direct matrix elements",
    }
    return PresetRun(spec, initial, _grid(40.0, 401), meta)


def _open_chain_pump(p: dict) -> PresetRun:
    N, J = p["N"], p["J"]
    gin, gout = p["gamma_in"], p["gamma_out"]
    gdiss, gdeph = p["gamma_diss"], p["gamma_deph"]
    if not isinstance(N, (int, np.integer)) or N < 2:
        raise ValueError("open_chain_pump: N must be an integer >= 2")
    if J <= 0 or gin < 0 or gout < 0 or gin + gout == 0:
        raise ValueError("open_chain_pump: need J > 0 and rates >= 0, not both zero")
    _check_rate(gdiss, "open_chain_pump gamma_diss")
    _check_rate(gdeph, "open_chain_pump gamma_deph")
    labels = [str(k) for k in range(1, N + 1)]
    sites = tuple(SiteDescriptor(lbl, "qubit", 2) for lbl in labels)
    hoppings = tuple((labels[k], labels[k + 1], J) for k in range(N - 1))
    onsite = tuple((lbl, eps) for lbl, eps in
                   zip(labels, _noise_profile(p["noise"], J, N, p["seed"])))
    jumps: list[JumpProcess] = [Injection(labels[0], gin), Extraction(labels[-1], gout)]
    inner = labels[1:-1]
    if gdiss > 0:
        jumps.extend(Dissipation(lbl, gdiss) for lbl in inner)
    if gdeph > 0:
        jumps.extend(Dephasing(lbl, gdeph) for lbl in inner)
    spec = NetworkSpec(
        sites=sites, hoppings=hoppings, onsite=onsite, jumps=tuple(jumps),
        note="open uniform chain pumped at site 1 and drained at site N",
    )
    basis = spec.basis()
    meta = {
        "preset": "open_chain_pump", "params": dict(p),
        "noise": {"profile": p["noise"], "amplitude": J,
                  "phase_constant": NOISE_PHASE_CONSTANT, "seed": p["seed"],
                  "sites": labels},
        "convention": "chain amplitudes are direct matrix elements",
    }
    return PresetRun(spec, basis_state(basis, (0,) * N), _grid(40.0, 2001), meta)


_PRESETS: dict[str, tuple[dict, Any, str]] = {
    "two_site_transfer": (
        {"gamma": 1.0}, _two_site_transfer,
        "two qubits, incoherent transfer 1 -> 2 at rate gamma, start |1,0>"),
    "qubit_to_battery": (
        {"gamma": 0.5, "s": 1.0, "n_tot": 1}, _qubit_to_battery,
        "qubit feeding a spin-s battery; total number n_tot sets the rate"),
    "four_site_congestion": (
        {"J": 1.0, "gamma": 0.1, "gamma_b": 0.1, "excitations": 2}, _four_site_congestion,
        "dimer 1-2 (splitting J), transfers 2->3 (gamma) and 3->4 (gamma_b)"),
    "two_site_pump": (
        {"J": 2.0, "gamma_in": 0.2, "gamma_out": 0.3, "initial": "empty"}, _two_site_pump,
        "dimer with injection at 1 and extraction at 2"),
    "three_site_pump": (
        {"J": 2.0, "gamma_in": 0.2, "gamma_out": 0.3}, _three_site_pump,
        "uniform chain 1-2-3 with injection at 1 and extraction at 3"),
    "hop_transfer": (
        {"J": 2.0, "gamma": 1.0}, _hop_transfer,
        "dimer 1-2 (splitting J) with transfer 2->3, start |1,1,0>"),
    "lh1_ring": (
        {"N": 4, "t": 1.0, "J": 1.0, "delta": 0.12, "gamma": 0.3, "gamma_b": 0.1,
         "gamma_diss": 0.0, "gamma_deph": 0.0, "battery_dim": 3, "excitations": 2,
         "noise": "cosine", "seed": 0, "energy_unit": "meV"}, _lh1_ring,
        "dimerized ring + central site + reaction center (+ optional spin battery)"),
    "open_chain_pump": (
        {"N": 6, "J": 1.0, "gamma_in": 0.2, "gamma_out": 0.3, "gamma_diss": 0.0,
         "gamma_deph": 0.0, "noise": "none", "seed": 0}, _open_chain_pump,
        "open chain with injection at site 1 and extraction at site N"),
}


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def preset_defaults(name: str) -> dict:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; valid: {preset_names()}")
    return dict(_PRESETS[name][0])


def preset_description(name: str) -> str:
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; valid: {preset_names()}")
    return _PRESETS[name][2]


def preset(params: PresetParams | str, **overrides: Any) -> PresetRun:
    """Resolve a preset by PresetParams or by name plus keyword overrides."""
    if isinstance(params, str):
        params = PresetParams(params, overrides)
    elif overrides:
        raise ValueError("pass overrides inside PresetParams or as keywords, not both")
    if params.name not in _PRESETS:
        raise ValueError(f"unknown preset {params.name!r}; valid: {preset_names()}")
    defaults, builder, _ = _PRESETS[params.name]
    return builder(_merge(defaults, params.values, params.name))
