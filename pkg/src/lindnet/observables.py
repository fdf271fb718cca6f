"""Derived observables and effect detectors.

Measurement helpers work on density matrices plus a generator or
Hamiltonian; detectors turn recorded trajectories or parameter sweeps into a
detected / not-detected verdict with the numbers that justify it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from lindnet.dynamics import LindbladGenerator, lindblad_apply
from lindnet.hilbert import DensityMatrix

__all__ = [
    "population",
    "purity_and_rate",
    "eigenbasis_element",
    "unitarity_distance",
    "FrequencyEstimate",
    "dominant_frequency",
    "EffectReport",
    "detect_congestion_valley",
    "staircase_steps",
    "detect_asymptotic_unitarity",
]


def population(state: DensityMatrix, site_label: str) -> float:
    """Mean occupation of one site."""
    basis = state.basis
    if basis is None:
        raise ValueError("state carries no basis; population is undefined")
    col = basis.site_position(site_label)
    occ = basis.occupation_table[:, col]
    return float(np.real(np.diag(state.matrix)) @ occ)


def purity_and_rate(state: DensityMatrix, gen: LindbladGenerator) -> tuple[float, float]:
    """Tr rho^2 and its instantaneous time derivative under the generator."""
    rho = state.matrix
    purity = float(np.vdot(rho, rho).real)
    rate = 2.0 * float(np.vdot(rho, lindblad_apply(gen, rho)).real)
    return purity, rate


def _eigh_deterministic(H: np.ndarray, degeneracy_tol: float = 1e-10):
    """Eigenbasis of H with a reproducible choice inside degenerate clusters.

    Eigenvalues ascend. Within each near-degenerate cluster the subspace is
    re-spanned by projecting computational basis vectors in index order and
    orthonormalizing, and every vector's phase is fixed by making its largest
    component (lowest index on ties) real positive.
    """
    evals, evecs = np.linalg.eigh(H)
    scale = max(1.0, float(evals[-1] - evals[0]) if evals.size > 1 else 1.0)
    tol = degeneracy_tol * scale
    D = evals.size
    start = 0
    while start < D:
        stop = start + 1
        while stop < D and evals[stop] - evals[stop - 1] < tol:
            stop += 1
        if stop - start > 1:
            block = evecs[:, start:stop]
            P = block @ block.conj().T
            chosen = []
            for idx in range(D):
                v = P[:, idx].copy()
                for u in chosen:
                    v -= u * (u.conj() @ v)
                nrm = float(np.linalg.norm(v))
                if nrm > 1e-8:
                    chosen.append(v / nrm)
                if len(chosen) == stop - start:
                    break
            evecs[:, start:stop] = np.column_stack(chosen)
        start = stop
    for k in range(D):
        v = evecs[:, k]
        mags = np.abs(v)
        lead = int(np.flatnonzero(mags >= mags.max() - 1e-12)[0])
        phase = v[lead] / abs(v[lead])
        evecs[:, k] = v / phase
    return evals, evecs


def eigenbasis_element(rho: np.ndarray, H: np.ndarray, bra: int, ket: int) -> complex:
    """Matrix element <bra| rho |ket> between eigenvectors of H.

    bra and ket index the eigenvectors in ascending-eigenvalue order, with
    the reproducible degenerate-subspace convention of _eigh_deterministic.
    """
    rho = np.asarray(rho, dtype=complex)
    _, evecs = _eigh_deterministic(np.asarray(H, dtype=complex))
    D = evecs.shape[1]
    if not (0 <= bra < D and 0 <= ket < D):
        raise ValueError(f"eigenvector indices must lie in 0..{D - 1}")
    return complex(evecs[:, bra].conj() @ rho @ evecs[:, ket])


def unitarity_distance(rho_t: np.ndarray, rho_ref: np.ndarray,
                       H: np.ndarray, t: float) -> float:
    """Operator-norm distance from rho_t to the unitarily rotated reference.

    The reference orbit is exp(-iHt) rho_ref exp(+iHt) with rho_ref anchored
    at t = 0.
    """
    H = np.asarray(H, dtype=complex)
    evals, evecs = np.linalg.eigh(H)
    U = (evecs * np.exp(-1j * evals * t)) @ evecs.conj().T
    delta = np.asarray(rho_t, dtype=complex) - U @ np.asarray(rho_ref, complex) @ U.conj().T
    return float(np.linalg.norm(delta, 2))


@dataclass(frozen=True)
class FrequencyEstimate:
    """Oscillation frequency read off extremum spacings."""

    omega: float
    period: float
    n_extrema: int
    spacing_spread: float  # relative std of the extremum spacings


def dominant_frequency(times: np.ndarray, values: np.ndarray,
                       tail_fraction: float = 0.25,
                       floor: float = 1e-6) -> FrequencyEstimate:
    """Frequency of a damped oscillation around its asymptote.

    Consecutive extrema of exp(-g t) cos(w t + p) are spaced exactly pi / w
    regardless of g, so the mean refined extremum spacing gives w without
    fitting the envelope. The asymptote is estimated as the tail mean; only
    extrema standing above `floor` (relative to the peak deviation) count.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1 or t.size < 8:
        raise ValueError("need matching 1-D arrays with at least 8 samples")
    n_tail = max(2, int(t.size * tail_fraction))
    signal = y - y[-n_tail:].mean()
    peak = float(np.abs(signal).max())
    if peak == 0.0:
        raise ValueError("signal is flat; no oscillation to measure")

    locs = []
    for k in range(1, t.size - 1):
        d1 = signal[k] - signal[k - 1]
        d2 = signal[k + 1] - signal[k]
        if d1 == 0.0 and d2 == 0.0:
            continue
        if (d1 >= 0 >= d2 or d1 <= 0 <= d2) and abs(signal[k]) > floor * peak:
            # parabolic refinement through the three neighbouring samples
            denom = signal[k - 1] - 2.0 * signal[k] + signal[k + 1]
            if denom == 0.0:
                locs.append(t[k])
                continue
            shift = 0.5 * (signal[k - 1] - signal[k + 1]) / denom
            shift = float(np.clip(shift, -1.0, 1.0))
            step = 0.5 * (t[k + 1] - t[k - 1])
            locs.append(t[k] + shift * step)
    if len(locs) < 3:
        raise ValueError(
            f"only {len(locs)} usable extrema; need at least 3 to measure a frequency")
    spacings = np.diff(np.asarray(locs))
    mean_gap = float(spacings.mean())
    omega = math.pi / mean_gap
    spread = float(spacings.std() / mean_gap) if spacings.size > 1 else 0.0
    return FrequencyEstimate(omega=omega, period=2.0 * math.pi / omega,
                             n_extrema=len(locs), spacing_spread=spread)


@dataclass(frozen=True)
class EffectReport:
    """Detector verdict: the numbers dict is populated only when detected."""

    effect: str
    detected: bool
    numbers: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)


def detect_congestion_valley(gamma_values: np.ndarray, populations: np.ndarray,
                             noise_floor: float = 1e-6) -> EffectReport:
    """Find a congestion valley in a drain-rate sweep.

    The effect: the delivered population at a fixed readout time dips at an
    intermediate drain rate, so the sweep has an interior strict minimum
    whose depth on both flanks exceeds noise_floor.
    """
    g = np.asarray(gamma_values, dtype=float)
    p = np.asarray(populations, dtype=float)
    if g.shape != p.shape or g.ndim != 1 or g.size < 3:
        raise ValueError("need matching 1-D sweeps with at least 3 points")
    if not np.all(np.diff(g) > 0):
        raise ValueError("gamma_values must be strictly increasing")
    k = int(np.argmin(p))
    diagnostics = {"minimum_index": k, "minimum_value": float(p[k]),
                   "edge_values": (float(p[0]), float(p[-1]))}
    if k == 0 or k == g.size - 1:
        return EffectReport("congestion_valley", False, {}, diagnostics)
    depth_left = float(p[:k].max() - p[k])
    depth_right = float(p[k + 1:].max() - p[k])
    depth = min(depth_left, depth_right)
    diagnostics["depth"] = depth
    if depth <= noise_floor:
        return EffectReport("congestion_valley", False, {}, diagnostics)
    numbers = {"gamma_at_minimum": float(g[k]), "minimum_population": float(p[k]),
               "depth": depth, "plateau_population": float(p[-1])}
    return EffectReport("congestion_valley", True, numbers, diagnostics)


def staircase_steps(times: np.ndarray, n_first: np.ndarray, n_second: np.ndarray,
                    slope_ratio: float = 0.25, transverse_floor: float = 0.01,
                    min_samples: int = 3,
                    min_advance_fraction: float = 0.05) -> EffectReport:
    """Segment a planar population curve into an alternating staircase.

    The effect: (n_first(t), n_second(t)) advances in axis-aligned moves,
    one population filling while the other holds. A greedy pass grows each
    segment until the transverse net drift exceeds slope_ratio times the
    along-axis net advance plus transverse_floor, then switches axis. A
    segment only counts when it holds min_samples points and advances along
    its axis by min_advance_fraction of the larger coordinate span, which
    keeps diagonal motion from registering as many short steps. At least
    three qualifying segments count as detected; the mean step duration
    averages the interior segments only, because the first segment starts
    mid-step at t = 0 and the last is cut off by the end of the data.
    """
    t = np.asarray(times, dtype=float)
    x = np.asarray(n_first, dtype=float)
    y = np.asarray(n_second, dtype=float)
    if not (t.shape == x.shape == y.shape) or t.ndim != 1 or t.size < 3 * min_samples:
        raise ValueError("need matching 1-D arrays long enough for three segments")

    coords = (x, y)
    span = max(x.max() - x.min(), y.max() - y.min())
    min_advance = min_advance_fraction * span

    def grow(start: int, axis: int) -> int:
        """Largest end index (inclusive) for a segment along `axis`."""
        along, across = coords[axis], coords[1 - axis]
        end = start
        for j in range(start + 1, t.size):
            adv = abs(along[j] - along[start])
            drift = abs(across[j] - across[start])
            if drift > slope_ratio * adv + transverse_floor:
                break
            end = j
        return end

    # the axis that carries the longer opening segment goes first
    axis = 0 if grow(0, 0) >= grow(0, 1) else 1
    segments = []
    start = 0
    while start < t.size - 1:
        end = grow(start, axis)
        along = coords[axis]
        if end - start + 1 < min_samples or abs(along[end] - along[start]) < min_advance:
            break
        segments.append((start, end, axis))
        if end >= t.size - 1:
            break
        start = end
        axis = 1 - axis

    durations = [float(t[e] - t[s]) for s, e, _ in segments]
    diagnostics = {
        "n_segments": len(segments),
        "segment_axes": ["first" if a == 0 else "second" for _, _, a in segments],
        "segment_durations": durations,
    }
    if len(segments) < 3:
        return EffectReport("staircase", False, {}, diagnostics)
    interior = durations[1:-1]
    numbers = {
        "n_steps": len(segments),
        "mean_step_duration": float(np.mean(interior)),
        "interior_durations": interior,
    }
    return EffectReport("staircase", True, numbers, diagnostics)


def detect_asymptotic_unitarity(times: np.ndarray, distances: np.ndarray,
                                min_decades: float = 2.0,
                                max_log_residual: float = 0.05) -> EffectReport:
    """Check that the distance to a unitary orbit decays as one exponential.

    Fits log(distance) linearly in time over the points standing above
    numerical noise; detected when the fit drops at a positive rate over at
    least min_decades with RMS log-residual under max_log_residual.
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(distances, dtype=float)
    if t.shape != d.shape or t.ndim != 1 or t.size < 4:
        raise ValueError("need matching 1-D arrays with at least 4 samples")
    keep = d > 1e-12
    diagnostics = {"n_points": int(keep.sum())}
    if keep.sum() < 4:
        return EffectReport("asymptotic_unitarity", False, {}, diagnostics)
    tk, dk = t[keep], np.log(d[keep])
    slope, intercept = np.polyfit(tk, dk, 1)
    resid = dk - (slope * tk + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    decades = float((dk.max() - dk.min()) / math.log(10.0))
    diagnostics.update({"rate": float(-slope), "log_residual_rms": rms,
                        "decades_spanned": decades})
    detected = slope < 0 and decades >= min_decades and rms <= max_log_residual
    if not detected:
        return EffectReport("asymptotic_unitarity", False, {}, diagnostics)
    numbers = {"rate": float(-slope), "decades_spanned": decades,
               "log_residual_rms": rms}
    return EffectReport("asymptotic_unitarity", True, numbers, diagnostics)
