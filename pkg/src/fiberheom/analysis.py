"""Entanglement metrics, trajectory statistics and the analytic dephasing oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import SIGMA_Y, hermitian_eig, kron, singular_values
from .model import BellState, ModelError, Topology, coupling_operators

NOT_REACHED = math.inf
NOT_DEFINED = math.nan

_YY = kron(SIGMA_Y, SIGMA_Y)
_RANK_TOL = 1e-13


class AnalysisError(ValueError):
    pass


@dataclass
class Trajectory:
    times: np.ndarray
    distances: np.ndarray
    concurrences: np.ndarray
    rdms: np.ndarray | None = None
    pulses_applied: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.distances = np.asarray(self.distances, dtype=float)
        self.concurrences = np.asarray(self.concurrences, dtype=float)
        if not (len(self.times) == len(self.distances) == len(self.concurrences)):
            raise AnalysisError("trajectory arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise AnalysisError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)


@dataclass
class CellRecord:
    distance_to_threshold_km: float = NOT_REACHED
    residual_concurrence: float = NOT_DEFINED
    non_markovianity: float = NOT_DEFINED


@dataclass
class SweepResult:
    eta_values: np.ndarray
    lc_values: np.ndarray
    cells: list = field(default_factory=list)

    def __post_init__(self):
        if self.cells and (
            len(self.cells) != len(self.eta_values)
            or any(len(row) != len(self.lc_values) for row in self.cells)
        ):
            raise AnalysisError("sweep cells do not match the axis lengths")


def concurrence(rho, *, herm_tol=1e-8, trace_tol=1e-6, neg_tol=1e-6):
    """Wootters concurrence of a two-qubit density matrix.

    With ``rho = X X^dagger`` (``X`` built from the eigen-decomposition), the
    square roots of the eigenvalues of ``rho @ rho_tilde`` are the singular
    values of ``X^T (Y kron Y) X``. Taking them from an SVD keeps the
    vanishing ones at rounding level instead of ``sqrt(eps)``.

    Eigenvalues of ``rho`` down to ``-neg_tol`` are clamped to zero here
    only; the input is never modified.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (4, 4):
        raise AnalysisError(f"concurrence: expected a 4x4 matrix, got {rho.shape}")
    herm_err = np.max(np.abs(rho - rho.conj().T))
    if herm_err > herm_tol:
        raise AnalysisError(f"concurrence: Hermiticity violated ({herm_err:.3e} > {herm_tol:g})")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise AnalysisError(f"concurrence: trace {tr.real:.9f} differs from 1 by more than {trace_tol:g}")
    w, v = hermitian_eig(0.5 * (rho + rho.conj().T), tol=herm_tol)
    if w[0] < -neg_tol:
        raise AnalysisError(f"concurrence: eigenvalue {w[0]:.3e} below -{neg_tol:g}")
    # Rounding-level eigenvalues are exact zeros.
    keep = w > _RANK_TOL * max(w[-1], 0.0)
    x = v[:, keep] * np.sqrt(w[keep])
    lam = np.zeros(4)
    if x.shape[1]:
        sv = singular_values(x.T @ _YY @ x)
        lam[: sv.size] = sv
    c = lam[0] - lam[1] - lam[2] - lam[3]
    return float(min(1.0, max(0.0, c)))


def spin_flip_values(rho):
    """Square roots of the eigenvalues of ``rho @ rho_tilde``, descending (reference route)."""
    rho = np.asarray(rho, dtype=np.complex128)
    rho_tilde = _YY @ rho.conj() @ _YY
    mu = np.linalg.eigvals(rho @ rho_tilde)
    return np.sort(np.sqrt(np.clip(mu.real, 0.0, None)))[::-1]


def non_markovianity(traj):
    """Total variation of the concurrence minus its net decrease, on the sampled grid."""
    c = np.asarray(traj.concurrences if isinstance(traj, Trajectory) else traj, dtype=float)
    if c.size < 2:
        raise AnalysisError("non_markovianity needs at least 2 samples")
    value = np.sum(np.abs(np.diff(c))) - (c[0] - c[-1])
    return float(max(0.0, value))


def distance_to_threshold(traj, threshold=0.1):
    """Distance at which the concurrence first drops to ``threshold``.

    Linear interpolation between the bracketing samples; ``NOT_REACHED``
    (``inf``) when the trajectory never gets there.
    """
    if not 0.0 < threshold < 1.0:
        raise AnalysisError("threshold must lie in (0, 1)")
    c = traj.concurrences
    d = traj.distances
    below = np.nonzero(c <= threshold)[0]
    if below.size == 0:
        return NOT_REACHED
    i = below[0]
    if i == 0:
        return float(d[0])
    c0, c1 = c[i - 1], c[i]
    frac = (c0 - threshold) / (c0 - c1)
    return float(d[i - 1] + frac * (d[i] - d[i - 1]))


def dd_advantage(c_cpmg, c_udd):
    """Relative residual-concurrence advantage of CPMG over UDD."""
    if not c_cpmg > 0:
        return NOT_DEFINED
    return (c_cpmg - c_udd) / c_cpmg


def _bell_pair(state_kind):
    kind = BellState(state_kind)
    if kind in (BellState.PHI_PLUS, BellState.PHI_MINUS):
        return 0, 3
    return 1, 2


def dephasing_charges(topology, state_kind):
    """Coupling-eigenvalue differences between the two branches of a Bell state, per bath."""
    a, b = _bell_pair(state_kind)
    return [float((q[a, a] - q[b, b]).real) for q in coupling_operators(Topology(topology))]


def dephasing_prefactor(topology, state_kind):
    """Integer K in C(t) = exp(-K eta (gamma t - 1 + exp(-gamma t)) / gamma^2)."""
    return int(round(sum(q * q for q in dephasing_charges(topology, state_kind))))


def _switched_noise_integral(gamma, t, pulse_times):
    """Double integral of y(s) y(u) exp(-gamma |s - u|) over [0, t]^2.

    ``y`` starts at +1 and flips sign at every pulse time before ``t``.
    """
    edges = [0.0] + [p for p in pulse_times if 0.0 < p < t] + [t]
    lengths = np.diff(edges)
    total = 0.0
    # Same-segment contributions.
    for L in lengths:
        x = gamma * L
        total += 2.0 * (x + math.expm1(-x)) / gamma**2
    # Cross terms; segments are contiguous, so
    # pair (i < j) gives s_i s_j exp(-gamma (a_j - b_i)) expm1(-g L_i) expm1(-g L_j) / g^2.
    carry = 0.0
    sign = 1.0
    for L in lengths:
        e = math.expm1(-gamma * L)
        total += 2.0 * sign * e * carry / gamma**2
        carry = carry * math.exp(-gamma * L) + sign * e
        sign = -sign
    return total


def dephasing_oracle(eta, gamma, t, topology=Topology.INDEPENDENT,
                     state_kind=BellState.PHI_PLUS, pulse_times=None):
    """Exact concurrence of a Bell state under Gaussian pure dephasing.

    The bath correlation is ``eta * exp(-gamma |t|)`` and each bath couples
    through its ``sigma_z``-type operator, so the Bell coherence picks up a
    Gaussian random phase whose variance follows from the second cumulant.
    Ideal ``X x X`` pulses at ``pulse_times`` flip the sign of every coupling
    operator, which enters as a switching function. Without pulses::

        C(t) = exp(-K * eta * (gamma t - 1 + exp(-gamma t)) / gamma**2)

    Accepts scalar or array ``t``.
    """
    if isinstance(eta, complex) or np.iscomplexobj(eta):
        raise AnalysisError("dephasing_oracle needs a real correlation amplitude")
    if not gamma > 0:
        raise AnalysisError("dephasing_oracle needs gamma > 0")
    if eta < 0:
        raise AnalysisError("dephasing_oracle needs eta >= 0")
    k = dephasing_prefactor(topology, state_kind)
    pulses = sorted(pulse_times) if pulse_times is not None else []
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty(ts.shape)
    for i, ti in enumerate(ts):
        if ti <= 0.0:
            out[i] = 1.0
            continue
        if pulses:
            integral = _switched_noise_integral(gamma, ti, pulses)
        else:
            x = gamma * ti
            integral = 2.0 * (x + math.expm1(-x)) / gamma**2
        out[i] = math.exp(-0.5 * k * eta * integral)
    return float(out[0]) if np.ndim(t) == 0 else out


def ou_monte_carlo(eta, gamma, times, topology=Topology.INDEPENDENT,
                   state_kind=BellState.PHI_PLUS, n_realizations=10_000,
                   seed=0, pulse_times=None, substeps=4):
    """Classical Ornstein-Uhlenbeck dephasing simulation.

    Each bath is a stationary OU process with variance ``eta`` and rate
    ``gamma``. The process and its time integral are sampled jointly and
    exactly on the grid (no discretization error), so the only error is
    statistical.

    Returns
    -------
    mean, stderr : ndarray
        Concurrence estimate and its standard error at each of ``times``.
    """
    if eta < 0 or not gamma > 0:
        raise AnalysisError("ou_monte_carlo needs eta >= 0 and gamma > 0")
    rng = np.random.default_rng(seed)
    charges = dephasing_charges(topology, state_kind)
    times = np.asarray(times, dtype=float)
    pulses = np.asarray(sorted(pulse_times) if pulse_times is not None else [], dtype=float)

    grid = [0.0]
    marks = np.concatenate([times, pulses])
    for stop in np.unique(marks[marks > 0]):
        start = grid[-1]
        grid.extend(np.linspace(start, stop, substeps + 1)[1:])
    grid = np.array(grid)

    n_baths = len(charges)
    xi = rng.normal(0.0, math.sqrt(eta), size=(n_baths, n_realizations))
    phase = np.zeros((n_baths, n_realizations))
    snapshots = {}
    for k in range(1, len(grid)):
        h = grid[k] - grid[k - 1]
        mid = 0.5 * (grid[k] + grid[k - 1])
        sign = -1.0 if np.count_nonzero(pulses < mid) % 2 else 1.0
        decay = math.exp(-gamma * h)
        # Conditional moments of (xi(t+h), int_t^{t+h} xi) given xi(t).
        var_x = eta * -math.expm1(-2.0 * gamma * h)
        var_i = eta / gamma**2 * (2.0 * gamma * h - 3.0 + 4.0 * decay - decay**2)
        cov = eta / gamma * (1.0 - decay) ** 2
        var_i = max(var_i, 0.0)
        l11 = math.sqrt(var_x)
        l21 = cov / l11 if l11 > 0 else 0.0
        l22 = math.sqrt(max(var_i - l21**2, 0.0))
        z1 = rng.standard_normal((n_baths, n_realizations))
        z2 = rng.standard_normal((n_baths, n_realizations))
        integral = xi * (1.0 - decay) / gamma + l21 * z1 + l22 * z2
        xi = xi * decay + l11 * z1
        phase += sign * integral
        snapshots[grid[k]] = phase.copy()

    mean = np.empty(times.shape)
    err = np.empty(times.shape)
    q = np.asarray(charges)[:, None]
    for i, t in enumerate(times):
        if t <= 0:
            mean[i], err[i] = 1.0, 0.0
            continue
        total_phase = np.sum(q * snapshots[t], axis=0)
        samples = np.cos(total_phase)
        mean[i] = samples.mean()
        err[i] = samples.std(ddof=1) / math.sqrt(n_realizations)
    return mean, err


__all__ = [
    "NOT_DEFINED", "NOT_REACHED", "AnalysisError", "CellRecord", "ModelError",
    "SweepResult", "Trajectory", "concurrence", "dd_advantage",
    "dephasing_charges", "dephasing_oracle", "dephasing_prefactor",
    "distance_to_threshold", "non_markovianity", "ou_monte_carlo", "spin_flip_values",
]
