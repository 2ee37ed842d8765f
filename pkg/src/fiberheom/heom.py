"""Hierarchical equations of motion for a 4x4 system with exponential baths.

The hierarchy is stored unscaled: ``adms[m]`` is the auxiliary density matrix
for multi-index ``layout.indices[m]``; position 0 is the physical reduced
density matrix. Mode ``k`` couples through operator ``Q_k`` with bath
correlation term ``c_k exp(-nu_k t)``, and for every index ``n``::

    d rho_n/dt = -i[H, rho_n] - (sum_k n_k nu_k) rho_n
                 - i sum_k [Q_k, rho_{n+e_k}]
                 - i sum_k n_k (Re c_k [Q_k, rho_{n-e_k}] + i Im c_k {Q_k, rho_{n-e_k}})

ADMs beyond the truncation depth are taken to be zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np
import scipy.sparse as sp

from . import control, kernels
from .linalg import commutator
from .analysis import Trajectory, concurrence
from .model import ModelConfig, bell_state, build_baths, build_system_hamiltonian

logger = logging.getLogger(__name__)

DIM = 4
NONE = -1


class HeomError(ValueError):
    pass


class NumericalBlowup(ArithmeticError):
    def __init__(self, t):
        super().__init__(f"non-finite hierarchy state at t = {t:.9g} us")
        self.t = t


@dataclass(frozen=True)
class HierarchyLayout:
    n_modes: int
    max_depth: int
    indices: np.ndarray
    neighbor_up: np.ndarray
    neighbor_down: np.ndarray

    def __len__(self):
        return len(self.indices)

    def position(self, index):
        return self._lookup[tuple(int(v) for v in index)]

    @property
    def _lookup(self):
        return {tuple(int(v) for v in row): m for m, row in enumerate(self.indices)}


def enumerate_hierarchy(n_modes: int, max_depth: int) -> HierarchyLayout:
    """All multi-indices with total at most ``max_depth``, in graded order.

    Within a level, indices are sorted with the first mode most significant,
    so for two modes level 1 reads ``(1, 0), (0, 1)``.
    """
    if n_modes < 1 or max_depth < 0:
        raise HeomError("need n_modes >= 1 and max_depth >= 0")
    rows = []
    for level in range(max_depth + 1):
        block = []
        for combo in combinations_with_replacement(range(n_modes), level):
            n = [0] * n_modes
            for k in combo:
                n[k] += 1
            block.append(tuple(n))
        block.sort(reverse=True)
        rows.extend(block)
    indices = np.array(rows, dtype=np.int64).reshape(len(rows), n_modes)
    lookup = {row: m for m, row in enumerate(rows)}
    up = np.full((len(rows), n_modes), NONE, dtype=np.int64)
    down = np.full((len(rows), n_modes), NONE, dtype=np.int64)
    for m, row in enumerate(rows):
        for k in range(n_modes):
            raised = list(row)
            raised[k] += 1
            up[m, k] = lookup.get(tuple(raised), NONE)
            if row[k] > 0:
                lowered = list(row)
                lowered[k] -= 1
                down[m, k] = lookup[tuple(lowered)]
    for arr in (indices, up, down):
        arr.flags.writeable = False
    return HierarchyLayout(n_modes, max_depth, indices, up, down)


@dataclass(frozen=True)
class Mode:
    coupling: np.ndarray
    amplitude: complex
    rate: complex


def flatten_modes(baths):
    """One mode per (bath, exponent) pair, bath-major."""
    return [Mode(b.coupling, c, nu) for b in baths for c, nu in b.exponents]


@dataclass
class HierarchyState:
    layout: HierarchyLayout
    adms: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, layout, rho0, t=0.0):
        adms = np.zeros((len(layout), DIM, DIM), dtype=np.complex128)
        adms[0] = rho0
        return cls(layout, adms, t)

    @property
    def rdm(self):
        return self.adms[0]

    def copy(self):
        return HierarchyState(self.layout, self.adms.copy(), self.t)


def _check_modes(layout, modes):
    if len(modes) != layout.n_modes:
        raise HeomError(f"layout has {layout.n_modes} modes but baths provide {len(modes)}")


def heom_rhs(layout, H, baths, adms):
    """Time derivative of every ADM (reference implementation, dense numpy)."""
    modes = flatten_modes(baths)
    _check_modes(layout, modes)
    adms = np.asarray(adms)
    if adms.shape != (len(layout), DIM, DIM):
        raise HeomError(f"state shape {adms.shape} does not match layout of {len(layout)} ADMs")
    H = np.asarray(H, dtype=np.complex128)
    out = -1j * (H @ adms - adms @ H)
    rates = layout.indices @ np.array([m.rate for m in modes])
    out -= rates[:, None, None] * adms

    padded = np.concatenate([adms, np.zeros((1, DIM, DIM), dtype=np.complex128)])
    for k, mode in enumerate(modes):
        q = mode.coupling
        above = padded[layout.neighbor_up[:, k]]
        out -= 1j * (q @ above - above @ q)
        below = padded[layout.neighbor_down[:, k]]
        nk = layout.indices[:, k][:, None, None]
        comm = q @ below - below @ q
        anti = q @ below + below @ q
        out += nk * (-1j * mode.amplitude.real * comm + mode.amplitude.imag * anti)
    return out


def _left(a):
    # Row-major vectorization: vec(A X) = (A kron I) vec(X).
    return sp.kron(sp.csr_matrix(a), sp.identity(DIM), format="csr")


def _right(a):
    # vec(X A) = (I kron A^T) vec(X).
    return sp.kron(sp.identity(DIM), sp.csr_matrix(np.asarray(a).T), format="csr")


def liouvillian(layout, H, baths):
    """Sparse generator ``L`` with ``vec(d adms/dt) = L @ vec(adms)``."""
    modes = flatten_modes(baths)
    _check_modes(layout, modes)
    n_adm = len(layout)
    eye = sp.identity(n_adm, format="csr")
    comm_h = -1j * (_left(H) - _right(H))
    rates = layout.indices @ np.array([m.rate for m in modes])
    gen = sp.kron(eye, comm_h) - sp.kron(sp.diags(rates), sp.identity(DIM * DIM))
    rows = np.arange(n_adm)
    for k, mode in enumerate(modes):
        q = mode.coupling
        comm_q = _left(q) - _right(q)
        anti_q = _left(q) + _right(q)
        has_up = layout.neighbor_up[:, k] != NONE
        raise_k = sp.csr_matrix(
            (np.ones(has_up.sum()), (rows[has_up], layout.neighbor_up[has_up, k])),
            shape=(n_adm, n_adm),
        )
        has_down = layout.neighbor_down[:, k] != NONE
        lower_k = sp.csr_matrix(
            (layout.indices[has_down, k].astype(float), (rows[has_down], layout.neighbor_down[has_down, k])),
            shape=(n_adm, n_adm),
        )
        gen = gen + sp.kron(raise_k, -1j * comm_q)
        gen = gen + sp.kron(lower_k, -1j * mode.amplitude.real * comm_q + mode.amplitude.imag * anti_q)
    gen = sp.csr_matrix(gen, dtype=np.complex128)
    gen.eliminate_zeros()
    gen.sort_indices()
    return gen


def step_rk4(rhs, state, dt):
    """One classical RK4 step of ``d adms/dt = rhs(t, adms)`` for the whole hierarchy."""
    if not dt > 0:
        raise HeomError("dt must be positive")
    t, y = state.t, state.adms
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = rhs(t + dt, y + dt * k3)
    new = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(new).all():
        raise NumericalBlowup(t + dt)
    return HierarchyState(state.layout, new, t + dt)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-3
    sample_every: int | None = None
    max_depth: int = 10
    pulse_substep: float | None = None
    target_samples: int = 250

    def __post_init__(self):
        if not self.dt > 0:
            raise HeomError("dt must be positive")
        if self.max_depth < 0:
            raise HeomError("truncation depth must be >= 0")
        if self.sample_every is not None and self.sample_every < 1:
            raise HeomError("sample_every must be >= 1")
        if self.pulse_substep is not None and not 0 < self.pulse_substep <= self.dt:
            raise HeomError("pulse_substep must lie in (0, dt]")


@dataclass
class _Propagator:
    layout: HierarchyLayout
    baths: list
    backend: str | None
    _cache: dict = field(default_factory=dict)

    def generator(self, H):
        """Sparse generator for constant ``H``, plus split-off system energies.

        When ``H`` is diagonal and commutes with every coupling operator, the
        ``-i[H, .]`` part commutes with the rest of the generator and is
        propagated exactly as a phase; RK4 then only sees the bath terms.
        Returns ``(matrix, energies)`` with ``energies`` ``None`` otherwise.
        """
        key = H.tobytes()
        gen = self._cache.get(key)
        if gen is None:
            E = np.diag(H).real.copy()
            split = np.array_equal(H, np.diag(np.diag(H))) and all(
                np.allclose(commutator(H, b.coupling), 0.0, rtol=0.0, atol=1e-14) for b in self.baths
            )
            if split:
                gen = (liouvillian(self.layout, np.zeros_like(H), self.baths), E)
            else:
                gen = (liouvillian(self.layout, H, self.baths), None)
            self._cache[key] = gen
        return gen

    def advance(self, x, t0, t1, H, max_step):
        span = t1 - t0
        if span <= 0:
            return
        nsteps = max(1, math.ceil(span / max_step - 1e-9))
        h = span / nsteps
        mat, E = self.generator(H)
        phase = None
        if E is not None:
            block = np.exp(-1j * h * (E[:, None] - E[None, :])).ravel()
            phase = np.tile(block, len(self.layout.indices))
        status = kernels.rk4_propagate(mat, x, h, nsteps, self.backend, phase)
        if status >= 0:
            raise NumericalBlowup(t0 + (status + 1) * h)


def _sample_indices(n_total, every):
    idx = list(range(0, n_total + 1, every))
    if idx[-1] != n_total:
        idx.append(n_total)
    return idx


def evolve(cfg: ModelConfig, icfg: IntegratorConfig, T: float, schedule=None,
           backend=None, keep_rdms=True, check_conservation=False, initial_rdm=None):
    """Integrate the hierarchy from a Bell state over ``[0, T]``.

    Samples are taken on the base grid every ``sample_every`` steps and at
    ``T``. Ideal pulses are applied exactly at their times; finite pulses
    switch on ``A_p * (X kron X)`` across their support and are resolved
    with ``pulse_substep``. ``initial_rdm`` replaces the configured Bell
    state as the starting density matrix.
    """
    if not T > 0:
        raise HeomError("T must be positive")
    d = cfg.derived
    h0 = build_system_hamiltonian(cfg)
    baths = build_baths(cfg)
    layout = enumerate_hierarchy(sum(len(b.exponents) for b in baths), icfg.max_depth)
    rho0 = bell_state(cfg.initial_state) if initial_rdm is None else np.asarray(initial_rdm, dtype=np.complex128)
    if rho0.shape != (DIM, DIM):
        raise HeomError(f"initial_rdm must be {DIM}x{DIM}")
    state = HierarchyState.initial(layout, rho0)
    prop = _Propagator(layout, baths, backend)

    n_total = max(1, math.ceil(T / icfg.dt - 1e-9))
    base = T / n_total
    every = icfg.sample_every or max(1, n_total // icfg.target_samples)
    sample_steps = _sample_indices(n_total, every)
    sample_times = [k * base for k in sample_steps]
    sample_times[-1] = T

    gap = np.ptp(np.diag(h0).real) if h0.size else 0.0
    if gap * base > 0.1 and prop.generator(h0)[1] is None:
        logger.warning("system frequencies give omega*dt = %.3g; RK4 phase error may be large", gap * base)

    events = []  # (time, kind, payload)
    if schedule is not None:
        schedule.validate_within(T)
        events = control.schedule_events(schedule)
    pulse_h = h0 + (control.pulse_hamiltonian(schedule) if schedule is not None else 0)
    substep = icfg.pulse_substep or (schedule.default_substep if schedule is not None else base)
    substep = min(substep, base)

    x = state.adms.reshape(-1)
    times, rdms, concs, counts = [], [], [], []
    pulses_done = 0
    pulse_on = False
    t = 0.0
    ev = 0

    def record(tt):
        rho = state.adms[0].copy()
        if check_conservation:
            check_rdm(rho, tt)
        times.append(tt)
        rdms.append(rho)
        concs.append(concurrence(rho))
        counts.append(pulses_done)

    record(0.0)
    for ts in sample_times[1:]:
        while ev < len(events) and events[ev][0] <= ts:
            te, kind = events[ev][0], events[ev][1]
            prop.advance(x, t, te, pulse_h if pulse_on else h0, substep if pulse_on else base)
            t = max(t, te)
            if kind == "ideal":
                control.apply_ideal_pulse_inplace(state.adms)
                pulses_done += 1
            elif kind == "on":
                pulse_on = True
            elif kind == "off":
                pulse_on = False
                pulses_done += 1
            ev += 1
        prop.advance(x, t, ts, pulse_h if pulse_on else h0, substep if pulse_on else base)
        t = ts
        state.t = t
        record(t)

    return Trajectory(
        times=np.array(times),
        distances=d.v_f * np.array(times),
        concurrences=np.array(concs),
        rdms=np.array(rdms) if keep_rdms else None,
        pulses_applied=np.array(counts),
    )


def check_rdm(rho, t, trace_tol=1e-8, herm_tol=1e-8, neg_tol=1e-6):
    """Raise ``HeomError`` when the physical RDM breaks trace, Hermiticity or positivity."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise HeomError(f"trace {tr:.12g} drifted at t = {t:.6g}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise HeomError(f"Hermiticity error {herm:.3e} at t = {t:.6g}")
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w[0] < -neg_tol:
        raise HeomError(f"negative eigenvalue {w[0]:.3e} at t = {t:.6g}")


@dataclass
class ConvergenceReport:
    depth: int
    reference_depth: int
    max_difference: float
    times: np.ndarray
    differences: np.ndarray


def convergence_check(cfg, icfg, T, extra_depth=2, schedule=None, backend=None):
    """Compare concurrence traces at truncation ``N_c`` and ``N_c + extra_depth``."""
    from dataclasses import replace

    low = evolve(cfg, icfg, T, schedule, backend=backend, keep_rdms=False)
    high = evolve(cfg, replace(icfg, max_depth=icfg.max_depth + extra_depth), T,
                  schedule, backend=backend, keep_rdms=False)
    diff = np.abs(low.concurrences - high.concurrences)
    return ConvergenceReport(icfg.max_depth, icfg.max_depth + extra_depth,
                             float(diff.max()), low.times, diff)
