import math

import numpy as np
import pytest
from scipy.integrate import quad

from fiberheom.analysis import (
    NOT_DEFINED,
    NOT_REACHED,
    AnalysisError,
    SweepResult,
    Trajectory,
    concurrence,
    dd_advantage,
    dephasing_oracle,
    dephasing_prefactor,
    distance_to_threshold,
    non_markovianity,
    ou_monte_carlo,
    spin_flip_values,
)
from fiberheom.control import cpmg_times
from fiberheom.model import BellState, Topology, bell_state

PHI = bell_state("phi+")


def werner(p):
    return p * PHI + (1 - p) * np.eye(4) / 4


def reference_concurrence(rho):
    lam = spin_flip_values(rho)
    return max(0.0, lam[0] - lam[1:].sum())


def random_unitary(rng):
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def traj(values, times=None):
    values = np.asarray(values, dtype=float)
    times = np.arange(len(values), dtype=float) if times is None else times
    return Trajectory(times, 0.2 * times, values)


@pytest.mark.parametrize("kind", list(BellState))
def test_bell_concurrence(kind):
    assert abs(concurrence(bell_state(kind)) - 1.0) <= 1e-10


def test_product_state():
    hh = np.zeros((4, 4))
    hh[0, 0] = 1
    assert concurrence(hh) == 0.0


def test_werner_half():
    assert reference_concurrence(werner(0.5)) == pytest.approx(0.25, abs=1e-12)
    assert concurrence(werner(0.5)) == pytest.approx(0.25, abs=1e-12)


def test_against_reference_on_random_states():
    rng = np.random.default_rng(7)
    for rank in (1, 2, 3, 4):
        for _ in range(20):
            x = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
            rho = x @ x.conj().T
            rho /= np.trace(rho)
            assert concurrence(rho) == pytest.approx(reference_concurrence(rho), abs=1e-7)


def test_local_unitary_invariance():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    c0 = concurrence(rho)
    for _ in range(20):
        u = np.kron(random_unitary(rng), random_unitary(rng))
        assert abs(concurrence(u @ rho @ u.conj().T) - c0) <= 1e-8


def test_white_noise_monotone():
    for kind in BellState:
        rho = bell_state(kind)
        values = [concurrence(p * rho + (1 - p) * np.eye(4) / 4) for p in np.linspace(1, 0, 41)]
        assert np.all(np.diff(values) <= 1e-12)


def test_input_untouched_and_small_negatives_clamped():
    rho = PHI.copy()
    rho[1, 1] = -5e-7
    rho[0, 0] += 5e-7
    before = rho.copy()
    concurrence(rho)
    assert np.array_equal(rho, before)


@pytest.mark.parametrize(
    "rho,match",
    [
        (np.eye(3) / 3, "4x4"),
        (PHI + np.triu(np.ones((4, 4)), 1) * 1e-3, "Hermiticity"),
        (2 * PHI, "trace"),
        (np.diag([0.6, 0.6, -0.2, 0.0]), "eigenvalue"),
    ],
)
def test_concurrence_preconditions(rho, match):
    with pytest.raises(AnalysisError, match=match):
        concurrence(rho)


def test_nm_monotone_and_constant():
    assert non_markovianity(traj(np.linspace(1, 0, 50) ** 2)) == pytest.approx(0, abs=1e-12)
    assert non_markovianity(traj(np.full(10, 0.7))) == 0.0


def test_nm_abs_cos():
    t = np.linspace(0, np.pi, 10001)
    assert non_markovianity(traj(np.abs(np.cos(t)), t)) == pytest.approx(2.0, abs=0.01)


def test_nm_reparametrization_invariant():
    values = [1.0, 0.4, 0.6, 0.2, 0.3, 0.0]
    a = traj(values)
    b = traj(values, np.array([0.0, 0.1, 0.5, 2.0, 2.1, 9.0]))
    assert non_markovianity(a) == non_markovianity(b) == pytest.approx(0.6)


def test_nm_needs_two_samples():
    with pytest.raises(AnalysisError):
        non_markovianity(np.array([1.0]))


def test_threshold_interpolation():
    t = Trajectory(np.array([0.0, 5.0]), np.array([0.0, 1.0]), np.array([1.0, 0.05]))
    assert distance_to_threshold(t, 0.1) == pytest.approx(0.947, abs=1e-3)


def test_threshold_not_reached():
    assert distance_to_threshold(traj(np.ones(5)), 0.1) == NOT_REACHED


def test_threshold_range():
    with pytest.raises(AnalysisError):
        distance_to_threshold(traj(np.ones(5)), 1.0)


def test_dd_advantage():
    assert dd_advantage(0.9, 0.9) == 0
    assert dd_advantage(0.9, 0.45) == pytest.approx(0.5)
    assert dd_advantage(0.5, 0.6) == pytest.approx(-0.2)
    assert math.isnan(dd_advantage(0.0, 0.3)) and math.isnan(NOT_DEFINED)


def test_trajectory_invariants():
    with pytest.raises(AnalysisError):
        Trajectory(np.array([0.0, 0.0]), np.zeros(2), np.ones(2))
    with pytest.raises(AnalysisError):
        SweepResult(np.array([0.1, 0.2]), np.array([1.0]), cells=[[None]])


def test_prefactors():
    for kind in BellState:
        assert dephasing_prefactor(Topology.INDEPENDENT, kind) == 8
    assert dephasing_prefactor(Topology.COLLECTIVE, BellState.PHI_MINUS) == 16
    assert dephasing_prefactor(Topology.COLLECTIVE, BellState.PSI_PLUS) == 0


def test_oracle_zero_eta():
    assert np.all(dephasing_oracle(0.0, 2.0, np.linspace(0, 25, 11)) == 1.0)


def test_oracle_quadratic_onset():
    t = np.array([1e-3, 2e-3])
    loss = 1 - dephasing_oracle(0.1, 2.0, t)
    assert loss[1] / loss[0] == pytest.approx(4.0, rel=1e-2)


def test_oracle_reference_point():
    value = dephasing_oracle(0.1, 2.0, 12.5)
    assert value <= 0.05
    assert value == pytest.approx(math.exp(-8 * 0.1 * (2 * 12.5 - 1 + math.exp(-25)) / 4))


def test_oracle_rejects_complex_amplitude():
    with pytest.raises(AnalysisError):
        dephasing_oracle(0.1 + 0.1j, 2.0, 1.0)


def test_oracle_pulses_match_adaptive_quadrature():
    eta, gamma, T = 0.1, 0.7, 3.0
    pulses = [0.4, 1.3, 2.9]
    edges = [0.0] + pulses + [T]

    def y(s):
        return -1.0 if sum(p < s for p in pulses) % 2 else 1.0

    def inner(s):
        return sum(
            y(0.5 * (a + b)) * quad(lambda u: math.exp(-gamma * abs(s - u)), a, b,
                                    points=[s] if a < s < b else None, epsabs=1e-13)[0]
            for a, b in zip(edges[:-1], edges[1:])
        )

    integral = sum(
        y(0.5 * (a + b)) * quad(inner, a, b, epsabs=1e-12)[0]
        for a, b in zip(edges[:-1], edges[1:])
    )
    expected = math.exp(-0.5 * 8 * eta * integral)
    assert dephasing_oracle(eta, gamma, T, pulse_times=pulses) == pytest.approx(expected, rel=1e-9)


def test_oracle_without_pulses_matches_closed_form_through_switching_path():
    t = np.linspace(0.1, 10, 7)
    a = dephasing_oracle(0.05, 1.5, t)
    b = dephasing_oracle(0.05, 1.5, t, pulse_times=[20.0])
    assert np.allclose(a, b, rtol=1e-13)


@pytest.mark.parametrize("topology", list(Topology))
def test_oracle_matches_monte_carlo(topology):
    times = np.linspace(0.5, 5.0, 10)
    mean, err = ou_monte_carlo(0.1, 2.0, times, topology, BellState.PHI_PLUS, n_realizations=10_000, seed=5)
    oracle = dephasing_oracle(0.1, 2.0, times, topology, BellState.PHI_PLUS)
    assert np.all(np.abs(mean - oracle) <= 3 * err + 1e-12)


def test_oracle_with_pulses_matches_monte_carlo():
    times = np.linspace(1.0, 10.0, 10)
    pulses = cpmg_times(8, 10.0)
    mean, err = ou_monte_carlo(0.1, 0.5, times, n_realizations=10_000, seed=9, pulse_times=pulses)
    oracle = dephasing_oracle(0.1, 0.5, times, pulse_times=pulses)
    assert np.all(np.abs(mean - oracle) <= 3 * err + 1e-12)
