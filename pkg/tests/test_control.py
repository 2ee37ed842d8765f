import math

import numpy as np
import pytest

from fiberheom.analysis import dephasing_oracle
from fiberheom.control import (
    XX,
    PulseMode,
    PulseSequence,
    ScheduleError,
    SequenceKind,
    apply_ideal_pulse,
    cpmg_times,
    envelope,
    schedule_events,
    udd_times,
)
from fiberheom.heom import IntegratorConfig, evolve
from fiberheom.model import FiberParams, ModelConfig, bell_state


def test_cpmg_times():
    assert np.allclose(cpmg_times(1, 1.0), [0.5])
    assert np.allclose(cpmg_times(2, 1.0), [0.25, 0.75])


def test_cpmg_spacing_is_fifty_metres():
    v_f = 0.2
    t = cpmg_times(100, 25.0)
    assert np.allclose(np.diff(t), 0.25)
    assert np.allclose(np.diff(t) * v_f * 1000, 50.0)


def test_udd_times():
    assert np.allclose(udd_times(1, 1.0), [0.5])
    assert np.allclose(udd_times(2, 1.0), [0.25, 0.75])
    assert np.allclose(udd_times(3, 1.0), [0.14645, 0.5, 0.85355], atol=1e-5)


@pytest.mark.parametrize("n", [1, 2])
def test_udd_equals_cpmg_for_small_n(n):
    assert np.max(np.abs(udd_times(n, 25.0) - cpmg_times(n, 25.0))) <= 1e-14 * 25.0


@pytest.mark.parametrize("n", [3, 10, 101])
def test_udd_symmetric(n):
    t = udd_times(n, 7.0)
    assert np.max(np.abs(t + t[::-1] - 7.0)) <= 1e-12


def test_bad_counts():
    with pytest.raises(ScheduleError):
        cpmg_times(0, 1.0)
    with pytest.raises(ScheduleError):
        udd_times(3, 0.0)


def test_envelope():
    seq = PulseSequence.build("cpmg", 4, 1.0, mode="finite", tau_p=0.01)
    assert envelope(seq, 0.0) == 0.0
    assert envelope(seq, seq.times[2]) == pytest.approx(seq.A_p)
    assert seq.A_p * seq.tau_p == pytest.approx(math.pi / 2)


def test_overlapping_pulses_rejected():
    with pytest.raises(ScheduleError):
        PulseSequence.build("cpmg", 10, 0.05, mode="finite", tau_p=0.01)


def test_pulse_must_fit_inside_interval():
    with pytest.raises(ScheduleError):
        PulseSequence.build("udd", 50, 1.0, mode="finite", tau_p=0.004)


def test_events():
    ideal = PulseSequence.build(SequenceKind.UDD, 3, 1.0)
    assert [k for _, k in schedule_events(ideal)] == ["ideal"] * 3
    finite = PulseSequence.build(SequenceKind.CPMG, 2, 1.0, mode=PulseMode.FINITE)
    assert [k for _, k in schedule_events(finite)] == ["on", "off", "on", "off"]


def test_double_pulse_is_identity():
    rng = np.random.default_rng(0)
    adms = rng.normal(size=(5, 4, 4)) + 1j * rng.normal(size=(5, 4, 4))
    assert np.max(np.abs(apply_ideal_pulse(apply_ideal_pulse(adms)) - adms)) <= 1e-14


def test_pulse_matches_conjugation():
    rng = np.random.default_rng(1)
    rho = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(apply_ideal_pulse(rho), XX @ rho @ XX, atol=0)


def test_pulse_stabilizes_phi_plus():
    rho = bell_state("phi+")
    assert np.allclose(apply_ideal_pulse(rho), rho)


def test_pulse_swaps_hv_to_vh():
    hv = np.zeros((4, 4))
    hv[1, 1] = 1
    vh = np.zeros((4, 4))
    vh[2, 2] = 1
    assert np.array_equal(apply_ideal_pulse(hv), vh)


def test_finite_pulse_propagator_matches_ideal():
    # No qubit splitting and no noise: only the control Hamiltonian acts.
    cfg = ModelConfig(fiber=FiberParams(birefringence_std=0.0), Omega1=0.0, Omega2=0.0)
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[1, 1] = 0.7
    rho0[0, 0] = 0.3
    rho0[0, 1] = rho0[1, 0] = 0.2
    seq = PulseSequence.build("cpmg", 1, 0.01, mode="finite")
    end = evolve(cfg, IntegratorConfig(), seq.T, seq, initial_rdm=rho0).rdms[-1]
    assert np.max(np.abs(end - apply_ideal_pulse(rho0))) <= 1e-6


def test_ideal_cpmg_matches_switched_oracle():
    cfg = ModelConfig(fiber=FiberParams.from_eta(0.1, 0.1))
    seq = PulseSequence.build("cpmg", 20, 5.0)
    traj = evolve(cfg, IntegratorConfig(), 5.0, seq, keep_rdms=False)
    oracle = dephasing_oracle(0.1, cfg.derived.gamma, traj.times, pulse_times=seq.times)
    assert np.max(np.abs(traj.concurrences - oracle)) <= 1e-6
    assert traj.pulses_applied[-1] == 20


def test_finite_and_ideal_agree_at_end():
    cfg = ModelConfig(fiber=FiberParams.from_eta(0.1, 0.1))
    finals = []
    for mode in ("ideal", "finite"):
        seq = PulseSequence.build("cpmg", 10, 5.0, mode=mode)
        finals.append(evolve(cfg, IntegratorConfig(), 5.0, seq, keep_rdms=False).concurrences[-1])
    assert abs(finals[0] - finals[1]) <= 1e-3


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_quasistatic_echo(n):
    cfg = ModelConfig(exponents=((0.1, 1e-3),))
    T = 2.5
    seq = PulseSequence.build("cpmg", n, T)
    traj = evolve(cfg, IntegratorConfig(), T, seq, keep_rdms=False)
    assert traj.concurrences[-1] >= 0.99
