import math

import numpy as np
import pytest

from fiberheom.analysis import concurrence
from fiberheom.linalg import commutator
from fiberheom.model import (
    BellState,
    FiberParams,
    ModelConfig,
    ModelError,
    Topology,
    bell_state,
    build_baths,
    build_system_hamiltonian,
    derive_params,
    distance_to_time,
    time_to_distance,
)


def test_derived_reference_parameters():
    d = derive_params(FiberParams(correlation_length_km=0.1))
    assert d.v_f == pytest.approx(0.19986, abs=1e-4)
    assert d.beat_length_m == pytest.approx(15.5)
    assert d.tau_c == pytest.approx(0.5003, abs=2e-4)
    assert d.eta == pytest.approx(0.1)
    # Default carrier gives the order-10 rad/us qubit frequency.
    assert d.Omega == pytest.approx(10.0)


def test_zero_spread_gives_zero_eta():
    assert derive_params(FiberParams(birefringence_std=0.0)).eta == 0.0


def test_gamma_for_one_km():
    assert derive_params(FiberParams(correlation_length_km=1.0)).gamma == pytest.approx(0.19986, abs=1e-5)


def test_doubling_lc_halves_gamma():
    g1 = derive_params(FiberParams(correlation_length_km=0.3)).gamma
    g2 = derive_params(FiberParams(correlation_length_km=0.6)).gamma
    assert g1 == 2 * g2


def test_optical_frequency_from_wavelength():
    d = derive_params(FiberParams(optical_frequency=None))
    assert d.omega == pytest.approx(2 * math.pi * 0.299792458 / 1550e-12)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"birefringence_std": 2e-7},
        {"mean_birefringence": -1e-7},
        {"correlation_length_km": 0.0},
        {"group_index": 0.9},
        {"wavelength_nm": float("nan")},
    ],
)
def test_fiber_rejects_bad_values(kwargs):
    with pytest.raises(ModelError):
        FiberParams(**kwargs)


@pytest.mark.parametrize(
    "w1,w2,diag",
    [(0, 0, [0, 0, 0, 0]), (10, 10, [10, 0, 0, -10]), (2, 4, [3, -1, 1, -3])],
)
def test_system_hamiltonian(w1, w2, diag):
    h = build_system_hamiltonian(ModelConfig(Omega1=w1, Omega2=w2))
    assert np.allclose(h, np.diag(diag))


def test_independent_baths():
    cfg = ModelConfig(fiber=FiberParams.from_eta(0.1, 0.1))
    baths = build_baths(cfg)
    assert len(baths) == 2
    for b in baths:
        (c, nu), = b.exponents
        assert c == pytest.approx(0.1)
        assert nu.real == pytest.approx(2.0, abs=2e-3)


def test_zero_eta_baths_have_zero_amplitude():
    baths = build_baths(ModelConfig(fiber=FiberParams(birefringence_std=0.0)))
    assert all(c == 0 for b in baths for c, _ in b.exponents)


def test_collective_bath():
    (bath,) = build_baths(ModelConfig(topology=Topology.COLLECTIVE))
    assert np.allclose(bath.coupling, np.diag([2, 0, 0, -2]))


@pytest.mark.parametrize("topology", list(Topology))
def test_hamiltonian_commutes_with_couplings(topology):
    cfg = ModelConfig(topology=topology, Omega1=3.0, Omega2=7.0)
    h = build_system_hamiltonian(cfg)
    for b in build_baths(cfg):
        assert np.linalg.norm(commutator(h, b.coupling)) <= 1e-12


def test_phi_plus_entries():
    rho = bell_state(BellState.PHI_PLUS)
    expected = np.zeros((4, 4))
    expected[np.ix_([0, 3], [0, 3])] = 0.5
    assert np.allclose(rho, expected, atol=0)


@pytest.mark.parametrize("kind", list(BellState))
def test_bell_projectors(kind):
    rho = bell_state(kind)
    assert np.max(np.abs(rho @ rho - rho)) <= 1e-12
    assert np.trace(rho).real == pytest.approx(1.0)
    assert concurrence(rho) == pytest.approx(1.0, abs=1e-10)


def test_distance_time_round_trip():
    assert distance_to_time(5.0, 0.2) == pytest.approx(25.0)
    for d in (0.0, 0.05, 1.3, 5.0):
        assert time_to_distance(distance_to_time(d, 0.1998), 0.1998) == pytest.approx(d)
