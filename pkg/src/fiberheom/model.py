"""Fiber parameters mapped onto a two-qubit pure-dephasing spin-boson model.

Units throughout: time in microseconds, distance in km, angular frequency in
rad/us, hbar = 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import IDENTITY2, SIGMA_Z, is_hermitian, kron

SPEED_OF_LIGHT_KM_PER_US = 0.299792458
# Optical angular frequency used for the reference parameter set (rad/us).
REFERENCE_OPTICAL_FREQUENCY = 1.0e8


class ModelError(ValueError):
    """Invalid physical or model configuration."""


class Topology(enum.Enum):
    INDEPENDENT = "independent"
    COLLECTIVE = "collective"


class BellState(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"


@dataclass(frozen=True)
class FiberParams:
    """Physical description of one fiber.

    ``optical_frequency`` (rad/us) sets the carrier frequency that multiplies
    the mean birefringence to give the qubit frequency. ``None`` derives it
    from ``wavelength_nm`` as 2*pi*c/lambda.
    """

    wavelength_nm: float = 1550.0
    mean_birefringence: float = 1e-7
    birefringence_std: float = 1e-8
    correlation_length_km: float = 0.1
    group_index: float = 1.5
    optical_frequency: float | None = REFERENCE_OPTICAL_FREQUENCY

    def __post_init__(self):
        checks = {
            "wavelength_nm": self.wavelength_nm > 0,
            "mean_birefringence": self.mean_birefringence > 0,
            "birefringence_std": self.birefringence_std >= 0,
            "correlation_length_km": self.correlation_length_km > 0,
            "group_index": self.group_index > 1,
        }
        for name, ok in checks.items():
            if not ok or not math.isfinite(getattr(self, name)):
                raise ModelError(f"{name} out of range: {getattr(self, name)!r}")
        if self.optical_frequency is not None and not self.optical_frequency > 0:
            raise ModelError(f"optical_frequency must be > 0, got {self.optical_frequency!r}")
        if self.birefringence_std > self.mean_birefringence:
            raise ModelError(
                "birefringence_std must not exceed mean_birefringence (coupling eta <= 1)"
            )

    @classmethod
    def from_eta(cls, eta, correlation_length_km, **kwargs):
        """Fiber whose birefringence spread gives coupling ``eta``."""
        mean = kwargs.pop("mean_birefringence", 1e-7)
        return cls(
            mean_birefringence=mean,
            birefringence_std=eta * mean,
            correlation_length_km=correlation_length_km,
            **kwargs,
        )


@dataclass(frozen=True)
class DerivedParams:
    v_f: float
    omega: float
    Omega: float
    eta: float
    gamma: float
    tau_c: float
    beat_length_m: float


@dataclass(frozen=True)
class BathSpec:
    """Coupling operator plus exponents ``(c, nu)`` of C(t) = sum c exp(-nu t)."""

    coupling: np.ndarray
    exponents: tuple[tuple[complex, complex], ...]

    def __post_init__(self):
        q = np.array(self.coupling, dtype=np.complex128)
        if not is_hermitian(q, 1e-12):
            raise ModelError("bath coupling operator must be Hermitian")
        q.flags.writeable = False
        object.__setattr__(self, "coupling", q)
        exps = tuple((complex(c), complex(nu)) for c, nu in self.exponents)
        for _, nu in exps:
            if not nu.real > 0:
                raise ModelError(f"bath exponent rate must have Re(nu) > 0, got {nu}")
        object.__setattr__(self, "exponents", exps)


@dataclass(frozen=True)
class ModelConfig:
    fiber: FiberParams = field(default_factory=FiberParams)
    topology: Topology = Topology.INDEPENDENT
    initial_state: BellState = BellState.PHI_PLUS
    Omega1: float | None = None
    Omega2: float | None = None
    # Replace the single real exponent derived from the fiber; for exploration.
    exponents: tuple[tuple[complex, complex], ...] | None = None

    @property
    def derived(self):
        return derive_params(self.fiber)

    def qubit_frequencies(self):
        omega = self.derived.Omega
        w1 = omega if self.Omega1 is None else self.Omega1
        w2 = omega if self.Omega2 is None else self.Omega2
        return w1, w2


def derive_params(fiber: FiberParams) -> DerivedParams:
    v_f = SPEED_OF_LIGHT_KM_PER_US / fiber.group_index
    if fiber.optical_frequency is None:
        wavelength_km = fiber.wavelength_nm * 1e-12
        omega = 2.0 * math.pi * SPEED_OF_LIGHT_KM_PER_US / wavelength_km
    else:
        omega = fiber.optical_frequency
    tau_c = fiber.correlation_length_km / v_f
    return DerivedParams(
        v_f=v_f,
        omega=omega,
        Omega=omega * fiber.mean_birefringence,
        eta=fiber.birefringence_std / fiber.mean_birefringence,
        gamma=1.0 / tau_c,
        tau_c=tau_c,
        beat_length_m=fiber.wavelength_nm * 1e-9 / fiber.mean_birefringence,
    )


def build_system_hamiltonian(cfg: ModelConfig) -> np.ndarray:
    w1, w2 = cfg.qubit_frequencies()
    return 0.5 * (w1 * kron(SIGMA_Z, IDENTITY2) + w2 * kron(IDENTITY2, SIGMA_Z))


def coupling_operators(topology):
    z1 = kron(SIGMA_Z, IDENTITY2)
    z2 = kron(IDENTITY2, SIGMA_Z)
    if topology is Topology.INDEPENDENT:
        return [z1, z2]
    return [z1 + z2]


def build_baths(cfg: ModelConfig) -> list[BathSpec]:
    d = cfg.derived
    exponents = cfg.exponents
    if exponents is None:
        # C(t) = eta exp(-gamma t): amplitude equal to eta in 1/us^2.
        exponents = ((d.eta, d.gamma),)
    return [BathSpec(q, exponents) for q in coupling_operators(cfg.topology)]


_BELL_VECTORS = {
    BellState.PHI_PLUS: (1, 0, 0, 1),
    BellState.PHI_MINUS: (1, 0, 0, -1),
    BellState.PSI_PLUS: (0, 1, 1, 0),
    BellState.PSI_MINUS: (0, 1, -1, 0),
}


def bell_state(kind) -> np.ndarray:
    """Density matrix of a Bell state in the basis HH, HV, VH, VV."""
    psi = np.array(_BELL_VECTORS[BellState(kind)], dtype=np.complex128) / math.sqrt(2.0)
    return np.outer(psi, psi.conj())


def distance_to_time(d_km, v_f):
    return d_km / v_f


def time_to_distance(t_us, v_f):
    return v_f * t_us
