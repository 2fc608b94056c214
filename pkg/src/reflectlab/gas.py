"""Polytropic gas: sound speed and the enthalpy-like function pi(rho).

With p = c0^2 rho0 / gamma * (rho/rho0)^gamma we have c^2 = c0^2 (rho/rho0)^(gamma-1)
and dpi/drho = c^2 / rho. The integration constant is fixed so that pi -> 0 as
rho -> 0, which gives pi = c^2 / (gamma - 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, VacuumError


@dataclass(frozen=True)
class GasConstants:
    gamma: float = 1.4
    rho0: float = 1.0
    c0: float = 1.0

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise DomainError(f"gamma must exceed 1, got {self.gamma}")
        if not (self.rho0 > 0.0 and self.c0 > 0.0):
            raise DomainError("reference density and sound speed must be positive")


DEFAULT_GAS = GasConstants()


def sound_speed(rho, consts: GasConstants = DEFAULT_GAS):
    """Return c0 (rho/rho0)^((gamma-1)/2)."""
    if np.any(np.real(rho) <= 0):
        raise DomainError("density must be positive")
    return consts.c0 * (rho / consts.rho0) ** (0.5 * (consts.gamma - 1.0))


def pi_fn(rho, consts: GasConstants = DEFAULT_GAS):
    if np.any(np.real(rho) <= 0):
        raise DomainError("density must be positive")
    g = consts.gamma
    return consts.c0**2 / (g - 1.0) * (rho / consts.rho0) ** (g - 1.0)


def pi_inv(w, consts: GasConstants = DEFAULT_GAS):
    """Inverse of :func:`pi_fn`; ``w <= 0`` would be vacuum.

    Complex arguments are accepted (complex-step differentiation); only the
    real part is checked.
    """
    if np.any(np.real(w) <= 0):
        raise VacuumError(f"pi argument must be positive (vacuum), got min {np.min(np.real(w))}")
    g = consts.gamma
    return consts.rho0 * ((g - 1.0) * w / consts.c0**2) ** (1.0 / (g - 1.0))


def density_from_chi(chi, grad_chi, consts: GasConstants = DEFAULT_GAS):
    """Density from the pseudo-potential: pi^{-1}(-chi - |grad chi|^2 / 2).

    ``grad_chi`` has its two components on the last axis.
    """
    grad_chi = np.asarray(grad_chi)
    w = -chi - 0.5 * np.sum(grad_chi**2, axis=-1)
    return pi_inv(w, consts)


@dataclass(frozen=True)
class ThermoState:
    """Constant flow state: density and velocity; sound speed derived."""

    rho: float
    velocity: np.ndarray
    consts: GasConstants = field(default=DEFAULT_GAS, repr=False)

    def __post_init__(self):
        if not self.rho > 0:
            raise DomainError("density must be positive")
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(2))

    @property
    def c(self) -> float:
        return float(sound_speed(self.rho, self.consts))

    @property
    def mach(self) -> float:
        return float(np.hypot(*self.velocity)) / self.c
