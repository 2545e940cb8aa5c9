"""Planar single- and double-integrator models, continuous and zero-order-hold."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DynKind(enum.Enum):
    SINGLE = "single"
    DOUBLE = "double"

    @classmethod
    def parse(cls, value) -> "DynKind":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        for kind in cls:
            if key in (kind.value, kind.name.lower(), f"{kind.value}integrator",
                       f"{kind.value}_integrator"):
                return kind
        raise ValueError(f"unknown dynamics {value!r}")


@dataclass(frozen=True)
class DiscreteDynamics:
    A: np.ndarray
    B: np.ndarray
    kind: DynKind
    dt: float

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def position_rows(self) -> np.ndarray:
        return np.arange(2)


def discretize(kind, dt: float) -> DiscreteDynamics:
    """Exact ZOH discretization of the planar integrator chains."""
    kind = DynKind.parse(kind)
    if not dt > 0:
        raise ValueError("dt must be positive")
    I2 = np.eye(2)
    if kind is DynKind.SINGLE:
        return DiscreteDynamics(I2.copy(), dt * I2, kind, dt)
    A = np.block([[I2, dt * I2], [np.zeros((2, 2)), I2]])
    B = np.vstack([0.5 * dt * dt * I2, dt * I2])
    return DiscreteDynamics(A, B, kind, dt)


def n_states(kind) -> int:
    return 2 if DynKind.parse(kind) is DynKind.SINGLE else 4


@dataclass(frozen=True)
class DynamicsModel:
    """Control-affine model ``xdot = f(x) + g(x) u``."""

    kind: DynKind

    def f(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind is DynKind.SINGLE:
            return np.zeros(2)
        return np.array([x[2], x[3], 0.0, 0.0])

    def g(self, x=None) -> np.ndarray:
        if self.kind is DynKind.SINGLE:
            return np.eye(2)
        return np.vstack([np.zeros((2, 2)), np.eye(2)])

    @property
    def n_states(self) -> int:
        return n_states(self.kind)


def step_dynamics(x, u, dt: float, model) -> np.ndarray:
    """Advance one ZOH step (exact for integrator chains)."""
    kind = model.kind if isinstance(model, DynamicsModel) else DynKind.parse(model)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if kind is DynKind.SINGLE:
        return x + dt * u
    p, v = x[:2], x[2:]
    return np.concatenate([p + dt * v + 0.5 * dt * dt * u, v + dt * u])
