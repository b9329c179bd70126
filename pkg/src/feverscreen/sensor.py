"""First-order thermal sensor model.

The sensing element lags the apparent target temperature with time
constant ``t_c``::

    t_c * dB/dt = T_target - B

and the apparent target itself decays toward ambient with standoff
distance, ``T_app = T_amb + (T_body - T_amb) * exp(-s / s0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptySeriesError, StepSizeError


@dataclass(frozen=True)
class SensorModel:
    """Parameters of the thermal plant.

    ``k_d`` (dissipation factor) scales the heat flow into the element; it
    cancels once the lag equation is normalised by ``t_c`` and only rides
    along so the parameter set stays complete.
    """

    k_d: float = 1.0
    t_c: float = 2.0
    s0: float = 3.0
    t_ambient: float = 25.0

    def __post_init__(self):
        if not self.t_c > 0:
            raise DomainError(f"t_c must be > 0, got {self.t_c}")
        if not self.s0 > 0:
            raise DomainError(f"s0 must be > 0, got {self.s0}")
        if not self.k_d >= 0:
            raise DomainError(f"k_d must be >= 0, got {self.k_d}")


@dataclass(frozen=True)
class SensorState:
    reading: float
    time: float = 0.0


def attenuate_at_distance(body_temp: float, distance: float, model: SensorModel) -> float:
    """Apparent temperature of a body seen from ``distance`` metres."""
    if distance < 0:
        raise DomainError(f"distance must be >= 0, got {distance}")
    amb = model.t_ambient
    return amb + (body_temp - amb) * math.exp(-distance / model.s0)


def step_sensor(state: SensorState, target_temp: float, dt: float,
                model: SensorModel) -> SensorState:
    """One explicit Euler step of the lag equation."""
    if not dt > 0 or dt > model.t_c / 5:
        raise StepSizeError(f"dt must satisfy 0 < dt <= t_c/5 = {model.t_c / 5}, got {dt}")
    reading = state.reading + dt * (target_temp - state.reading) / model.t_c
    return SensorState(reading=reading, time=state.time + dt)


def simulate_reading_series(body_temp: float, distance: float, n_steps: int,
                            dt: float, noise_std: float, seed: int,
                            model: SensorModel) -> np.ndarray:
    """Noisy reading trace of a sensor pointed at a body from ``distance``.

    The element starts at ambient temperature and relaxes toward the
    attenuated target; ``noise_std`` adds i.i.d. Gaussian measurement noise
    on top of the clean state (the state itself is noise-free).
    """
    if n_steps < 1:
        raise EmptySeriesError("n_steps must be >= 1")
    if noise_std < 0:
        raise DomainError(f"noise_std must be >= 0, got {noise_std}")
    target = attenuate_at_distance(body_temp, distance, model)
    state = SensorState(reading=model.t_ambient)
    clean = np.empty(n_steps)
    for k in range(n_steps):
        state = step_sensor(state, target, dt, model)
        clean[k] = state.reading
    if noise_std == 0:
        return clean
    rng = np.random.default_rng(seed)
    return clean + rng.normal(0.0, noise_std, size=n_steps)
