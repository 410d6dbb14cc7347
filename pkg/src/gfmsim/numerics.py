"""Control-block primitives and the fixed-step integration kernel.

All blocks are pure: each step function takes the current block state and
returns a new one, so the caller owns every piece of mutable data.  The
discretizations are chosen for unconditional stability at the simulation
step (50 us default):

* first-order low pass   -> exact exponential update
* lead-lag (1+sTn)/(1+sTd) -> trapezoidal
* PI                     -> forward rectangle with conditional anti-windup
"""

import math
from dataclasses import dataclass, replace

import numpy as np


class NumericsError(RuntimeError):
    """Raised when a block or the integrator receives/produces non-finite data."""


@dataclass
class BlockState:
    """State of a first-order block; ``x`` is the internal lead-lag state."""
    value: float = 0.0
    x: float = 0.0


@dataclass
class PiState:
    """PI regulator state with output limits and conditional anti-windup."""
    kp: float
    ki: float
    integral: float = 0.0
    out_min: float = -math.inf
    out_max: float = math.inf


@dataclass
class IntegratorConfig:
    dt: float
    method: str = "rk4"  # "rk4" | "trapezoidal"

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.method not in ("rk4", "trapezoidal"):
            raise ValueError(f"unknown method {self.method!r}")


def lpf_step(state: BlockState, u: float, omega_c: float, dt: float) -> BlockState:
    """One step of y' = omega_c*(u - y), exact for a held input."""
    if omega_c <= 0.0 or dt <= 0.0:
        raise ValueError("omega_c and dt must be > 0")
    if not math.isfinite(u):
        raise NumericsError("non-finite input to low-pass block")
    a = 1.0 - math.exp(-omega_c * dt)
    return replace(state, value=state.value + a * (u - state.value))


def leadlag_step(state: BlockState, u: float, t_n: float, t_d: float,
                 dt: float) -> tuple[BlockState, float]:
    """Trapezoidal step of (1 + s*t_n)/(1 + s*t_d); DC gain exactly 1.

    Realization: x' = (u - x)/t_d, y = (t_n/t_d)*u + (1 - t_n/t_d)*x.
    """
    if t_d <= 0.0:
        raise ValueError("lead-lag denominator time constant must be > 0")
    if t_n < 0.0:
        raise ValueError("lead-lag numerator time constant must be >= 0")
    if not math.isfinite(u):
        raise NumericsError("non-finite input to lead-lag block")
    h = 0.5 * dt / t_d
    x = (state.x * (1.0 - h) + 2.0 * h * u) / (1.0 + h)
    r = t_n / t_d
    y = r * u + (1.0 - r) * x
    return replace(state, x=x, value=y), y


def pi_step(state: PiState, error: float, dt: float) -> tuple[PiState, float]:
    """PI step.  The integral freezes whenever the output is clamped and the
    error would drive it further into saturation."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    unsat = state.kp * error + state.integral + state.ki * error * dt
    if unsat > state.out_max and error > 0.0:
        integral = state.integral
    elif unsat < state.out_min and error < 0.0:
        integral = state.integral
    else:
        integral = state.integral + state.ki * error * dt
    y = state.kp * error + integral
    y = min(max(y, state.out_min), state.out_max)
    return replace(state, integral=integral), y


def integrate_step(f, x: np.ndarray, t: float, cfg: IntegratorConfig) -> np.ndarray:
    """Advance x by one fixed step of cfg.method.

    ``f(t, x)`` must return the derivative array.  Deterministic: identical
    inputs give bit-identical outputs.  A non-finite derivative aborts with
    the offending state index.
    """
    dt = cfg.dt
    k1 = _checked(f(t, x))
    if cfg.method == "trapezoidal":
        # Heun predictor-corrector (explicit trapezoidal rule)
        xp = x + dt * k1
        k2 = _checked(f(t + dt, xp))
        return x + 0.5 * dt * (k1 + k2)
    k2 = _checked(f(t + 0.5 * dt, x + 0.5 * dt * k1))
    k3 = _checked(f(t + 0.5 * dt, x + 0.5 * dt * k2))
    k4 = _checked(f(t + dt, x + dt * k3))
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _checked(dx: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(dx)):
        bad = int(np.flatnonzero(~np.isfinite(dx))[0])
        raise NumericsError(f"non-finite derivative at state index {bad}")
    return dx
