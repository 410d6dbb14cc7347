"""Synchronous condenser: dq-frame machine with stator transients plus a
reduced rotating-exciter AVR.

Model order: field winding, one d-axis damper, one q-axis damper.  Stator
flux derivatives are kept so the first-cycle behaviour (DC offset in the
phase currents, sub-transient voltage support) is represented.

Conventions
-----------
* generator convention, stator currents positive out of the machine;
* rotor q-axis leads the d-axis by 90 deg and sits at angle ``delta`` in
  the network reference frame, so network->rotor mapping is
  ``(x_d + j x_q) = j exp(-j delta) (x_x + j x_y)``;
* per unit on the machine base, time in seconds.

Parameter conversion (classical open-circuit relations, mutually inverse
so the round trip is exact):

    X_ad = X_d - X_l                      X_aq = X_q - X_l
    X_fd = X_ad (X_d' - X_l)/(X_d - X_d')
    1/X_1d = 1/(X_d'' - X_l) - 1/X_ad - 1/X_fd
    X_2q = X_aq (X_q'' - X_l)/(X_q - X_q'')
    R_fd = (X_ad + X_fd)/(w_b T_d0')
    R_1d = (X_1d + X_ad||X_fd)/(w_b T_d0'')
    R_2q = (X_2q + X_aq)/(w_b T_q0'')

An external series impedance (the step-up transformer) can be folded into
the stator leakage; the folded flux states then include the external flux
and the machine sees the far-side bus directly.
"""

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import BlockState, PiState, lpf_step, pi_step

OMEGA_LIMITS = (0.8, 1.2)


class MachineError(RuntimeError):
    pass


@dataclass
class ScParams:
    h: float = 5.0            # inertia constant, s
    k_d: float = 0.0          # mechanical damping factor, pu
    x_d: float = 2.24
    x_d_p: float = 0.17
    x_d_pp: float = 0.12
    x_q: float = 1.02
    x_q_pp: float = 0.13
    x_l: float = 0.08
    r_s: float = 0.017
    t_d0_p: float = 4.4849
    t_d0_pp: float = 0.0681
    t_q_pp: float = 0.1       # q-axis open-circuit sub-transient constant
    pole_pairs: int = 2

    def validate(self):
        if not (self.x_d > self.x_d_p > self.x_d_pp > self.x_l > 0.0):
            raise ValueError("need x_d > x_d_p > x_d_pp > x_l > 0")
        if not (self.x_q > self.x_q_pp > self.x_l):
            raise ValueError("need x_q > x_q_pp > x_l")
        for name in ("t_d0_p", "t_d0_pp", "t_q_pp", "h"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")


@dataclass
class AvrParams:
    t_meas: float = 0.02      # stator-voltage measurement filter, s
    kp: float = 40.0          # tuned for ~500 ms closed-loop settling
    ki: float = 65.0
    t_e: float = 0.2          # exciter (alternator + rectifier) lag, s
    efd_min: float = 0.0      # diode rectifier cannot invert the field
    efd_max: float = 5.0


@dataclass
class ScConstants:
    """Winding quantities and flux->current inversion, ready for simulation."""
    omega_b: float
    h: float
    k_d: float
    r_a: float                # stator + folded external resistance
    x_ad: float
    x_aq: float
    r_fd: float
    r_1d: float
    r_2q: float
    x_ffd: float              # X_ad + field leakage
    x_11d: float
    x_22q: float
    md_inv: np.ndarray        # inverse of the d-axis inductance matrix
    mq_inv: np.ndarray
    x_ext: float              # folded external reactance (0 when standalone)


@dataclass
class ScState:
    psi_d: float = 0.0
    psi_q: float = 0.0
    psi_fd: float = 0.0
    psi_1d: float = 0.0
    psi_2q: float = 0.0
    omega: float = 1.0
    delta: float = 0.0


@dataclass
class AvrState:
    v_meas: BlockState = field(default_factory=BlockState)
    pi: PiState = field(default_factory=lambda: PiState(kp=40.0, ki=65.0))
    exciter: BlockState = field(default_factory=BlockState)  # value = E_fd
    v_ref: float = 1.0


def convert_params(prm: ScParams, omega_b: float, x_ext: float = 0.0,
                   r_ext: float = 0.0) -> ScConstants:
    """Turn the reactance/time-constant set into winding quantities,
    optionally folding an external series impedance into the leakage."""
    prm.validate()
    x_ad = prm.x_d - prm.x_l
    x_aq = prm.x_q - prm.x_l
    x_fd = x_ad * (prm.x_d_p - prm.x_l) / (prm.x_d - prm.x_d_p)
    x_1d = 1.0 / (1.0 / (prm.x_d_pp - prm.x_l) - 1.0 / x_ad - 1.0 / x_fd)
    x_2q = x_aq * (prm.x_q_pp - prm.x_l) / (prm.x_q - prm.x_q_pp)
    r_fd = (x_ad + x_fd) / (omega_b * prm.t_d0_p)
    r_1d = (x_1d + x_ad * x_fd / (x_ad + x_fd)) / (omega_b * prm.t_d0_pp)
    r_2q = (x_2q + x_aq) / (omega_b * prm.t_q_pp)

    x_l_eff = prm.x_l + x_ext
    x_ffd = x_ad + x_fd
    x_11d = x_ad + x_1d
    x_22q = x_aq + x_2q
    md = np.array([[x_ad + x_l_eff, x_ad, x_ad],
                   [x_ad, x_ffd, x_ad],
                   [x_ad, x_ad, x_11d]])
    mq = np.array([[x_aq + x_l_eff, x_aq],
                   [x_aq, x_22q]])
    return ScConstants(
        omega_b=omega_b, h=prm.h, k_d=prm.k_d, r_a=prm.r_s + r_ext,
        x_ad=x_ad, x_aq=x_aq, r_fd=r_fd, r_1d=r_1d, r_2q=r_2q,
        x_ffd=x_ffd, x_11d=x_11d, x_22q=x_22q,
        md_inv=np.linalg.inv(md), mq_inv=np.linalg.inv(mq), x_ext=x_ext)


def recover_characteristics(const: ScConstants, x_l: float) -> dict:
    """Recompute the defining set from winding quantities (round-trip check)."""
    x_ad, x_aq = const.x_ad, const.x_aq
    x_fd = const.x_ffd - x_ad
    x_1d = const.x_11d - x_ad
    x_2q = const.x_22q - x_aq
    par = lambda a, b: a * b / (a + b)
    return {
        "x_d": x_ad + x_l,
        "x_d_p": x_l + par(x_ad, x_fd),
        "x_d_pp": x_l + 1.0 / (1.0 / x_ad + 1.0 / x_fd + 1.0 / x_1d),
        "x_q": x_aq + x_l,
        "x_q_pp": x_l + par(x_aq, x_2q),
        "t_d0_p": (x_ad + x_fd) / (const.omega_b * const.r_fd),
        "t_d0_pp": (x_1d + par(x_ad, x_fd)) / (const.omega_b * const.r_1d),
        "t_q_pp": (x_2q + x_aq) / (const.omega_b * const.r_2q),
    }


def currents_from_fluxes(const: ScConstants, psi_d, psi_q, psi_fd, psi_1d, psi_2q):
    """Winding currents for given flux linkages (stator currents positive out)."""
    m = const.md_inv
    i_d = -(m[0, 0] * psi_d + m[0, 1] * psi_fd + m[0, 2] * psi_1d)
    i_fd = m[1, 0] * psi_d + m[1, 1] * psi_fd + m[1, 2] * psi_1d
    i_1d = m[2, 0] * psi_d + m[2, 1] * psi_fd + m[2, 2] * psi_1d
    q = const.mq_inv
    i_q = -(q[0, 0] * psi_q + q[0, 1] * psi_2q)
    i_2q = q[1, 0] * psi_q + q[1, 1] * psi_2q
    return i_d, i_q, i_fd, i_1d, i_2q


def sc_derivatives(state: ScState, const: ScConstants, e_fd: float,
                   v_d: float, v_q: float, omega_g: float):
    """Time derivatives of all machine states plus the stator current.

    ``v_d/v_q`` is the terminal voltage in the rotor frame (the folded bus
    when an external impedance was absorbed).  Returns
    ``(derivs: ndarray[7], i_d, i_q, p_e)``; deriv order matches ScState.
    """
    if not (OMEGA_LIMITS[0] <= state.omega <= OMEGA_LIMITS[1]):
        raise MachineError(f"rotor speed {state.omega:.4f} pu outside "
                           f"{OMEGA_LIMITS}; aborting")
    wb = const.omega_b
    i_d, i_q, i_fd, i_1d, i_2q = currents_from_fluxes(
        const, state.psi_d, state.psi_q, state.psi_fd, state.psi_1d, state.psi_2q)
    t_e = state.psi_d * i_q - state.psi_q * i_d
    p_e = t_e * state.omega
    d = np.empty(7)
    d[0] = wb * (v_d + const.r_a * i_d + state.omega * state.psi_q)
    d[1] = wb * (v_q + const.r_a * i_q - state.omega * state.psi_d)
    d[2] = wb * const.r_fd * (e_fd / const.x_ad - i_fd)
    d[3] = -wb * const.r_1d * i_1d
    d[4] = -wb * const.r_2q * i_2q
    d[5] = (-p_e - const.k_d * (state.omega - omega_g)) / (2.0 * const.h)
    d[6] = wb * (state.omega - 1.0)
    return d, i_d, i_q, p_e


def open_circuit_derivatives(state: ScState, const: ScConstants, e_fd: float):
    """Rotor flux derivatives with the stator open (i_d = i_q = 0).

    Returns ``(dpsi_fd, dpsi_1d, dpsi_2q, v_mag)`` where ``v_mag`` is the
    open-circuit stator voltage magnitude.
    """
    wb = const.omega_b
    det = const.x_ffd * const.x_11d - const.x_ad ** 2
    i_fd = (const.x_11d * state.psi_fd - const.x_ad * state.psi_1d) / det
    i_1d = (-const.x_ad * state.psi_fd + const.x_ffd * state.psi_1d) / det
    i_2q = state.psi_2q / const.x_22q
    psi_d = const.x_ad * (i_fd + i_1d)
    psi_q = const.x_aq * i_2q
    d_fd = wb * const.r_fd * (e_fd / const.x_ad - i_fd)
    d_1d = -wb * const.r_1d * i_1d
    d_2q = -wb * const.r_2q * i_2q
    v_mag = state.omega * math.hypot(psi_d, psi_q)
    return d_fd, d_1d, d_2q, v_mag


def avr_step(avr: AvrState, prm: AvrParams, v_s_mag: float, dt: float) -> AvrState:
    """Measurement filter -> PI -> exciter lag -> ceiling/floor clamp."""
    if v_s_mag < 0.0:
        raise ValueError("voltage magnitude must be >= 0")
    v_meas = lpf_step(avr.v_meas, v_s_mag, 1.0 / prm.t_meas, dt)
    pi, u = pi_step(avr.pi, avr.v_ref - v_meas.value, dt)
    exciter = lpf_step(avr.exciter, u, 1.0 / prm.t_e, dt)
    e_fd = min(max(exciter.value, prm.efd_min), prm.efd_max)
    exciter = BlockState(value=e_fd, x=exciter.x)
    return AvrState(v_meas=v_meas, pi=pi, exciter=exciter, v_ref=avr.v_ref)


def short_circuit_current_ib(v_n_ph: float, x_d_p: float) -> float:
    """Sustained-transient short-circuit current (the 100 ms value)."""
    if x_d_p <= 0.0:
        raise ValueError("transient reactance must be > 0")
    return v_n_ph / x_d_p


def rotor_angle_from_terminal(v_term: complex, i_term: complex,
                              r_a: float, x_q: float) -> float:
    """Angle of the q-axis in the network frame for a steady operating point."""
    e = v_term + complex(r_a, x_q) * i_term
    return cmath.phase(e)


def to_rotor(x: complex, delta: float) -> complex:
    """Network frame -> rotor dq (returns d + j q)."""
    return 1j * cmath.exp(-1j * delta) * x


def from_rotor(x_dq: complex, delta: float) -> complex:
    """Rotor dq -> network frame."""
    return -1j * cmath.exp(1j * delta) * x_dq


def init_sc(prm: ScParams, avr_prm: AvrParams, omega_b: float,
            v_term: complex, p: float, q: float,
            x_ext: float = 0.0, r_ext: float = 0.0) -> tuple[ScState, AvrState, ScConstants]:
    """Back-solve a steady operating point from the true-terminal phasor.

    ``v_term`` and (p, q) are at the physical stator terminal; the returned
    state uses constants with ``x_ext``/``r_ext`` folded in, so it plugs
    straight into :func:`sc_derivatives` driven by the far-side bus voltage.
    """
    if abs(v_term) <= 0.5:
        raise MachineError("terminal voltage too low for a credible init")
    const = convert_params(prm, omega_b, x_ext=x_ext, r_ext=r_ext)
    i_term = (complex(p, q) / v_term).conjugate()
    delta = rotor_angle_from_terminal(v_term, i_term, prm.r_s, prm.x_q)
    v_dq = to_rotor(v_term, delta)
    i_dq = to_rotor(i_term, delta)
    v_d, v_q = v_dq.real, v_dq.imag
    i_d, i_q = i_dq.real, i_dq.imag
    psi_d = v_q + prm.r_s * i_q
    psi_q = -(v_d + prm.r_s * i_d)
    x_ad = const.x_ad
    i_fd = (psi_d + prm.x_d * i_d) / x_ad
    e_fd = x_ad * i_fd
    if e_fd > avr_prm.efd_max:
        raise MachineError(
            f"operating point needs E_fd = {e_fd:.2f} pu above the "
            f"{avr_prm.efd_max:.2f} pu ceiling")
    if e_fd < avr_prm.efd_min:
        raise MachineError("operating point needs a negative field voltage")
    state = ScState(
        psi_d=psi_d - x_ext * i_d,
        psi_q=psi_q - x_ext * i_q,
        psi_fd=const.x_ffd * i_fd - x_ad * i_d,
        psi_1d=x_ad * (i_fd - i_d),
        psi_2q=-const.x_aq * i_q,
        omega=1.0,
        delta=delta)
    avr = AvrState(
        v_meas=BlockState(value=abs(v_term)),
        pi=PiState(kp=avr_prm.kp, ki=avr_prm.ki, integral=e_fd,
                   out_min=avr_prm.efd_min, out_max=avr_prm.efd_max),
        exciter=BlockState(value=e_fd),
        v_ref=abs(v_term))
    return state, avr, const
