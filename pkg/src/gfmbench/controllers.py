"""Grid-forming controller variants and their loop primitives.

Five controller structures, selected by ControllerSpec.kind:

  droop      proportional power/frequency droop, cascaded PI voltage and
             current loops in the controller dq frame
  vsm-outer  swing-equation power loop applying its voltage command
             directly (no inner loops)
  vsm-inner  swing-equation power loop with the same cascaded PI loops as
             droop
  vadm       swing-equation power loop, virtual-admittance current
             reference, PI current loop (no voltage PI)
  pr         swing-equation power loop with stationary-frame
             proportional-resonant voltage control and a proportional
             current loop

Conventions
-----------
dq pairs are complex numbers d + jq. The controller angle state ``theta``
is the synchronization angle relative to the common simulation frame
(which itself rotates at omega_n), so d(theta)/dt = omega - omega_n and a
synchronized equilibrium is a true fixed point for the dq variants.
Stationary-frame (alpha-beta) signals for the pr variant are reconstructed
with the absolute angle theta + omega_n*t; its resonator states therefore
rotate at omega_n in steady state, and the equilibrium residual is defined
relative to that rotating solution.

Cross-coupling decoupling terms use the nominal frequency (1 pu), i.e.
+j*c_f*v and +j*l_f*i. Voltage and current feed-forwards use the measured
PCC voltage and output current. No magnitude or current limiters are
modeled; the studied disturbances stay below protection thresholds.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .network import (NetworkState, OperatingPoint, SystemParams,
                      network_derivatives, output_current)
from .perunit import PerUnitBase

VARIANTS = ("droop", "vsm-outer", "vsm-inner", "vadm", "pr")


class UnknownVariant(ValueError):
    """Controller kind is not one of VARIANTS."""


class InitInfeasible(RuntimeError):
    """The variant cannot hold the requested operating point."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class Setpoints:
    """References handed to the power loops: P*, Q*, and the voltage
    magnitude reference V_n*."""

    p_ref: float = 1.0
    q_ref: float = 0.0
    v_ref: float = 1.0

    def __post_init__(self):
        if not self.v_ref > 0:
            raise ValueError(f"v_ref must be positive, got {self.v_ref}")


@dataclass(frozen=True)
class DroopGains:
    """k_p in rad/s per pu power (default 1% of nominal angular frequency),
    k_q in pu voltage per pu reactive power."""

    k_p: float = math.pi
    k_q: float = 0.05

    def __post_init__(self):
        if not self.k_p > 0:
            raise ValueError(f"k_p must be positive, got {self.k_p}")
        if self.k_q < 0:
            raise ValueError(f"k_q must be non-negative, got {self.k_q}")


@dataclass(frozen=True)
class VsmGains:
    """Swing-equation loop: J*d(omega_dev)/dt = (P* - P) - D_p*omega_dev.

    Units are pu power per rad/s^2 for j_inertia and pu power per rad/s for
    d_p. The default d_p = 1/k_p_droop gives the same steady-state
    frequency/power characteristic as the default droop controller.
    """

    j_inertia: float = 0.05
    d_p: float = 1.0 / math.pi
    k_q: float = 0.05

    def __post_init__(self):
        if not self.j_inertia > 0:
            raise ValueError(f"j_inertia must be positive, got {self.j_inertia}")
        if not self.d_p > 0:
            raise ValueError(f"d_p must be positive, got {self.d_p}")
        if self.k_q < 0:
            raise ValueError(f"k_q must be non-negative, got {self.k_q}")


@dataclass(frozen=True)
class InnerLoopGains:
    """PI gains for the cascaded voltage and current loops."""

    k_pv: float = 2.0
    k_iv: float = 400.0
    k_pc: float = 0.8
    k_ic: float = 8.0

    def __post_init__(self):
        for name in ("k_pv", "k_iv", "k_pc", "k_ic"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.k_pv == 0 and self.k_iv == 0:
            raise ValueError("voltage loop needs k_pv or k_iv positive")


@dataclass(frozen=True)
class VirtualAdmittanceParams:
    """Virtual admittance 1/(s*L_v + R_v); l_v is pu reactance at nominal
    frequency, so the fundamental-frequency virtual impedance is
    r_v + j*l_v."""

    l_v: float = 0.2
    r_v: float = 0.02

    def __post_init__(self):
        if not self.l_v > 0:
            raise ValueError(f"l_v must be positive, got {self.l_v}")
        if self.r_v < 0:
            raise ValueError(f"r_v must be non-negative, got {self.r_v}")


@dataclass(frozen=True)
class PrGains:
    """Stationary-frame voltage controller K_p + K_r*s/(s^2 + omega_res^2)
    plus proportional current gain k_i_ab and the virtual resistance used
    in reference generation. omega_damp > 0 optionally damps the resonator
    (transfer becomes K_r*s/(s^2 + 2*omega_damp*s + omega_res^2))."""

    k_p_ab: float = 1.0
    k_r_ab: float = 200.0
    omega_res: float = 100.0 * math.pi
    k_i_ab: float = 0.8
    r_virt: float = 0.02
    omega_damp: float = 0.0

    def __post_init__(self):
        if self.k_r_ab < 0:
            raise ValueError(f"k_r_ab must be non-negative, got {self.k_r_ab}")
        if not self.omega_res > 0:
            raise ValueError(f"omega_res must be positive, got {self.omega_res}")
        if not self.k_i_ab > 0:
            raise ValueError(f"k_i_ab must be positive, got {self.k_i_ab}")


@dataclass(frozen=True)
class ControllerSpec:
    """Tagged controller variant with its gain set. Only the gain groups
    used by ``kind`` matter; the rest keep their defaults."""

    kind: str
    droop: DroopGains = DroopGains()
    vsm: VsmGains = VsmGains()
    inner: InnerLoopGains = InnerLoopGains()
    vadm: VirtualAdmittanceParams = VirtualAdmittanceParams()
    pr: PrGains = PrGains()
    flip_reactive_droop: bool = False

    def __post_init__(self):
        if self.kind not in VARIANTS:
            raise UnknownVariant(
                f"unknown controller kind {self.kind!r}; expected one of "
                f"{', '.join(VARIANTS)}")

    @property
    def reactive_sign(self) -> float:
        return -1.0 if self.flip_reactive_droop else 1.0


@dataclass(slots=True)
class ControllerState:
    """Controller dynamic state. Fields unused by the active variant stay
    zero and have zero derivatives (fixed 12 real dimensions)."""

    theta: float = 0.0
    omega_dev: float = 0.0
    v_int: complex = 0j
    c_int: complex = 0j
    y_cur: complex = 0j
    res1: complex = 0j
    res2: complex = 0j


@dataclass(slots=True)
class Measurements:
    """What the controller sees each step: common-frame phasors, PCC power,
    and the simulation clock (needed for stationary-frame reconstruction)."""

    v_o: complex
    i_l: complex
    i_o: complex
    p: float
    q: float
    t: float = 0.0


def droop_power_loop(sp: Setpoints, p_meas: float, q_meas: float,
                     g: DroopGains, base: PerUnitBase,
                     reactive_sign: float = 1.0):
    """Droop laws: omega = omega_n + k_p*(P* - P),
    v_od* = V_n* - k_q*(Q* - Q), v_oq* = 0."""
    omega = base.omega_n + g.k_p * (sp.p_ref - p_meas)
    v_od_ref = sp.v_ref - reactive_sign * g.k_q * (sp.q_ref - q_meas)
    return omega, v_od_ref, 0.0


def vsm_power_loop(sp: Setpoints, p_meas: float, q_meas: float,
                   omega_dev: float, g: VsmGains, base: PerUnitBase,
                   reactive_sign: float = 1.0):
    """Swing equation J*d(omega_dev)/dt = (P* - P) - D_p*omega_dev with the
    same reactive droop as the droop variant."""
    d_omega_dev = ((sp.p_ref - p_meas) - g.d_p * omega_dev) / g.j_inertia
    omega = base.omega_n + omega_dev
    v_od_ref = sp.v_ref - reactive_sign * g.k_q * (sp.q_ref - q_meas)
    return d_omega_dev, omega, v_od_ref


def voltage_pi_loop(v_ref: complex, v_meas: complex, i_o: complex,
                    integ: complex, g: InnerLoopGains, c_f: float):
    """PI voltage loop with output-current feed-forward and capacitive
    decoupling: i_l* = i_o + PI(v_ref - v) + j*c_f*v."""
    e = v_ref - v_meas
    i_l_ref = i_o + g.k_pv * e + g.k_iv * integ + 1j * c_f * v_meas
    return i_l_ref, e


def current_pi_loop(i_l_ref: complex, i_l_meas: complex, v_ff: complex,
                    integ: complex, g: InnerLoopGains, l_f: float):
    """PI current loop with voltage feed-forward and inductive decoupling:
    v_cmd = v_ff + PI(i_l* - i_l) + j*l_f*i_l."""
    e = i_l_ref - i_l_meas
    v_cmd = v_ff + g.k_pc * e + g.k_ic * integ + 1j * l_f * i_l_meas
    return v_cmd, e


def virtual_admittance_loop(v_ref: complex, v_meas: complex, i_o: complex,
                            i_y: complex, p: VirtualAdmittanceParams,
                            base: PerUnitBase):
    """dq realization of 1/(s*L_v + R_v) driven by the voltage error; the
    internal current i_y settles to (v_ref - v)/(r_v + j*l_v) and is added
    to the measured output current to form the current reference."""
    w = base.omega_n
    d_i_y = (w / p.l_v) * ((v_ref - v_meas) - p.r_v * i_y) - 1j * w * i_y
    i_l_ref = i_o + i_y
    return i_l_ref, d_i_y


def pr_reference_gen(v_od_ref: float, theta: float, i_o_ab: complex,
                     r_virt: float) -> complex:
    """Stationary-frame voltage reference: r_virt*i_o + v_od_ref*e^{j*theta}."""
    return r_virt * i_o_ab + v_od_ref * cmath.exp(1j * theta)


def pr_voltage_loop(v_ref_ab: complex, v_meas_ab: complex, i_o_ab: complex,
                    res1: complex, res2: complex, g: PrGains):
    """Proportional-resonant voltage loop, canonical resonator realization
    per axis (complex = both axes):

        d(res1)/dt = res2 + k_r*e - 2*omega_damp*res1
        d(res2)/dt = -omega_res^2 * res1

    giving res1/e = k_r*s/(s^2 + 2*omega_damp*s + omega_res^2); the loop
    output is i_o + k_p*e + res1.
    """
    e = v_ref_ab - v_meas_ab
    i_l_ref = i_o_ab + g.k_p_ab * e + res1
    d_res1 = res2 + g.k_r_ab * e - 2.0 * g.omega_damp * res1
    d_res2 = -g.omega_res ** 2 * res1
    return i_l_ref, d_res1, d_res2


def p_current_loop(i_l_ref_ab: complex, i_l_meas_ab: complex,
                   v_ff_ab: complex, k_i_ab: float) -> complex:
    """Proportional current control: v_cmd = v_ff + k*(i* - i)."""
    return v_ff_ab + k_i_ab * (i_l_ref_ab - i_l_meas_ab)


def controller_step(spec: ControllerSpec, meas: Measurements,
                    state: ControllerState, sp: Setpoints,
                    base: PerUnitBase, filt) -> tuple[complex, ControllerState]:
    """One evaluation of the active variant: converter voltage command in
    the common frame plus the controller state derivative."""
    kind = spec.kind
    w_n = base.omega_n

    if kind == "droop":
        omega, v_od_ref, v_oq_ref = droop_power_loop(
            sp, meas.p, meas.q, spec.droop, base, spec.reactive_sign)
        rot = cmath.exp(-1j * state.theta)
        v_o_c = meas.v_o * rot
        i_l_ref, d_vint = voltage_pi_loop(
            complex(v_od_ref, v_oq_ref), v_o_c, meas.i_o * rot,
            state.v_int, spec.inner, filt.c_f)
        v_cmd, d_cint = current_pi_loop(
            i_l_ref, meas.i_l * rot, v_o_c, state.c_int, spec.inner, filt.l_f)
        v_inv = v_cmd / rot
        return v_inv, ControllerState(theta=omega - w_n, v_int=d_vint,
                                      c_int=d_cint)

    if kind == "vsm-outer":
        d_odev, omega, v_od_ref = vsm_power_loop(
            sp, meas.p, meas.q, state.omega_dev, spec.vsm, base,
            spec.reactive_sign)
        v_inv = v_od_ref * cmath.exp(1j * state.theta)
        return v_inv, ControllerState(theta=omega - w_n, omega_dev=d_odev)

    if kind == "vsm-inner":
        d_odev, omega, v_od_ref = vsm_power_loop(
            sp, meas.p, meas.q, state.omega_dev, spec.vsm, base,
            spec.reactive_sign)
        rot = cmath.exp(-1j * state.theta)
        v_o_c = meas.v_o * rot
        i_l_ref, d_vint = voltage_pi_loop(
            complex(v_od_ref, 0.0), v_o_c, meas.i_o * rot,
            state.v_int, spec.inner, filt.c_f)
        v_cmd, d_cint = current_pi_loop(
            i_l_ref, meas.i_l * rot, v_o_c, state.c_int, spec.inner, filt.l_f)
        v_inv = v_cmd / rot
        return v_inv, ControllerState(theta=omega - w_n, omega_dev=d_odev,
                                      v_int=d_vint, c_int=d_cint)

    if kind == "vadm":
        d_odev, omega, v_od_ref = vsm_power_loop(
            sp, meas.p, meas.q, state.omega_dev, spec.vsm, base,
            spec.reactive_sign)
        rot = cmath.exp(-1j * state.theta)
        v_o_c = meas.v_o * rot
        i_l_ref, d_iy = virtual_admittance_loop(
            complex(v_od_ref, 0.0), v_o_c, meas.i_o * rot,
            state.y_cur, spec.vadm, base)
        v_cmd, d_cint = current_pi_loop(
            i_l_ref, meas.i_l * rot, v_o_c, state.c_int, spec.inner, filt.l_f)
        v_inv = v_cmd / rot
        return v_inv, ControllerState(theta=omega - w_n, omega_dev=d_odev,
                                      c_int=d_cint, y_cur=d_iy)

    if kind == "pr":
        d_odev, omega, v_od_ref = vsm_power_loop(
            sp, meas.p, meas.q, state.omega_dev, spec.vsm, base,
            spec.reactive_sign)
        rot_ab = cmath.exp(1j * w_n * meas.t)  # common frame -> stationary
        v_o_ab = meas.v_o * rot_ab
        i_o_ab = meas.i_o * rot_ab
        v_ref_ab = pr_reference_gen(v_od_ref, state.theta + w_n * meas.t,
                                    i_o_ab, spec.pr.r_virt)
        i_l_ref_ab, d_r1, d_r2 = pr_voltage_loop(
            v_ref_ab, v_o_ab, i_o_ab, state.res1, state.res2, spec.pr)
        v_inv_ab = p_current_loop(i_l_ref_ab, meas.i_l * rot_ab, v_o_ab,
                                  spec.pr.k_i_ab)
        v_inv = v_inv_ab / rot_ab
        return v_inv, ControllerState(theta=omega - w_n, omega_dev=d_odev,
                                      res1=d_r1, res2=d_r2)

    raise UnknownVariant(kind)


def controller_frequency(spec: ControllerSpec, meas: Measurements,
                         state: ControllerState, sp: Setpoints,
                         base: PerUnitBase) -> float:
    """Instantaneous power-loop frequency theta_dot in rad/s."""
    if spec.kind == "droop":
        return base.omega_n + spec.droop.k_p * (sp.p_ref - meas.p)
    return base.omega_n + state.omega_dev


def _pi_bias(needed: complex, k_i: float, which: str) -> complex:
    if k_i > 0:
        return needed / k_i
    if abs(needed) < 1e-12:
        return 0j
    raise InitInfeasible(
        f"{which} loop requires integrator bias {needed:.3e} but its "
        "integral gain is zero")


def init_controller_state(spec: ControllerSpec, op: OperatingPoint,
                          sys: SystemParams
                          ) -> tuple[ControllerState, Setpoints]:
    """Back-solve controller states and effective setpoints so the variant
    holds the given operating point exactly.

    Returns the state together with trimmed setpoints: P* = solved P,
    Q* = solved Q (so the stateless reactive droop contributes no bias) and
    V_n* back-solved per variant. Verifies the closed-loop residual is
    below 1e-8 and raises InitInfeasible otherwise.
    """
    base, filt = sys.base, sys.filt
    v_o, i_l = op.state.v_o, op.state.i_l
    i_o = output_current(op.state, sys.load)
    i_c = i_l - i_o
    kind = spec.kind

    v_int = c_int = y_cur = res1 = res2 = 0j

    if kind in ("droop", "vsm-inner"):
        theta = cmath.phase(v_o)
        rot = cmath.exp(-1j * theta)
        v_o_c, i_o_c, i_l_c = v_o * rot, i_o * rot, i_l * rot
        v_n_ref = abs(v_o)
        v_int = _pi_bias(i_l_c - i_o_c - 1j * filt.c_f * v_o_c,
                         spec.inner.k_iv, "voltage")
        c_int = _pi_bias(op.v_inv * rot - v_o_c - 1j * filt.l_f * i_l_c,
                         spec.inner.k_ic, "current")
    elif kind == "vsm-outer":
        theta = cmath.phase(op.v_inv)
        v_n_ref = abs(op.v_inv)
    elif kind == "vadm":
        # At equilibrium the admittance current equals the capacitor
        # current (current loop integrator forces i_l = i_l*).
        anchor = v_o + complex(spec.vadm.r_v, spec.vadm.l_v) * i_c
        theta = cmath.phase(anchor)
        v_n_ref = abs(anchor)
        rot = cmath.exp(-1j * theta)
        y_cur = i_c * rot
        c_int = _pi_bias(op.v_inv * rot - v_o * rot - 1j * filt.l_f * i_l * rot,
                         spec.inner.k_ic, "current")
    elif kind == "pr":
        anchor = v_o - spec.pr.r_virt * i_o
        theta = cmath.phase(anchor)
        v_n_ref = abs(anchor)
        # Resonator carries the sinusoid that closes the current loop with
        # zero voltage-tracking error; at t=0 the stationary frame
        # coincides with the common frame.
        res1 = i_l + (op.v_inv - v_o) / spec.pr.k_i_ab - i_o
        res2 = 1j * spec.pr.omega_res * res1
    else:
        raise UnknownVariant(kind)

    state = ControllerState(theta=theta, omega_dev=0.0, v_int=v_int,
                            c_int=c_int, y_cur=y_cur, res1=res1, res2=res2)
    sp_eff = Setpoints(p_ref=op.p, q_ref=op.q, v_ref=v_n_ref)

    resid = equilibrium_residual(spec, state, sp_eff, op, sys)
    if not resid < 1e-8:
        raise InitInfeasible(
            f"{kind} cannot hold the operating point: residual {resid:.3e}",
            residual=resid)
    return state, sp_eff


def equilibrium_residual(spec: ControllerSpec, state: ControllerState,
                         sp: Setpoints, op: OperatingPoint,
                         sys: SystemParams) -> float:
    """Norm of the closed-loop deviation from a synchronized steady state.

    For the dq variants this is the plain derivative norm plus the mismatch
    between the commanded and required converter voltage. The pr variant's
    resonator states legitimately rotate at omega_res in steady state, so
    their derivatives are compared against that rotation instead of zero.
    """
    i_o = output_current(op.state, sys.load)
    meas = Measurements(v_o=op.state.v_o, i_l=op.state.i_l, i_o=i_o,
                        p=op.p, q=op.q, t=0.0)
    v_inv, d = controller_step(spec, meas, state, sp, sys.base, sys.filt)
    net_d = network_derivatives(op.state, v_inv, sys)
    exp_r1 = 1j * spec.pr.omega_res * state.res1 if spec.kind == "pr" else 0j
    exp_r2 = 1j * spec.pr.omega_res * state.res2 if spec.kind == "pr" else 0j
    parts = [abs(v_inv - op.v_inv), net_d.norm(), abs(d.theta),
             abs(d.omega_dev), abs(d.v_int), abs(d.c_int), abs(d.y_cur),
             abs(d.res1 - exp_r1), abs(d.res2 - exp_r2)]
    return math.sqrt(sum(x * x for x in parts))


def default_controller_spec(kind: str) -> ControllerSpec:
    """Factory for a variant with the default gain set."""
    return ControllerSpec(kind=kind)


def default_controller_specs() -> dict[str, ControllerSpec]:
    return {kind: ControllerSpec(kind=kind) for kind in VARIANTS}
