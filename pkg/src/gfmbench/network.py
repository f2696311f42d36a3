"""Benchmark single-line network: an ideal controllable voltage source
behind an L filter with shunt capacitor, a switchable resistive load at the
PCC (the capacitor node), and a stiff grid source behind a Thevenin
impedance.

All states are dq pairs in a common frame rotating at the nominal angular
frequency omega_n. Reactances/susceptances are per-unit at nominal
frequency, so time constants in seconds carry a factor omega_n:

    di_l/dt = (omega_n/l_f) * (v_inv - v_o - r_f*i_l) - j*omega_n*i_l
    dv_o/dt = (omega_n/c_f) * (i_l - i_load - i_g)    - j*omega_n*v_o
    di_g/dt = (omega_n/x_g) * (v_o - v_src - r_g*i_g) - j*omega_n*i_g

with v_src = v_mag * exp(j*phase) constant between events and
i_load = p_load * v_o when the load is connected (constant resistance
sized at 1 pu nominal voltage, r_load = 1/p_load).

The converter output current into PCC devices is i_o = i_load + i_g,
i.e. the inductor current minus the capacitor current.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .perunit import PerUnitBase, require_finite


class NoConvergence(RuntimeError):
    """Steady-state solve failed; carries the final residual norm."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class FilterParams:
    """Converter output filter. l_f and c_f are pu reactance/susceptance at
    nominal frequency. c_f == 0 is admitted for phasor-only test circuits;
    the dynamic model requires c_f > 0.
    """

    l_f: float = 0.10
    c_f: float = 0.05
    r_f: float = 0.005

    def __post_init__(self):
        if not self.l_f > 0:
            raise ValueError(f"l_f must be positive, got {self.l_f}")
        if self.c_f < 0:
            raise ValueError(f"c_f must be non-negative, got {self.c_f}")
        if self.r_f < 0:
            raise ValueError(f"r_f must be non-negative, got {self.r_f}")


@dataclass(frozen=True)
class GridParams:
    """Thevenin grid: stiff source v_mag at angle phase behind z_grid."""

    z_grid: complex = 0.1178 + 0.5891j
    v_mag: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        require_finite(self.z_grid, "z_grid")
        if abs(self.z_grid) == 0:
            raise ValueError("z_grid must have nonzero magnitude")
        if not self.v_mag > 0:
            raise ValueError(f"v_mag must be positive, got {self.v_mag}")

    @property
    def r_g(self) -> float:
        return self.z_grid.real

    @property
    def x_g(self) -> float:
        return self.z_grid.imag

    def source_phasor(self) -> complex:
        return self.v_mag * cmath.exp(1j * self.phase)


@dataclass(frozen=True)
class LoadParams:
    """Switchable constant-resistance load at the PCC, sized so it draws
    p_load at 1 pu voltage (r_load = 1/p_load)."""

    p_load: float = 0.2
    connected: bool = False

    def __post_init__(self):
        if self.p_load < 0:
            raise ValueError(f"p_load must be non-negative, got {self.p_load}")

    @property
    def conductance(self) -> float:
        """Load conductance seen by the network (0 when disconnected)."""
        if self.connected and self.p_load > 0:
            return self.p_load
        return 0.0


@dataclass(frozen=True)
class SystemParams:
    """The physical benchmark: per-unit base, grid, filter, load."""

    base: PerUnitBase = PerUnitBase()
    grid: GridParams = GridParams()
    filt: FilterParams = FilterParams()
    load: LoadParams = LoadParams()


@dataclass(slots=True)
class NetworkState:
    """Electrical state: filter inductor current, PCC voltage, grid branch
    current (dq pairs in the common frame; 6 real states). Finiteness is
    enforced by the integrator's divergence check, not per construction.
    """

    i_l: complex = 0j
    v_o: complex = 0j
    i_g: complex = 0j

    def as_array(self) -> np.ndarray:
        s = self
        return np.array([s.i_l.real, s.i_l.imag, s.v_o.real, s.v_o.imag,
                         s.i_g.real, s.i_g.imag])

    def norm(self) -> float:
        return math.sqrt(abs(self.i_l) ** 2 + abs(self.v_o) ** 2
                         + abs(self.i_g) ** 2)


@dataclass(frozen=True)
class OperatingPoint:
    """Converged steady state: network state, converter terminal voltage
    phasor, and the PCC power it delivers."""

    state: NetworkState
    v_inv: complex
    p: float
    q: float


def output_current(state: NetworkState, load: LoadParams) -> complex:
    """Converter output current into PCC devices (load + grid branch)."""
    return load.conductance * state.v_o + state.i_g


def network_derivatives(state: NetworkState, v_inv: complex,
                        sys: SystemParams, t: float = 0.0) -> NetworkState:
    """Time derivatives of the network state in the common frame.

    v_inv is the converter terminal voltage command (ideal source, no PWM).
    t is unused by this autonomous model but kept for integrator plumbing.
    """
    filt, grid, load = sys.filt, sys.grid, sys.load
    if not filt.c_f > 0:
        raise ValueError("dynamic network model requires c_f > 0")
    w = sys.base.omega_n
    v_src = grid.source_phasor()
    i_load = load.conductance * state.v_o
    di_l = (w / filt.l_f) * (v_inv - state.v_o - filt.r_f * state.i_l) \
        - 1j * w * state.i_l
    dv_o = (w / filt.c_f) * (state.i_l - i_load - state.i_g) \
        - 1j * w * state.v_o
    di_g = (w / grid.x_g) * (state.v_o - v_src - grid.r_g * state.i_g) \
        - 1j * w * state.i_g
    return NetworkState(i_l=di_l, v_o=dv_o, i_g=di_g)


def _assemble_from_pcc(v_o: complex, sys: SystemParams):
    """Given the PCC voltage phasor, back out the full phasor solution.

    With v_o fixed, every other quantity of the circuit follows
    algebraically at nominal frequency.
    """
    filt, grid, load = sys.filt, sys.grid, sys.load
    v_src = grid.source_phasor()
    i_g = (v_o - v_src) / grid.z_grid
    i_load = load.conductance * v_o
    i_o = i_load + i_g
    i_l = i_o + 1j * filt.c_f * v_o
    v_inv = v_o + complex(filt.r_f, filt.l_f) * i_l
    s = v_o * i_o.conjugate()
    return i_l, i_g, v_inv, s


def steady_state_solve(sys: SystemParams, p_target: float, v_target: float,
                       *, max_iter: int = 60, tol: float = 1e-12
                       ) -> OperatingPoint:
    """Newton solve of the phasor circuit for the matching prerequisite:
    converter delivering p_target at the PCC with |v_o| = v_target.

    Converges to a residual norm below 1e-10 or raises NoConvergence (which
    signals an infeasible operating point, e.g. p_target beyond the weak
    grid's transfer capability).
    """
    grid = sys.grid

    def residual(v_o: complex) -> np.ndarray:
        *_, s = _assemble_from_pcc(v_o, sys)
        return np.array([s.real - p_target, abs(v_o) - v_target])

    # Warm start from the lossless power-angle estimate over the grid branch.
    sin_d = p_target * abs(grid.z_grid) / max(v_target * grid.v_mag, 1e-9)
    phi0 = grid.phase + math.asin(min(max(sin_d, -0.95), 0.95))
    v_o = v_target * cmath.exp(1j * phi0)

    h = 1e-7
    res = residual(v_o)
    for _ in range(max_iter):
        if float(np.linalg.norm(res)) < tol:
            break
        jac = np.empty((2, 2))
        jac[:, 0] = (residual(v_o + h) - residual(v_o - h)) / (2 * h)
        jac[:, 1] = (residual(v_o + 1j * h) - residual(v_o - 1j * h)) / (2 * h)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            raise NoConvergence(
                "steady-state Newton hit a singular Jacobian "
                f"(residual {float(np.linalg.norm(res)):.3e})",
                residual=float(np.linalg.norm(res)))
        v_o = v_o + complex(step[0], step[1])
        if not (math.isfinite(v_o.real) and math.isfinite(v_o.imag)):
            raise NoConvergence("steady-state Newton diverged to non-finite "
                                "voltage", residual=math.inf)
        res = residual(v_o)

    norm = float(np.linalg.norm(res))
    if not norm < 1e-10:
        raise NoConvergence(
            f"steady-state solve did not converge: residual {norm:.3e} after "
            f"{max_iter} iterations (operating point likely infeasible)",
            residual=norm)

    i_l, i_g, v_inv, s = _assemble_from_pcc(v_o, sys)
    state = NetworkState(i_l=i_l, v_o=v_o, i_g=i_g)
    return OperatingPoint(state=state, v_inv=v_inv, p=s.real, q=s.imag)


def apply_phase_jump(grid: GridParams, delta: float) -> GridParams:
    """Grid source angle stepped by delta (discontinuous at event time)."""
    return replace(grid, phase=grid.phase + delta)


def apply_load_switch(load: LoadParams, on: bool) -> LoadParams:
    """Connect or disconnect the PCC load; idempotent."""
    return replace(load, connected=on)


def power_balance_residual(state: NetworkState, deriv: NetworkState,
                           v_inv: complex, sys: SystemParams) -> float:
    """Instantaneous power balance check (pu).

    Converter terminal power minus resistive losses, stored-energy rate,
    load power, and power absorbed by the grid source. Zero up to float
    roundoff for any consistent (state, deriv) pair.
    """
    filt, grid, load = sys.filt, sys.grid, sys.load
    w = sys.base.omega_n
    v_src = grid.source_phasor()
    p_in = (v_inv * state.i_l.conjugate()).real
    p_rf = filt.r_f * abs(state.i_l) ** 2
    p_rg = grid.r_g * abs(state.i_g) ** 2
    p_load = load.conductance * abs(state.v_o) ** 2
    p_src = (v_src * state.i_g.conjugate()).real
    de_dt = (filt.l_f * (state.i_l.conjugate() * deriv.i_l).real
             + filt.c_f * (state.v_o.conjugate() * deriv.v_o).real
             + grid.x_g * (state.i_g.conjugate() * deriv.i_g).real) / w
    return p_in - p_rf - p_rg - p_load - p_src - de_dt
