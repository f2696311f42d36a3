"""Per-unit foundations: bases, reference-frame rotations, complex power,
and grid-strength arithmetic.

All electrical quantities are per-unit on the converter base; the physical
bases carried by PerUnitBase are informational. dq and alpha-beta pairs are
plain Python complex numbers (d + jq, alpha + j*beta). The transform is
magnitude-invariant, so active power is Re(v * conj(i)) with no 3/2 factor.
Angles accumulate unwrapped; wrapping happens only inside the complex
exponential.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field


class ZeroImpedance(ValueError):
    """Impedance magnitude is zero, so SCR is undefined."""


def require_finite(z: complex, name: str = "value") -> complex:
    """Reject NaN/Inf components at module boundaries."""
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"{name} must have finite components, got {z!r}")
    return z


@dataclass(frozen=True)
class PerUnitBase:
    """Nominal frequency plus informational power/voltage bases.

    omega_n is derived in __post_init__ so it can never drift out of sync
    with f_n.
    """

    f_n: float = 50.0
    s_base: float = 1.0
    v_base: float = 1.0
    omega_n: float = field(init=False, compare=False)

    def __post_init__(self):
        if not self.f_n > 0:
            raise ValueError(f"f_n must be positive, got {self.f_n}")
        object.__setattr__(self, "omega_n", 2.0 * math.pi * self.f_n)


@dataclass(frozen=True)
class GridStrength:
    """How stiff the grid is behind its Thevenin impedance.

    xr_ratio is math.inf for a purely reactive impedance (flagged value,
    not an error).
    """

    z_grid: complex
    scr: float
    xr_ratio: float


def rotate_to_frame(v: complex, theta: float) -> complex:
    """Rotate a common/stationary-frame quantity into a frame at angle theta.

    Returns v * exp(-j*theta); magnitude is preserved.
    """
    return v * cmath.exp(-1j * theta)


def rotate_from_frame(v: complex, theta: float) -> complex:
    """Inverse of rotate_to_frame: returns v * exp(+j*theta)."""
    return v * cmath.exp(1j * theta)


def complex_power(v: complex, i: complex) -> tuple[float, float]:
    """Active and reactive power (p, q) of a voltage/current dq pair."""
    s = v * i.conjugate()
    return s.real, s.imag


def compute_grid_strength(z_grid: complex) -> GridStrength:
    """SCR and X/R ratio of a per-unit Thevenin impedance.

    SCR = 1/|z|; X/R = Im(z)/Re(z), or math.inf when Re(z) == 0.
    Raises ZeroImpedance for |z| == 0.
    """
    require_finite(z_grid, "z_grid")
    mag = abs(z_grid)
    if mag == 0.0:
        raise ZeroImpedance("grid impedance has zero magnitude")
    if z_grid.real != 0.0:
        xr = z_grid.imag / z_grid.real
    else:
        xr = math.inf
    return GridStrength(z_grid=z_grid, scr=1.0 / mag, xr_ratio=xr)
