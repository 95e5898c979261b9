"""Closed-form vessel physics.

Tube law and its inverse, wall stiffness, wave speed, velocity-profile
constants and the lumped (R, L, C) parameters of a single compliant vessel.
All quantities are in CGS units (cm, g, s, dyne).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CollapseError, ConvergenceError

#: 1 mmHg in dyne/cm^2, for presentation-layer conversions only.
MMHG = 1333.22


def coriolis_alpha(zeta: float) -> float:
    """Momentum correction factor for a power-law axial velocity profile."""
    if zeta <= 0:
        raise ValueError(f"velocity profile order must be positive, got {zeta}")
    return (zeta + 2.0) / (zeta + 1.0)


@dataclass(frozen=True)
class FluidProps:
    """Blood properties: density rho (g/cm^3), dynamic viscosity mu
    (dyne*s/cm^2) and velocity-profile order zeta (dimensionless)."""

    rho: float
    mu: float
    zeta: float = 9.0

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError(f"density must be positive, got {self.rho}")
        if self.mu <= 0:
            raise ValueError(f"viscosity must be positive, got {self.mu}")
        if self.zeta <= 0:
            raise ValueError(f"profile order must be positive, got {self.zeta}")

    @property
    def alpha(self) -> float:
        return coriolis_alpha(self.zeta)

    @property
    def k_R(self) -> float:
        """Viscous resistance coefficient per unit length (cm^2/s)."""
        return viscous_resistance_coeff(self)


def viscous_resistance_coeff(fluid: FluidProps) -> float:
    """k_R = 2 (zeta + 2) pi mu / rho."""
    return 2.0 * (fluid.zeta + 2.0) * math.pi * fluid.mu / fluid.rho


def arterial_stiffness(h0: float, E: float, nu: float, A0: float) -> float:
    """Wall stiffness of a thin elastic arterial wall (dyne/cm^2)."""
    if A0 <= 0:
        raise ValueError(f"reference area must be positive, got {A0}")
    if nu >= 1.0:
        raise ValueError(f"Poisson ratio must be < 1, got {nu}")
    return math.sqrt(math.pi) * h0 * E / ((1.0 - nu * nu) * math.sqrt(A0))


def adan_wall_thickness(r0: float) -> float:
    """Empirical wall thickness (cm) as a function of reference radius."""
    if r0 <= 0:
        raise ValueError(f"radius must be positive, got {r0}")
    a, b, c, d = 0.2802, -5.053, 0.1324, -0.1114
    return r0 * (a * math.exp(b * r0) + c * math.exp(d * r0))


@dataclass(frozen=True)
class WallModel:
    """Elastic wall description: reference area A0 (cm^2), stiffness K
    (dyne/cm^2), tube-law exponents (m, n), reference pressure P0 and
    external pressure p_ext (dyne/cm^2). h0, E, nu are kept for reporting."""

    A0: float
    K: float
    m: float = 0.5
    n: float = 0.0
    P0: float = 0.0
    p_ext: float = 0.0
    h0: float = 0.0
    E: float = 0.0
    nu: float = 0.5

    def __post_init__(self):
        if self.A0 <= 0:
            raise ValueError(f"reference area must be positive, got {self.A0}")
        if self.K <= 0:
            raise ValueError(f"stiffness must be positive, got {self.K}")
        if self.m <= self.n:
            raise ValueError(f"tube-law exponents require m > n, got m={self.m}, n={self.n}")
        if not 0.0 <= self.nu < 1.0:
            raise ValueError(f"Poisson ratio must be in [0, 1), got {self.nu}")

    @classmethod
    def arterial(cls, A0: float, h0: float, E: float, nu: float = 0.5,
                 P0: float = 0.0, p_ext: float = 0.0) -> "WallModel":
        """Arterial wall with K computed from thickness, Young's modulus
        and Poisson ratio; exponents m = 1/2, n = 0."""
        K = arterial_stiffness(h0, E, nu, A0)
        return cls(A0=A0, K=K, P0=P0, p_ext=p_ext, h0=h0, E=E, nu=nu)

    @property
    def is_arterial(self) -> bool:
        return self.m == 0.5 and self.n == 0.0

    @property
    def r0(self) -> float:
        """Reference radius (cm)."""
        return math.sqrt(self.A0 / math.pi)


@dataclass(frozen=True)
class VesselSpec:
    """One vessel: identifier, length (cm), wall mechanics and fluid."""

    vessel_id: str
    length: float
    wall: WallModel
    fluid: FluidProps

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"vessel length must be positive, got {self.length}")


@dataclass(frozen=True)
class LumpedConstants:
    """Constant lumped parameters evaluated at the reference area."""

    R0: float  # dyne*s/cm^5
    L0: float  # g/cm^4
    C0: float  # cm^5/dyne


def tube_law_pressure(A: float, wall: WallModel) -> float:
    """Internal pressure from the elastic tube law (dyne/cm^2)."""
    if A <= 0:
        raise CollapseError(f"area must be positive, got {A}")
    x = A / wall.A0
    return wall.K * (x ** wall.m - x ** wall.n) + wall.P0 + wall.p_ext


def tube_law_slope(A: float, wall: WallModel) -> float:
    """dp/dA of the tube law (dyne/cm^4)."""
    if A <= 0:
        raise CollapseError(f"area must be positive, got {A}")
    x = A / wall.A0
    return wall.K * (wall.m * x ** wall.m - wall.n * x ** wall.n) / A


def tube_law_area(p: float, wall: WallModel, rtol: float = 1e-12,
                  max_iter: int = 100) -> float:
    """Invert the tube law: area at internal pressure p.

    For the arterial exponents (m = 1/2, n = 0) the quadratic closed form is
    used; for general (m, n) a safeguarded Newton iteration with bisection
    fallback is applied on the bracket (0, 1e6 * A0].
    """
    if wall.is_arterial:
        root = 1.0 + (p - wall.P0 - wall.p_ext) / wall.K
        if root <= 0:
            raise CollapseError(
                f"pressure {p} is below the collapse limit of the arterial tube law")
        return wall.A0 * root * root

    target = p
    lo, hi = 1e-300, 1e6 * wall.A0
    if tube_law_pressure(hi, wall) < target:
        raise ConvergenceError(f"pressure {p} exceeds tube law range at A = 1e6*A0")
    A = wall.A0
    for _ in range(max_iter):
        f = tube_law_pressure(A, wall) - target
        if f > 0:
            hi = min(hi, A)
        else:
            lo = max(lo, A)
        step = f / tube_law_slope(A, wall)
        A_new = A - step
        if not (lo < A_new < hi):
            A_new = 0.5 * (lo + hi)
        if abs(A_new - A) <= rtol * abs(A_new):
            return A_new
        A = A_new
    raise ConvergenceError(
        f"tube law inversion did not converge for p={p} (m={wall.m}, n={wall.n})")


def wave_speed(A: float, wall: WallModel, fluid: FluidProps) -> float:
    """Wave speed c = sqrt(A/rho * dp/dA) (cm/s)."""
    if A <= 0:
        raise CollapseError(f"area must be positive, got {A}")
    x = A / wall.A0
    radicand = (wall.K / fluid.rho) * (wall.m * x ** wall.m - wall.n * x ** wall.n)
    if radicand < 0:
        raise ValueError(
            f"negative wave speed radicand at A={A} (m={wall.m}, n={wall.n})")
    return math.sqrt(radicand)


def lumped_constants(spec: VesselSpec) -> LumpedConstants:
    """Constant (R0, L0, C0) of a vessel evaluated at A = A0."""
    w, f, l = spec.wall, spec.fluid, spec.length
    R0 = f.rho * f.k_R * l / (w.A0 * w.A0)
    L0 = f.rho * l / w.A0
    C0 = l / tube_law_slope(w.A0, w)
    return LumpedConstants(R0=R0, L0=L0, C0=C0)


def lumped_nonlinear(spec: VesselSpec, A_hat: float) -> tuple[float, float]:
    """(R, L) evaluated at the instantaneous mean area A_hat."""
    if A_hat <= 0:
        raise CollapseError(f"mean area must be positive, got {A_hat}")
    f, l = spec.fluid, spec.length
    R = f.rho * f.k_R * l / (A_hat * A_hat)
    L = f.rho * l / A_hat
    return R, L


def nonlinear_compliance(spec: VesselSpec, A_hat: float) -> float:
    """Compliance l * (dA/dp) evaluated at A_hat (diagnostic only)."""
    if A_hat <= 0:
        raise CollapseError(f"mean area must be positive, got {A_hat}")
    return spec.length / tube_law_slope(A_hat, spec.wall)
