"""Thermodynamic property layer for the compositional flow model.

Liquid-only regime: rock and water are incompressible, so the oil volume
follows from the volume balance V^w + V^o + V^r = V and the pressure from
the Peng-Robinson equation of state evaluated at the oil molar volume.
Relative permeabilities use Corey's power law; oil viscosity uses the
Lohrenz-Bray-Clark density correlation (with a constant-viscosity mode for
solver testing).

All property functions are vectorized over leading axes (compositions in
the trailing axis) and provide analytic derivatives for Jacobian assembly.
SI units throughout: Pa, m, s, mol, K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import InfeasibleStateError

GAS_CONSTANT = 8.314462618          # J / (mol K)
GRAVITY = 9.81                      # m / s^2
STANDARD_ATMOSPHERE = 101325.0      # Pa

DEFAULT_TEMPERATURE = 333.15        # K (60 C)
WATER_MOLAR_VOLUME = 1.8e-5         # m^3 / mol, incompressible liquid water
WATER_VISCOSITY = 3.0e-4            # Pa s (0.3 cP)
WATER_MASS_DENSITY = 1000.0         # kg / m^3

# Peng-Robinson denominator offsets: (v + eps*b)(v + sigma*b).
PR_EPSILON = 1.0 - np.sqrt(2.0)
PR_SIGMA = 1.0 + np.sqrt(2.0)
# Critical compressibility used to estimate a missing critical molar volume.
PR_CRITICAL_Z = 0.307

# Lohrenz-Bray-Clark polynomial in reduced molar density (cP-g-K-atm units).
LBC_COEFFS = (0.1023, 0.023364, 0.058533, -0.040758, 0.0093324)


@dataclass(frozen=True)
class ComponentProperties:
    """Critical constants per component.

    ``vc`` is only needed by the LBC viscosity correlation; when a property
    file omits it, it is estimated from a fixed critical compressibility.
    """

    names: tuple[str, ...]
    tc: np.ndarray      # K
    pc: np.ndarray      # Pa
    omega: np.ndarray   # acentric factor
    molar_mass: np.ndarray  # kg / mol
    vc: np.ndarray      # m^3 / mol

    @property
    def n_components(self) -> int:
        return len(self.names)

    @classmethod
    def from_dict(cls, table: dict) -> "ComponentProperties":
        names = tuple(table.keys())
        tc = np.array([table[n]["Tc_K"] for n in names], dtype=float)
        pc = np.array([table[n]["Pc_Pa"] for n in names], dtype=float)
        omega = np.array([table[n]["omega"] for n in names], dtype=float)
        mm = np.array([table[n]["M_kg_per_mol"] for n in names], dtype=float)
        vc = np.array([table[n].get("Vc_m3_per_mol",
                                    PR_CRITICAL_Z * GAS_CONSTANT * table[n]["Tc_K"]
                                    / table[n]["Pc_Pa"])
                       for n in names], dtype=float)
        if np.any(tc <= 0) or np.any(pc <= 0) or np.any(mm <= 0) or np.any(vc <= 0):
            raise ValueError("component constants must be positive")
        return cls(names, tc, pc, omega, mm, vc)

    @classmethod
    def from_json(cls, path) -> "ComponentProperties":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "ComponentProperties":
        """CH4 / nC10 / CO2 constants shipped with the package."""
        text = resources.files("rnewton.data").joinpath("components.json").read_text()
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Volume balance


def water_volume(n_w, molar_volume: float = WATER_MOLAR_VOLUME):
    """Volume of ``n_w`` moles of incompressible water."""
    return np.asarray(n_w, dtype=float) * molar_volume


@dataclass(frozen=True)
class PhaseState:
    """Moles and geometry of one grid cell in the no-gas regime."""

    n_oil: np.ndarray      # moles per component in the oil phase
    n_water: float
    temperature: float
    volume: float          # total cell volume, m^3
    rock_volume: float     # m^3

    def __post_init__(self):
        object.__setattr__(self, "n_oil", np.asarray(self.n_oil, dtype=float))
        if np.any(self.n_oil < 0) or self.n_water < 0:
            raise ValueError("mole counts must be nonnegative")
        if not self.volume > self.rock_volume >= 0:
            raise ValueError("need volume > rock_volume >= 0")


def oil_molar_volume_from_balance(state: PhaseState,
                                  water_molar_volume: float = WATER_MOLAR_VOLUME) -> float:
    """Isolate the oil molar volume from V^w + V^o + V^r = V."""
    n_total = float(np.sum(state.n_oil))
    if n_total <= 0:
        raise InfeasibleStateError("no oil moles in cell")
    v_oil = state.volume - water_volume(state.n_water, water_molar_volume) - state.rock_volume
    if v_oil <= 0:
        raise InfeasibleStateError(f"nonpositive oil volume {v_oil:.3e} m^3")
    return float(v_oil) / n_total


# ---------------------------------------------------------------------------
# Peng-Robinson equation of state


def pr_pure_coefficients(props: ComponentProperties,
                         temperature: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-component attraction a_i(T) and covolume b_i."""
    kappa = 0.37464 + 1.54226 * props.omega - 0.26992 * props.omega ** 2
    alpha = (1.0 + kappa * (1.0 - np.sqrt(temperature / props.tc))) ** 2
    a_i = 0.45724 * GAS_CONSTANT ** 2 * props.tc ** 2 / props.pc * alpha
    b_i = 0.07780 * GAS_CONSTANT * props.tc / props.pc
    return a_i, b_i


def _normalized(composition) -> np.ndarray:
    y = np.asarray(composition, dtype=float)
    total = np.sum(y, axis=-1, keepdims=True)
    if np.any(total <= 0):
        raise InfeasibleStateError("composition does not sum to a positive total")
    return y / total


def pr_mixture_coefficients(y: np.ndarray, a_i: np.ndarray,
                            b_i: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Van der Waals one-fluid mixing with zero binary interaction:
    a_m = (sum_i y_i sqrt(a_i))**2, b_m = sum_i y_i b_i."""
    sqrt_a = np.sqrt(a_i)
    s = y @ sqrt_a
    return s * s, y @ b_i


def peng_robinson_pressure(molar_volume, temperature: float, composition,
                           props: ComponentProperties):
    """P = RT/(v - b_m) - a_m / ((v + eps b_m)(v + sigma b_m)).

    ``composition`` may be mole numbers or fractions; it is normalized.
    Fails when the molar volume does not exceed the mixture covolume.
    """
    v = np.asarray(molar_volume, dtype=float)
    y = _normalized(composition)
    a_i, b_i = pr_pure_coefficients(props, temperature)
    a_m, b_m = pr_mixture_coefficients(y, a_i, b_i)
    if np.any(v <= b_m):
        raise InfeasibleStateError("molar volume at or below the mixture covolume")
    rt = GAS_CONSTANT * temperature
    return rt / (v - b_m) - a_m / ((v + PR_EPSILON * b_m) * (v + PR_SIGMA * b_m))


def peng_robinson_pressure_derivatives(molar_volume, temperature: float, y,
                                       props: ComponentProperties):
    """Pressure plus dP/dv and dP/dy_i (``y`` must already be mole fractions)."""
    v = np.asarray(molar_volume, dtype=float)
    y = np.asarray(y, dtype=float)
    a_i, b_i = pr_pure_coefficients(props, temperature)
    sqrt_a = np.sqrt(a_i)
    s = y @ sqrt_a
    a_m = s * s
    b_m = y @ b_i
    if np.any(v <= b_m):
        raise InfeasibleStateError("molar volume at or below the mixture covolume")
    rt = GAS_CONSTANT * temperature

    u1 = v + PR_EPSILON * b_m
    u2 = v + PR_SIGMA * b_m
    denom = u1 * u2
    p = rt / (v - b_m) - a_m / denom

    dp_dv = -rt / (v - b_m) ** 2 + a_m * (u1 + u2) / denom ** 2
    dp_da = -1.0 / denom
    dp_db = rt / (v - b_m) ** 2 + a_m * (PR_EPSILON * u2 + PR_SIGMA * u1) / denom ** 2

    da_dy = 2.0 * s[..., None] * sqrt_a      # (..., nc)
    dp_dy = dp_da[..., None] * da_dy + dp_db[..., None] * b_i
    return p, dp_dv, dp_dy


def peng_robinson_molar_volume(pressure: float, temperature: float, composition,
                               props: ComponentProperties, branch: str = "liquid") -> float:
    """Molar volume solving the PR cubic at (P, T, y).

    ``branch="liquid"`` selects the smallest real root above the covolume,
    ``branch="vapor"`` the largest; a single-root (supercritical) state
    returns that root for either branch.
    """
    y = _normalized(composition)
    a_i, b_i = pr_pure_coefficients(props, temperature)
    a_m, b_m = pr_mixture_coefficients(y, a_i, b_i)
    rt = GAS_CONSTANT * temperature
    big_a = a_m * pressure / rt ** 2
    big_b = b_m * pressure / rt
    coeffs = [1.0,
              -(1.0 - big_b),
              big_a - 3.0 * big_b ** 2 - 2.0 * big_b,
              -(big_a * big_b - big_b ** 2 - big_b ** 3)]
    roots = np.roots(coeffs)
    z = np.sort(roots[np.abs(roots.imag) < 1e-10 * max(1.0, np.abs(roots).max())].real)
    z = z[z > big_b]
    if z.size == 0:
        raise InfeasibleStateError(
            f"no physical PR root at P={pressure:.3e} Pa, T={temperature} K")
    return float((z[0] if branch == "liquid" else z[-1]) * rt / pressure)


# ---------------------------------------------------------------------------
# Corey relative permeabilities


@dataclass(frozen=True)
class CoreyParams:
    s_wr: float = 0.1       # residual water saturation
    s_or: float = 0.1       # residual oil saturation
    exp_water: float = 2.0
    exp_oil: float = 2.0

    def __post_init__(self):
        if not 0 <= self.s_wr < 1 or not 0 <= self.s_or < 1:
            raise ValueError("residual saturations must be in [0, 1)")
        if self.s_wr + self.s_or >= 1:
            raise ValueError("s_wr + s_or must be < 1")


def corey_relative_permeability(s_w, params: CoreyParams = CoreyParams()):
    """(k_r^w, k_r^o) from the effective saturation, clamped to [0, 1]."""
    s_w = np.asarray(s_w, dtype=float)
    s_e = np.clip((s_w - params.s_wr) / (1.0 - params.s_wr - params.s_or), 0.0, 1.0)
    return s_e ** params.exp_water, (1.0 - s_e) ** params.exp_oil


def corey_relative_permeability_derivatives(s_w, params: CoreyParams = CoreyParams()):
    """(k_r^w, k_r^o, dk_r^w/dS_w, dk_r^o/dS_w); derivative zero where clamped."""
    s_w = np.asarray(s_w, dtype=float)
    scale = 1.0 / (1.0 - params.s_wr - params.s_or)
    raw = (s_w - params.s_wr) * scale
    s_e = np.clip(raw, 0.0, 1.0)
    interior = (raw > 0.0) & (raw < 1.0)
    krw = s_e ** params.exp_water
    kro = (1.0 - s_e) ** params.exp_oil
    dkrw = np.where(interior, params.exp_water * s_e ** (params.exp_water - 1.0) * scale, 0.0)
    dkro = np.where(interior, -params.exp_oil * (1.0 - s_e) ** (params.exp_oil - 1.0) * scale, 0.0)
    return krw, kro, dkrw, dkro


# ---------------------------------------------------------------------------
# Oil viscosity (Lohrenz-Bray-Clark)


def _lbc_reducing_factor(tc, molar_mass_g, pc_atm):
    """xi = Tc^(1/6) M^(-1/2) Pc^(-2/3) in cP-g-K-atm units."""
    return tc ** (1.0 / 6.0) / (np.sqrt(molar_mass_g) * pc_atm ** (2.0 / 3.0))


def dilute_gas_viscosity(props: ComponentProperties, temperature: float) -> np.ndarray:
    """Stiel-Thodos pure-component low-pressure viscosities (cP)."""
    xi = _lbc_reducing_factor(props.tc, props.molar_mass * 1e3,
                              props.pc / STANDARD_ATMOSPHERE)
    tr = temperature / props.tc
    return np.where(tr <= 1.5,
                    34e-5 * tr ** 0.94 / xi,
                    17.78e-5 * (4.58 * tr - 1.67) ** 0.625 / xi)


def oil_viscosity(composition, temperature: float, molar_density,
                  props: ComponentProperties, *, model: str = "lbc",
                  constant_value: float = 5e-4):
    """Oil viscosity in Pa s.

    ``model="lbc"`` evaluates the Lohrenz-Bray-Clark correlation at the
    given molar density (mol/m^3); ``model="constant"`` returns
    ``constant_value`` regardless of the inputs.
    """
    if model == "constant":
        shape = np.broadcast_shapes(np.shape(molar_density),
                                    np.shape(composition)[:-1])
        return np.broadcast_to(np.float64(constant_value), shape).copy() if shape \
            else float(constant_value)
    if model != "lbc":
        raise ValueError(f"unknown viscosity model {model!r}")
    mu, _, _ = oil_viscosity_derivatives(_normalized(composition), temperature,
                                         molar_density, props)
    return mu


def oil_viscosity_derivatives(y, temperature: float, molar_density,
                              props: ComponentProperties):
    """LBC viscosity (Pa s) with dmu/drho and dmu/dy_i.

    ``y`` must be mole fractions.  The correlation works in cP-g-K-atm
    units internally: mu = mu* + ((sum_p c_p rho_r^p)^4 - 1e-4) / xi_m with
    rho_r = rho * sum_i y_i Vc_i.
    """
    y = np.asarray(y, dtype=float)
    rho = np.asarray(molar_density, dtype=float)
    if np.any(rho < 0):
        raise InfeasibleStateError("negative molar density in viscosity correlation")

    mg = props.molar_mass * 1e3
    pc_atm = props.pc / STANDARD_ATMOSPHERE
    eta = dilute_gas_viscosity(props, temperature)

    sqrt_m = np.sqrt(mg)
    num = y @ (eta * sqrt_m)
    den = y @ sqrt_m
    mu_star = num / den
    dmu_star_dy = (eta * sqrt_m - mu_star[..., None] * sqrt_m) / den[..., None]

    tc_m = y @ props.tc
    pc_m = y @ pc_atm
    m_m = y @ mg
    xi = _lbc_reducing_factor(tc_m, m_m, pc_m)
    dxi_dy = xi[..., None] * (props.tc / (6.0 * tc_m[..., None])
                              - mg / (2.0 * m_m[..., None])
                              - 2.0 * pc_atm / (3.0 * pc_m[..., None]))

    v_cm = y @ props.vc
    rho_r = rho * v_cm
    if np.any(rho_r < 0):
        raise InfeasibleStateError("negative reduced density in viscosity correlation")
    powers = np.arange(len(LBC_COEFFS))
    rr = rho_r[..., None] ** powers
    poly = rr @ np.asarray(LBC_COEFFS)
    dpoly = (rho_r[..., None] ** np.maximum(powers - 1, 0)
             @ (powers * np.asarray(LBC_COEFFS)))

    correction = (poly ** 4 - 1e-4) / xi
    mu_cp = mu_star + correction

    dmu_drho_cp = 4.0 * poly ** 3 * dpoly * v_cm / xi
    dmu_dy_cp = (dmu_star_dy
                 + 4.0 * poly[..., None] ** 3 * dpoly[..., None]
                 * rho[..., None] * props.vc / xi[..., None]
                 - correction[..., None] / xi[..., None] * dxi_dy)
    return mu_cp * 1e-3, dmu_drho_cp * 1e-3, dmu_dy_cp * 1e-3
