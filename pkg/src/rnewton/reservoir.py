"""Finite-volume model of water/oil compositional flow on a 2D Cartesian grid.

Per cell the state holds moles of water and of each oil component (CH4,
nC10, CO2), flattened cell-major into blocks of 4.  Fluxes use a two-point
flux approximation with geometric transmissibilities, phase potentials
including gravity, and donor-cell (upwind) mobilities and mole fractions.
Boundaries are no-flow; injection wells add a constant molar source.

The Jacobian is assembled analytically with a fixed 5-point block sparsity
pattern (4x4 diagonal blocks plus 4x4 neighbor blocks).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.ndimage as ndi
import scipy.sparse as sp

from . import thermo
from .driver import TimeGrid
from .errors import InfeasibleStateError
from .ode import OdeSystem

N_OIL_COMPONENTS = 3
BLOCK = 1 + N_OIL_COMPONENTS   # n_w, n_1..n_3
SECONDS_PER_DAY = 86400.0


# ---------------------------------------------------------------------------
# Grid


@dataclass(frozen=True)
class CartesianGrid:
    """Single-layer grid of ``ny`` rows by ``nx`` columns.

    Cell id is row-major: ``id = iy * nx + ix``.  Per-cell arrays (porosity,
    permeability, depth) follow that order.  Permeability is isotropic
    (scalar per cell).
    """

    nx: int
    ny: int
    dx: float
    dy: float
    dz: float
    porosity: np.ndarray      # (n_cells,), in (0, 1]
    permeability: np.ndarray  # (n_cells,), m^2
    depth: np.ndarray = None  # (n_cells,), m; defaults to a flat layer

    def __post_init__(self):
        n = self.nx * self.ny
        por = np.asarray(self.porosity, dtype=float)
        perm = np.asarray(self.permeability, dtype=float)
        depth = np.zeros(n) if self.depth is None else np.asarray(self.depth, dtype=float)
        if por.shape != (n,) or perm.shape != (n,) or depth.shape != (n,):
            raise ValueError(f"per-cell fields must have shape ({n},)")
        if np.any(por <= 0) or np.any(por > 1):
            raise ValueError("porosity must lie in (0, 1]")
        if np.any(perm <= 0):
            raise ValueError("permeability must be positive")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("cell dimensions must be positive")
        object.__setattr__(self, "porosity", por)
        object.__setattr__(self, "permeability", perm)
        object.__setattr__(self, "depth", depth)

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dy * self.dz

    def cell_id(self, ix: int, iy: int) -> int:
        ix = ix % self.nx
        iy = iy % self.ny
        return iy * self.nx + ix

    def cell_center(self, i: int) -> np.ndarray:
        iy, ix = divmod(i, self.nx)
        return np.array([(ix + 0.5) * self.dx, (iy + 0.5) * self.dy])

    def neighbors(self, i: int) -> list[int]:
        iy, ix = divmod(i, self.nx)
        out = []
        if ix > 0:
            out.append(i - 1)
        if ix < self.nx - 1:
            out.append(i + 1)
        if iy > 0:
            out.append(i - self.nx)
        if iy < self.ny - 1:
            out.append(i + self.nx)
        return out

    def interior_faces(self) -> tuple[np.ndarray, np.ndarray]:
        """(i, j) cell-id pairs of all interior faces, i < j."""
        ids = np.arange(self.n_cells).reshape(self.ny, self.nx)
        ix_pairs = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
        iy_pairs = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
        pairs = np.vstack([ix_pairs, iy_pairs])
        return pairs[:, 0], pairs[:, 1]


def geometric_transmissibility(grid: CartesianGrid, i: int, j: int) -> float:
    """Gamma_ij = A_ij / (1/Ghat_ij + 1/Ghat_ji) with
    Ghat_ij = (K_i (c_ij - c_i) / |c_ij - c_i|^2) . n_ij.

    Symmetric in (i, j); reduces to the harmonic-mean form K_h A / d on
    axis-aligned grids.  Units m^3.
    """
    if j not in grid.neighbors(i):
        raise ValueError(f"cells {i} and {j} are not adjacent")
    c_i = grid.cell_center(i)
    c_j = grid.cell_center(j)
    c_face = 0.5 * (c_i + c_j)
    normal = (c_j - c_i) / np.linalg.norm(c_j - c_i)
    area = grid.dy * grid.dz if abs(normal[0]) > 0.5 else grid.dx * grid.dz

    def ghat(cell, sign):
        d = c_face - grid.cell_center(cell)
        return float(grid.permeability[cell] * np.dot(d, sign * normal) / np.dot(d, d))

    g_ij = ghat(i, +1.0)
    g_ji = ghat(j, -1.0)
    return area / (1.0 / g_ij + 1.0 / g_ji)


def potential_difference(p_i, p_j, rho_i, rho_j, z_i, z_j,
                         gravity: float = thermo.GRAVITY):
    """Phase potential drop (P_j - P_i) - mean mass density * g * (z_j - z_i)."""
    return (p_j - p_i) - 0.5 * (rho_i + rho_j) * gravity * (z_j - z_i)


def upwinded_mobility(dphi, h_i, h_j):
    """Donor-cell mobility: cell i when the potential difference is negative,
    cell j otherwise (the >= 0 branch takes j)."""
    return np.where(np.asarray(dphi) < 0, h_i, h_j)


# ---------------------------------------------------------------------------
# Fluid and wells


@dataclass(frozen=True)
class FluidParams:
    components: thermo.ComponentProperties = field(default_factory=thermo.ComponentProperties.default)
    temperature: float = thermo.DEFAULT_TEMPERATURE
    water_molar_volume: float = thermo.WATER_MOLAR_VOLUME
    water_viscosity: float = thermo.WATER_VISCOSITY
    water_mass_density: float = thermo.WATER_MASS_DENSITY
    corey: thermo.CoreyParams = field(default_factory=thermo.CoreyParams)
    viscosity_model: str = "lbc"          # "lbc" | "constant"
    oil_viscosity_constant: float = 5e-4  # Pa s, used by the constant model

    def __post_init__(self):
        if self.viscosity_model not in ("lbc", "constant"):
            raise ValueError(f"unknown viscosity model {self.viscosity_model!r}")
        if self.components.n_components != N_OIL_COMPONENTS:
            raise ValueError(f"expected {N_OIL_COMPONENTS} oil components")


@dataclass(frozen=True)
class Well:
    cell: int
    rate_m3_per_day: float
    composition: np.ndarray   # injected mole fractions, sum to 1

    def __post_init__(self):
        comp = np.asarray(self.composition, dtype=float)
        if self.rate_m3_per_day < 0:
            raise ValueError("injection rates must be nonnegative")
        if comp.shape != (N_OIL_COMPONENTS,) or abs(comp.sum() - 1.0) > 1e-10:
            raise ValueError("well composition must be mole fractions summing to 1")
        object.__setattr__(self, "composition", comp)


@dataclass(frozen=True)
class WellSchedule:
    wells: tuple[Well, ...] = ()

    def __iter__(self):
        return iter(self.wells)

    def __len__(self):
        return len(self.wells)


def molar_injection_rate(well: Well, fluid: FluidParams,
                         reference_pressure: float) -> float:
    """Volumetric rate converted to mol/s at the injected composition's molar
    volume at the reference pressure and the model temperature."""
    if well.rate_m3_per_day == 0.0:
        return 0.0
    v_ref = thermo.peng_robinson_molar_volume(
        reference_pressure, fluid.temperature, well.composition,
        fluid.components, branch="liquid")
    return well.rate_m3_per_day / SECONDS_PER_DAY / v_ref


# ---------------------------------------------------------------------------
# Fixed-pattern sparse assembly


class _FixedPattern:
    """CSC assembly from a fixed COO pattern with duplicate coordinates.

    The lexicographic order, the duplicate groups and the CSC structure are
    computed once; each assembly only permutes the data vector and sums the
    groups, which keeps the per-iteration cost linear and deterministic.
    """

    def __init__(self, rows: np.ndarray, cols: np.ndarray, n: int):
        self.n = n
        if rows.size == 0:
            self._empty = True
            self.has_full_diagonal = False
            return
        self._empty = False
        order = np.lexsort((rows, cols))
        r_sorted = rows[order]
        c_sorted = cols[order]
        new_group = np.empty(order.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = (r_sorted[1:] != r_sorted[:-1]) | (c_sorted[1:] != c_sorted[:-1])
        self.order = order.astype(np.intp)
        self.group_starts = np.flatnonzero(new_group)
        self.indices = r_sorted[self.group_starts].astype(np.int32)
        self.indptr = np.searchsorted(c_sorted[self.group_starts],
                                      np.arange(n + 1)).astype(np.int32)
        u_rows = r_sorted[self.group_starts]
        u_cols = c_sorted[self.group_starts]
        self.diagonal_slots = np.flatnonzero(u_rows == u_cols)
        self.has_full_diagonal = self.diagonal_slots.size == n

    @property
    def nnz(self) -> int:
        return 0 if self._empty else self.group_starts.size

    def assemble(self, data: np.ndarray, scratch: np.ndarray | None = None) -> sp.csc_matrix:
        """Sum the COO-ordered contributions into a fresh CSC matrix.

        ``scratch`` (length = pattern size) avoids one allocation; the
        returned matrix never aliases it.
        """
        if self._empty:
            return sp.csc_matrix((self.n, self.n))
        if scratch is None:
            scratch = np.take(data, self.order)
        else:
            np.take(data, self.order, out=scratch)
        values = np.add.reduceat(scratch, self.group_starts)
        return sp.csc_matrix((values, self.indices, self.indptr),
                             shape=(self.n, self.n))

    def assemble_shifted(self, data: np.ndarray, scale: float,
                         scratch: np.ndarray | None = None) -> sp.csc_matrix:
        """``scale * (summed contributions) + I`` in one pass.

        Requires the pattern to contain the whole diagonal.
        """
        if scratch is None:
            scratch = np.take(data, self.order)
        else:
            np.take(data, self.order, out=scratch)
        values = np.add.reduceat(scratch, self.group_starts)
        values *= scale
        values[self.diagonal_slots] += 1.0
        return sp.csc_matrix((values, self.indices, self.indptr),
                             shape=(self.n, self.n))


# ---------------------------------------------------------------------------
# Per-cell thermodynamic properties with derivatives


@dataclass
class _CellProps:
    pressure: np.ndarray       # (n_c,)
    mob_water: np.ndarray      # molar mobility rho_w k_rw / mu_w
    mob_oil: np.ndarray
    mass_density_oil: np.ndarray
    y: np.ndarray              # (n_c, 3) oil mole fractions
    # derivatives w.r.t. the cell state (n_w, n_1, n_2, n_3)
    d_pressure: np.ndarray = None      # (n_c, 4)
    d_mob_water: np.ndarray = None
    d_mob_oil: np.ndarray = None
    d_mass_density_oil: np.ndarray = None
    d_y: np.ndarray = None             # (n_c, 3, 4)


class ReservoirSystem(OdeSystem):
    """The discretized flow model exposed as an ODE system.

    Evaluators are pure functions of the state; wells and inputs are fixed
    at construction (the paper scenario has constant injection), so the
    ``u``/``d`` arguments are accepted and ignored.
    """

    def __init__(self, grid: CartesianGrid, fluid: FluidParams,
                 schedule: WellSchedule,
                 injection_reference_pressure: float):
        self.grid = grid
        self.fluid = fluid
        self.schedule = schedule
        self.injection_reference_pressure = injection_reference_pressure
        self.n_x = BLOCK * grid.n_cells

        self.pore_volume = grid.porosity * grid.cell_volume
        self.rock_volume = (1.0 - grid.porosity) * grid.cell_volume

        face_i, face_j = grid.interior_faces()
        self.face_i = face_i
        self.face_j = face_j
        self.face_gamma = np.array(
            [geometric_transmissibility(grid, i, j) for i, j in zip(face_i, face_j)])
        self.face_dz = grid.depth[face_j] - grid.depth[face_i]

        self.well_cells = np.array([w.cell for w in schedule], dtype=int)
        if np.any(self.well_cells >= grid.n_cells) or np.any(self.well_cells < 0):
            raise ValueError("well cell index out of range")
        self.well_molar_rates = np.array(
            [molar_injection_rate(w, fluid, injection_reference_pressure)
             for w in schedule])
        self.well_compositions = np.array([w.composition for w in schedule]) \
            if len(schedule) else np.zeros((0, N_OIL_COMPONENTS))

        self._pattern = self._build_pattern()
        self._gamma_col = self.face_gamma[:, None]
        self._half_g_dz = 0.5 * thermo.GRAVITY * self.face_dz[:, None]
        # Jacobian fill buffers are per-thread so instances can be shared
        # across threads (workspace is never part of the returned matrix).
        self._tls = threading.local()

    # -- pattern ------------------------------------------------------------

    def _face_entry_coords(self):
        """Rows/cols of every per-face Jacobian contribution, fixed order.

        Per face there are 8 blocks of shape (rows: water + 3 components for
        both cells) x (4 state variables of either cell).
        """
        i4 = BLOCK * self.face_i
        j4 = BLOCK * self.face_j
        var = np.arange(BLOCK)
        comp_rows = 1 + np.arange(N_OIL_COMPONENTS)

        groups = []
        for row_base, col_base in ((i4, i4), (j4, i4), (i4, j4), (j4, j4)):
            # water row of the block
            groups.append((np.repeat(row_base, BLOCK),
                           (col_base[:, None] + var).ravel()))
        for row_base, col_base in ((i4, i4), (j4, i4), (i4, j4), (j4, j4)):
            rows = np.broadcast_to(row_base[:, None, None] + comp_rows[None, :, None],
                                   (row_base.size, N_OIL_COMPONENTS, BLOCK))
            cols = np.broadcast_to(col_base[:, None, None] + var[None, None, :],
                                   (row_base.size, N_OIL_COMPONENTS, BLOCK))
            groups.append((rows.ravel(), cols.ravel()))
        rows = np.concatenate([g[0] for g in groups])
        cols = np.concatenate([g[1] for g in groups])
        return rows, cols

    def _build_pattern(self) -> _FixedPattern:
        rows, cols = self._face_entry_coords()
        return _FixedPattern(rows.astype(np.int64), cols.astype(np.int64), self.n_x)

    # -- thermodynamics -----------------------------------------------------

    def _cell_properties(self, state: np.ndarray, derivatives: bool) -> _CellProps:
        grid = self.grid
        fl = self.fluid
        n_c = grid.n_cells
        cells = state.reshape(n_c, BLOCK)
        n_w = cells[:, 0]
        n_oil = cells[:, 1:]
        n_total = n_oil.sum(axis=1)
        if np.any(n_total <= 0):
            raise InfeasibleStateError("cell without oil moles")

        oil_volume = self.pore_volume - n_w * fl.water_molar_volume
        if np.any(oil_volume <= 0):
            raise InfeasibleStateError("nonpositive oil volume in a cell")
        v_o = oil_volume / n_total
        y = n_oil / n_total[:, None]
        s_w = n_w * fl.water_molar_volume / self.pore_volume

        pressure, dp_dv, dp_dy = thermo.peng_robinson_pressure_derivatives(
            v_o, fl.temperature, y, fl.components)

        rho_o = 1.0 / v_o
        mix_mass = y @ fl.components.molar_mass
        mass_density_oil = mix_mass / v_o

        krw, kro, dkrw_dsw, dkro_dsw = thermo.corey_relative_permeability_derivatives(
            s_w, fl.corey)

        if fl.viscosity_model == "constant":
            mu_o = np.full(n_c, fl.oil_viscosity_constant)
            dmu_drho = np.zeros(n_c)
            dmu_dy = np.zeros((n_c, N_OIL_COMPONENTS))
        else:
            mu_o, dmu_drho, dmu_dy = thermo.oil_viscosity_derivatives(
                y, fl.temperature, rho_o, fl.components)

        rho_w_molar = 1.0 / fl.water_molar_volume
        mob_water = rho_w_molar * krw / fl.water_viscosity
        mob_oil = rho_o * kro / mu_o

        props = _CellProps(pressure, mob_water, mob_oil, mass_density_oil, y)
        if not derivatives:
            return props

        # Chain rule w.r.t. the cell state (n_w, n_1, n_2, n_3).
        dv = np.empty((n_c, BLOCK))
        dv[:, 0] = -fl.water_molar_volume / n_total
        dv[:, 1:] = (-v_o / n_total)[:, None]

        dy = np.zeros((n_c, N_OIL_COMPONENTS, BLOCK))
        eye = np.eye(N_OIL_COMPONENTS)
        dy[:, :, 1:] = (eye[None, :, :] - y[:, :, None]) / n_total[:, None, None]

        ds_w = np.zeros((n_c, BLOCK))
        ds_w[:, 0] = fl.water_molar_volume / self.pore_volume

        d_pressure = dp_dv[:, None] * dv + np.einsum("ck,ckv->cv", dp_dy, dy)

        drho_o = -(rho_o / v_o)[:, None] * dv
        dmix_mass = np.einsum("k,ckv->cv", fl.components.molar_mass, dy)
        d_mass_density_oil = dmix_mass / v_o[:, None] - (mix_mass / v_o ** 2)[:, None] * dv

        d_mob_water = (rho_w_molar / fl.water_viscosity) * dkrw_dsw[:, None] * ds_w

        dmu = dmu_drho[:, None] * drho_o + np.einsum("ck,ckv->cv", dmu_dy, dy)
        d_mob_oil = (drho_o * kro[:, None]
                     + rho_o[:, None] * dkro_dsw[:, None] * ds_w
                     - mob_oil[:, None] * dmu) / mu_o[:, None]

        props.d_pressure = d_pressure
        props.d_mob_water = d_mob_water
        props.d_mob_oil = d_mob_oil
        props.d_mass_density_oil = d_mass_density_oil
        props.d_y = dy
        return props

    # -- flux terms -----------------------------------------------------------

    def _face_terms(self, props: _CellProps):
        i, j = self.face_i, self.face_j
        p = props.pressure
        dphi_w = (p[j] - p[i]) - self.fluid.water_mass_density * thermo.GRAVITY * self.face_dz
        rho_bar = 0.5 * (props.mass_density_oil[i] + props.mass_density_oil[j])
        dphi_o = (p[j] - p[i]) - rho_bar * thermo.GRAVITY * self.face_dz
        donor_w_is_i = dphi_w < 0
        donor_o_is_i = dphi_o < 0
        mob_w = np.where(donor_w_is_i, props.mob_water[i], props.mob_water[j])
        mob_o = np.where(donor_o_is_i, props.mob_oil[i], props.mob_oil[j])
        y_up = np.where(donor_o_is_i[:, None], props.y[i], props.y[j])
        return dphi_w, dphi_o, donor_w_is_i, donor_o_is_i, mob_w, mob_o, y_up

    def rhs(self, x, u=None, d=None) -> np.ndarray:
        props = self._cell_properties(np.asarray(x, dtype=float), derivatives=False)
        dphi_w, dphi_o, _, _, mob_w, mob_o, y_up = self._face_terms(props)
        i, j = self.face_i, self.face_j

        flux_w = self.face_gamma * mob_w * dphi_w          # mol/s into cell i
        flux_o = self.face_gamma * mob_o * dphi_o
        flux_k = y_up * flux_o[:, None]

        out = np.zeros((self.grid.n_cells, BLOCK))
        np.add.at(out[:, 0], i, flux_w)
        np.add.at(out[:, 0], j, -flux_w)
        np.add.at(out[:, 1:], i, flux_k)
        np.add.at(out[:, 1:], j, -flux_k)
        if self.well_cells.size:
            np.add.at(out[:, 1:], self.well_cells,
                      self.well_compositions * self.well_molar_rates[:, None])
        return out.ravel()

    def _workspace(self) -> dict:
        ws = getattr(self._tls, "ws", None)
        if ws is None:
            n_f = self.face_i.size
            nw = n_f * BLOCK
            nk = n_f * N_OIL_COMPONENTS * BLOCK
            data = np.empty(4 * nw + 4 * nk)
            views, off = [], 0
            for size, shape in 4 * [(nw, (n_f, BLOCK))] + 4 * [(nk, (n_f, N_OIL_COMPONENTS, BLOCK))]:
                views.append(data[off:off + size].reshape(shape))
                off += size
            ws = {"data": data, "views": views, "scratch": np.empty(data.size)}
            self._tls.ws = ws
        return ws

    def jacobian(self, x, u=None, d=None) -> sp.csc_matrix:
        ws = self._fill_jacobian_data(np.asarray(x, dtype=float))
        return self._pattern.assemble(ws["data"], ws["scratch"])

    def residual_jacobian(self, x, u, d, dt: float) -> sp.csc_matrix | None:
        """Fast path for ``I - df/dx * dt``: one fused assembly pass.

        Returns None when the flux pattern lacks diagonal entries (e.g. a
        single isolated cell), in which case the caller uses the generic
        two-matrix route.
        """
        if not self._pattern.has_full_diagonal:
            return None
        ws = self._fill_jacobian_data(np.asarray(x, dtype=float))
        return self._pattern.assemble_shifted(ws["data"], -dt, ws["scratch"])

    def _fill_jacobian_data(self, x: np.ndarray) -> dict:
        props = self._cell_properties(x, derivatives=True)
        dphi_w, dphi_o, donor_w_is_i, donor_o_is_i, mob_w, mob_o, y_up = \
            self._face_terms(props)
        i, j = self.face_i, self.face_j
        g = self._gamma_col
        ws = self._workspace()
        w_di, w_di_neg, w_dj, w_dj_neg, k_di, k_di_neg, k_dj, k_dj_neg = ws["views"]

        dp_i = props.d_pressure[i]
        dp_j = props.d_pressure[j]
        w_i = donor_w_is_i[:, None]
        o_i = donor_o_is_i[:, None]

        # water flux derivative blocks; potential part uses ddphi_w = +-dp
        np.multiply(np.where(w_i, props.d_mob_water[i], 0.0), dphi_w[:, None], out=w_di)
        w_di -= mob_w[:, None] * dp_i
        w_di *= g
        np.negative(w_di, out=w_di_neg)
        np.multiply(np.where(w_i, 0.0, props.d_mob_water[j]), dphi_w[:, None], out=w_dj)
        w_dj += mob_w[:, None] * dp_j
        w_dj *= g
        np.negative(w_dj, out=w_dj_neg)

        # oil-phase flux derivatives including the gravity density term
        ddphi_o_di = -dp_i - self._half_g_dz * props.d_mass_density_oil[i]
        ddphi_o_dj = dp_j - self._half_g_dz * props.d_mass_density_oil[j]
        dflux_o_di = g * (np.where(o_i, props.d_mob_oil[i], 0.0) * dphi_o[:, None]
                          + mob_o[:, None] * ddphi_o_di)
        dflux_o_dj = g * (np.where(o_i, 0.0, props.d_mob_oil[j]) * dphi_o[:, None]
                          + mob_o[:, None] * ddphi_o_dj)

        # component fluxes f_k = y_up * f_o with donor-cell mole fractions
        flux_o = (self.face_gamma * mob_o * dphi_o)[:, None, None]
        o_i3 = donor_o_is_i[:, None, None]
        np.multiply(y_up[:, :, None], dflux_o_di[:, None, :], out=k_di)
        k_di += np.where(o_i3, props.d_y[i], 0.0) * flux_o
        np.negative(k_di, out=k_di_neg)
        np.multiply(y_up[:, :, None], dflux_o_dj[:, None, :], out=k_dj)
        k_dj += np.where(o_i3, 0.0, props.d_y[j]) * flux_o
        np.negative(k_dj, out=k_dj_neg)

        # ws["data"] now holds every contribution in _face_entry_coords order
        return ws


# ---------------------------------------------------------------------------
# Initial condition


def initial_state(grid: CartesianGrid, fluid: FluidParams, pressure: float,
                  water_saturation: float, oil_composition) -> np.ndarray:
    """Uniform-pressure initial state from saturation and oil composition.

    Water moles come from the pore volume and saturation; oil moles from the
    remaining pore volume at the PR liquid molar volume for (P, T, y).
    """
    if not 0.0 <= water_saturation < 1.0:
        raise ValueError("water saturation must lie in [0, 1)")
    y = np.asarray(oil_composition, dtype=float)
    y = y / y.sum()
    v_o = thermo.peng_robinson_molar_volume(pressure, fluid.temperature, y,
                                            fluid.components, branch="liquid")
    pore = grid.porosity * grid.cell_volume
    n_w = water_saturation * pore / fluid.water_molar_volume
    n_oil_total = (1.0 - water_saturation) * pore / v_o
    state = np.empty((grid.n_cells, BLOCK))
    state[:, 0] = n_w
    state[:, 1:] = n_oil_total[:, None] * y[None, :]
    return state.ravel()


def cell_pressures(system: ReservoirSystem, x: np.ndarray) -> np.ndarray:
    """Per-cell pressures of a state (diagnostics/reporting)."""
    return system._cell_properties(np.asarray(x, dtype=float), derivatives=False).pressure


def water_saturations(system: ReservoirSystem, x: np.ndarray) -> np.ndarray:
    cells = np.asarray(x, dtype=float).reshape(system.grid.n_cells, BLOCK)
    return cells[:, 0] * system.fluid.water_molar_volume / system.pore_volume


# ---------------------------------------------------------------------------
# Synthetic fields


def synthetic_fields(rows: int, columns: int, *, seed: int,
                     mean_log10_permeability: float = -13.0,
                     sigma_log10_permeability: float = 0.5,
                     porosity_mean: float = 0.2,
                     porosity_sigma: float = 0.05,
                     correlation_cells: int = 3,
                     porosity_bounds: tuple[float, float] = (0.05, 0.35)):
    """Seeded log-normal permeability and clipped-normal porosity fields.

    White noise is smoothed by a moving average of ``correlation_cells``
    cells and re-standardized, so the marginal variance matches the
    requested sigma.  Returns (porosity, permeability) flattened row-major.
    """
    rng = np.random.default_rng(seed)

    def correlated_noise():
        z = rng.standard_normal((rows, columns))
        if correlation_cells > 1:
            z = ndi.uniform_filter(z, size=correlation_cells, mode="reflect")
            std = z.std()
            # single-cell/constant fields have no variance to rescale
            z = (z - z.mean()) / std if std > 0 else np.zeros_like(z)
        return z

    perm = 10.0 ** (mean_log10_permeability
                    + sigma_log10_permeability * correlated_noise())
    por = np.clip(porosity_mean + porosity_sigma * correlated_noise(),
                  *porosity_bounds)
    return por.ravel(), perm.ravel()


# ---------------------------------------------------------------------------
# Scenario files


@dataclass
class ReservoirScenario:
    """Fully resolved simulation setup (grid, fluid, wells, schedule)."""

    grid: CartesianGrid
    fluid: FluidParams
    schedule: WellSchedule
    initial_pressure: float
    initial_water_saturation: float
    initial_oil_composition: np.ndarray
    time_grid: TimeGrid
    injection_reference_pressure: float | None = None
    tolerance: float | None = None          # None: dimension-scaled default
    max_iterations: int = 50

    def build_system(self) -> tuple[ReservoirSystem, np.ndarray]:
        ref_p = self.injection_reference_pressure
        if ref_p is None:
            ref_p = self.initial_pressure
        system = ReservoirSystem(self.grid, self.fluid, self.schedule, ref_p)
        x0 = initial_state(self.grid, self.fluid, self.initial_pressure,
                           self.initial_water_saturation,
                           self.initial_oil_composition)
        return system, x0


def _load_field_file(path: Path, rows: int) -> np.ndarray:
    """Flat row-major field values reshaped to (rows, columns)."""
    values = np.loadtxt(path, delimiter=",").ravel()
    if values.size % rows:
        raise ValueError(f"{path}: {values.size} values not divisible by {rows} rows")
    return values.reshape(rows, values.size // rows)


def load_scenario(source, *, columns: int | None = None,
                  field_columns: int | None = None,
                  seed: int | None = None,
                  base_dir: Path | None = None) -> ReservoirScenario:
    """Build a scenario from a JSON file or an equivalent dict.

    ``columns`` overrides the grid width by taking the left-most columns of
    the (possibly wider) field; ``field_columns`` sets the width at which a
    generated field is drawn before slicing, so that growing the grid
    includes a larger part of the same reservoir instead of redrawing it.
    ``seed`` overrides the generator seed.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        with open(path) as fh:
            cfg = json.load(fh)
        base_dir = path.parent if base_dir is None else base_dir
    else:
        cfg = source
        base_dir = Path(".") if base_dir is None else base_dir

    gcfg = cfg["grid"]
    rows = int(gcfg["rows"])
    n_cols = int(columns if columns is not None else gcfg["columns"])

    fields = gcfg.get("fields", {})
    if "porosity_csv" in fields:
        por2d = _load_field_file(base_dir / fields["porosity_csv"], rows)
        perm2d = _load_field_file(base_dir / fields["permeability_csv"], rows)
    else:
        gen = dict(fields.get("generator", {}))
        file_seed = int(gen.pop("seed", 0))
        gen_seed = seed if seed is not None else file_seed
        width = max(n_cols, field_columns or 0, int(gcfg["columns"]))
        por, perm = synthetic_fields(rows, width, seed=gen_seed, **gen)
        por2d = por.reshape(rows, width)
        perm2d = perm.reshape(rows, width)
    if por2d.shape[1] < n_cols:
        raise ValueError(f"field has {por2d.shape[1]} columns, need {n_cols}")

    depth = None
    if "depth_csv" in fields:
        depth = _load_field_file(base_dir / fields["depth_csv"], rows)[:, :n_cols].ravel()

    grid = CartesianGrid(nx=n_cols, ny=rows,
                         dx=float(gcfg.get("dx", 6.096)),
                         dy=float(gcfg.get("dy", 3.048)),
                         dz=float(gcfg.get("dz", 0.6096)),
                         porosity=por2d[:, :n_cols].ravel(),
                         permeability=perm2d[:, :n_cols].ravel(),
                         depth=depth)

    fcfg = cfg.get("fluid", {})
    components = thermo.ComponentProperties.default()
    if "components_json" in fcfg:
        components = thermo.ComponentProperties.from_json(base_dir / fcfg["components_json"])
    corey_cfg = fcfg.get("corey", {})
    fluid = FluidParams(
        components=components,
        temperature=float(fcfg.get("temperature_K", thermo.DEFAULT_TEMPERATURE)),
        water_molar_volume=float(fcfg.get("water_molar_volume_m3_per_mol",
                                          thermo.WATER_MOLAR_VOLUME)),
        water_viscosity=float(fcfg.get("water_viscosity_Pa_s", thermo.WATER_VISCOSITY)),
        water_mass_density=float(fcfg.get("water_mass_density_kg_per_m3",
                                          thermo.WATER_MASS_DENSITY)),
        corey=thermo.CoreyParams(
            s_wr=float(corey_cfg.get("s_wr", 0.1)),
            s_or=float(corey_cfg.get("s_or", 0.1)),
            exp_water=float(corey_cfg.get("exp_water", 2.0)),
            exp_oil=float(corey_cfg.get("exp_oil", 2.0))),
        viscosity_model=fcfg.get("viscosity_model", "lbc"),
        oil_viscosity_constant=float(fcfg.get("oil_viscosity_Pa_s", 5e-4)))

    wells = []
    for wcfg in cfg.get("wells", []):
        cell = wcfg["cell"]
        if isinstance(cell, (list, tuple)):
            cell = grid.cell_id(int(cell[0]), int(cell[1]))
        wells.append(Well(cell=int(cell),
                          rate_m3_per_day=float(wcfg["rate_m3_per_day"]),
                          composition=np.asarray(wcfg["composition"], dtype=float)))

    icfg = cfg["initial"]
    tcfg = cfg["time_grid"]
    if "spans_days" in tcfg:
        time_grid = TimeGrid.from_spans(tcfg["spans_days"], unit=SECONDS_PER_DAY)
    else:
        time_grid = TimeGrid(np.asarray(tcfg["dt_seconds"], dtype=float))

    scfg = cfg.get("solver", {})
    return ReservoirScenario(
        grid=grid,
        fluid=fluid,
        schedule=WellSchedule(tuple(wells)),
        initial_pressure=float(icfg["pressure_Pa"]),
        initial_water_saturation=float(icfg["water_saturation"]),
        initial_oil_composition=np.asarray(icfg["oil_composition"], dtype=float),
        time_grid=time_grid,
        injection_reference_pressure=cfg.get("injection_reference_pressure_Pa"),
        tolerance=scfg.get("tolerance"),
        max_iterations=int(scfg.get("max_iterations", 50)))
