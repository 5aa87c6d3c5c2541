import numpy as np
import pytest

from rnewton import reservoir as rv


def make_reservoir(rows=3, columns=4, *, seed=7, wells=True, homogeneous=False,
                   viscosity_model="lbc", depth=None, sigma=0.5, mean=-13.0,
                   reference_pressure=1.0e7):
    """Small reservoir system + feasible initial state for solver tests."""
    if homogeneous:
        porosity = np.full(rows * columns, 0.2)
        permeability = np.full(rows * columns, 1e-13)
    else:
        porosity, permeability = rv.synthetic_fields(
            rows, columns, seed=seed, sigma_log10_permeability=sigma,
            mean_log10_permeability=mean)
    grid = rv.CartesianGrid(nx=columns, ny=rows, dx=6.096, dy=3.048, dz=0.6096,
                            porosity=porosity, permeability=permeability,
                            depth=depth)
    fluid = rv.FluidParams(viscosity_model=viscosity_model)
    schedule = rv.WellSchedule(())
    if wells:
        co2 = np.array([0.001, 0.001, 0.998])
        schedule = rv.WellSchedule((
            rv.Well(grid.cell_id(0, 0), 0.11, co2),
            rv.Well(grid.cell_id(-1, -1), 0.11, co2),
        ))
    system = rv.ReservoirSystem(grid, fluid, schedule, reference_pressure)
    x0 = rv.initial_state(grid, fluid, reference_pressure, 0.2, [0.10, 0.85, 0.05])
    return system, x0


def perturbed_states(x0, count, seed, spread=0.05):
    """Random feasible states around a base state (multiplicative jitter)."""
    rng = np.random.default_rng(seed)
    return [x0 * rng.uniform(1.0 - spread, 1.0 + spread, size=x0.shape)
            for _ in range(count)]


def columnwise_relative_error(analytic, reference):
    """max over columns of ||a_col - r_col||_inf / ||r_col||_inf."""
    analytic = np.asarray(analytic)
    reference = np.asarray(reference)
    scale = np.abs(reference).max()
    worst = 0.0
    for c in range(reference.shape[1]):
        denom = max(np.abs(reference[:, c]).max(), 1e-12 * max(scale, 1.0))
        worst = max(worst, np.abs(analytic[:, c] - reference[:, c]).max() / denom)
    return worst


@pytest.fixture
def small_reservoir():
    return make_reservoir()
