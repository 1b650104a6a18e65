"""Rolling-horizon home energy management for a PV + battery household.

Library layout:

- ``domain``      — time grid, input series, plant parameters, scenarios, CSV I/O
- ``pv_sim``      — clear-sky irradiance, cloud attenuation, PV energy
- ``forecast``    — multi-horizon recursive least squares, residual covariance,
                    Gaussian and quantile-copula scenario sampling
- ``milp``        — stochastic dispatch MILP: builder, solver, audit, LP export
- ``controllers`` — naive, optimizing (SP/EV), perfect-information, and
                    season-switching dispatch policies
- ``harness``     — hourly rolling simulation, campaigns, controller comparison
- ``synth``       — seeded synthetic dataset generator
- ``cli``         — command-line front end
"""

from .domain import (DT_H, PlantSpec, PriceStats, ScenarioSet, SeriesFrame,
                     TimeGrid, load_series, price_stats, write_series)
from .pv_sim import (PvTrace, SolarGeometry, clear_sky_ghi, cloud_to_ghi,
                     pv_energy, pv_forecast, simulate_pv)

__version__ = "0.1.0"
