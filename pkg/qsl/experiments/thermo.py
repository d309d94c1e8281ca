"""Thermodynamic experiments: entropy-production identities and the shortcut-to-adiabaticity trade-off."""
import logging

import numpy as np
import pydantic

from ..dynamics import TimeGrid
from ..models import landau_zener, linear_ramp, tracking_fidelity
from ..sampling import random_protocol
from ..thermo import clausius_geometric_check, sta_cost_and_qsl, two_point_work
from .base import BaseExperiment, ExperimentResult

logger = logging.getLogger(__name__)


class ThermoExperiment(BaseExperiment):
    """
    Work statistics and entropy production of random driven qubit protocols.

    Args:
        beta: Inverse temperature of the initial Gibbs state.
        protocols: Number of random protocols.
        tau: Protocol duration.
        steps: Number of time steps.
    """
    tag = 'thermo'

    beta: pydantic.PositiveFloat = 1.0
    protocols: int = pydantic.Field(default=100, ge=1)
    tau: pydantic.PositiveFloat = 1.0
    steps: int = pydantic.Field(default=50, ge=2)

    def run(self) -> ExperimentResult:
        grid = TimeGrid(t_end=self.tau, steps=self.steps)
        rows = []
        identity_error, clausius_margin = 0.0, np.inf
        for k in range(self.protocols):
            rng = np.random.default_rng([self.seed, k])
            stats = two_point_work(random_protocol(rng, 2, grid, n_terms=2), self.beta, units=self.units)
            lhs, rhs = clausius_geometric_check(stats)
            identity_error = max(identity_error, abs(stats.entropy_production - stats.relative_entropy))
            clausius_margin = min(clausius_margin, lhs - rhs)
            rows.append((k, stats.mean_work, stats.delta_f, stats.entropy_production, stats.relative_entropy, rhs))
        self.notes.set('max_identity_error', identity_error)
        self.notes.set('min_clausius_margin', float(clausius_margin))
        return self.result(
            ('protocol', 'mean_work', 'delta_f', 'entropy_production', 'relative_entropy', 'clausius_rhs'), rows)


class StaTradeoffExperiment(BaseExperiment):
    """
    Counterdiabatic cost of a Landau-Zener sweep run at full and half duration along the same path.

    Args:
        omega: Transverse coupling ω.
        gamma_span: The bias ramps from −gamma_span to +gamma_span.
        tau: Duration of the slower sweep.
        steps: Number of time steps.
        level: Tracked eigenlevel.
    """
    tag = 'sta-tradeoff'

    omega: pydantic.PositiveFloat = 1.0
    gamma_span: pydantic.PositiveFloat = 5.0
    tau: pydantic.PositiveFloat = 1.0
    steps: int = pydantic.Field(default=2000, ge=2)
    level: int = pydantic.Field(default=0, ge=0, le=1)

    def run(self) -> ExperimentResult:
        units = self.units
        rows = []
        for duration in (self.tau, self.tau / 2.0):
            grid = TimeGrid(t_end=duration, steps=self.steps)
            h0 = landau_zener(self.omega, linear_ramp(-self.gamma_span, self.gamma_span, grid), grid)
            report = sta_cost_and_qsl(h0, self.level, units=units)
            fidelity = tracking_fidelity(h0, self.level, units=units)
            logger.info("duration %.6g: cost %.6g, tau_qsl %.6g", duration, report.total_cost, report.tau_qsl)
            rows.append((duration, report.total_cost, float(report.instantaneous_cost.max()), report.tau_qsl, fidelity))
        self.notes.set('cost_ratio', rows[1][1] / rows[0][1])
        self.notes.set('peak_ratio', rows[1][2] / rows[0][2])
        return self.result(('duration', 'total_cost', 'peak_cost', 'tau_qsl', 'tracking_fidelity'), rows)
