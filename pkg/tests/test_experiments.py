import math

import numpy as np
import pydantic
import pytest

from qsl.experiments import EXPERIMENTS, BaseExperiment, ExperimentResult, RunNotes
from qsl.experiments.speed_limits import interior_maxima


class ConstantExperiment(BaseExperiment):
    """
    Returns one row holding its parameter.

    Args:
        value: Number echoed into the table.
    """
    tag = 'constant'

    value: float = 1.0

    def run(self) -> ExperimentResult:
        self.notes.set('twice', np.float64(2 * self.value))
        return self.result(('value',), [(self.value,)])


class TestRunNotes:
    """Scalar notes collected during a run."""

    def test_set_and_get(self):
        """Values round-trip and missing names fall back to the default."""
        notes = RunNotes()
        notes.set('tau_qsl', 1.5)
        assert notes.get('tau_qsl') == 1.5
        assert notes.get('missing') is None
        assert notes.get('missing', 0) == 0

    def test_overwrite(self):
        """A later note replaces an earlier one."""
        notes = RunNotes()
        notes.set('threshold', None)
        notes.set('threshold', 2.0)
        assert notes.as_dict() == {'threshold': 2.0}

    def test_numpy_scalars_unwrapped(self):
        """numpy scalars are stored as plain Python numbers."""
        notes = RunNotes()
        notes.set('count', np.int64(3))
        assert type(notes.get('count')) is int

    def test_names_validated(self):
        """Names must be non-empty strings."""
        notes = RunNotes()
        with pytest.raises(ValueError, match="non-empty strings"):
            notes.set(3, 'x')
        with pytest.raises(ValueError, match="non-empty strings"):
            notes.get('')


class TestBaseExperiment:
    """Parameter handling shared by every experiment."""

    def test_defaults_and_validation(self):
        """Fields validate and unknown parameters are rejected."""
        assert ConstantExperiment().value == 1.0
        with pytest.raises(pydantic.ValidationError):
            ConstantExperiment(value='many')
        with pytest.raises(pydantic.ValidationError):
            ConstantExperiment(colour='red')

    def test_frozen(self):
        """Parameters cannot change after construction."""
        with pytest.raises(pydantic.ValidationError):
            ConstantExperiment().value = 2.0

    def test_notes_reach_result(self):
        """Notes set during the run travel with the table."""
        result = ConstantExperiment(value=3.0).run()
        assert result.rows == [(3.0,)]
        assert result.metadata == {'twice': 6.0}

    def test_describe(self):
        """Summary and parameter help come from the docstring."""
        summary, params = ConstantExperiment.describe()
        assert summary == "Returns one row holding its parameter."
        assert params == {'value': "Number echoed into the table."}

    def test_every_experiment_documents_its_fields(self):
        """`qsl list` can show help for every parameter."""
        for tag, cls in EXPERIMENTS.items():
            summary, params = cls.describe()
            assert summary, tag
            own = {f.alias or name for name, f in cls.model_fields.items()} - {'seed', 'hbar'}
            documented = set(params) | {'lambda'}
            assert own <= documented, tag

    def test_run_required(self):
        """Experiments without `run` cannot be instantiated."""

        class Incomplete(BaseExperiment):
            tag = 'incomplete'

        with pytest.raises(TypeError):
            Incomplete()

    def test_row_width_checked(self):
        """Every row matches the header."""
        with pytest.raises(pydantic.ValidationError):
            ExperimentResult(columns=('a', 'b'), rows=[(1.0,)])

    def test_column(self):
        """Columns are extracted by name."""
        result = ExperimentResult(columns=('a', 'b'), rows=[(1, 2), (3, 4)])
        assert result.column('b') == [2, 4]


def test_interior_maxima():
    """Only strict interior peaks of the finite part count."""
    assert interior_maxima(np.array([0.0, 1.0, 0.0, 2.0, 1.0])) == 2
    assert interior_maxima(np.array([np.nan, 0.0, 1.0, 2.0])) == 0
    assert interior_maxima(np.array([1.0, 2.0])) == 0


class TestSpeedLimitExperiments:
    """Small runs of the speed-limit experiments."""

    def test_bounds_saturating_state(self):
        """Equal weights on a unit gap saturate every bound at π."""
        result = EXPERIMENTS['bounds']().run()
        taus = dict(result.rows)
        for variant in ('MT', 'ML', 'unified', 'fisher', 'first-orthogonality'):
            assert taus[variant] == pytest.approx(math.pi, rel=1e-6)

    def test_bounds_amplitudes_checked(self):
        """Amplitudes match the spectrum and do not all vanish."""
        with pytest.raises(pydantic.ValidationError):
            EXPERIMENTS['bounds'](energies=[0.0, 1.0], amplitudes=[1.0])
        with pytest.raises(pydantic.ValidationError):
            EXPERIMENTS['bounds'](energies=[0.0, 1.0], amplitudes=[0.0, 0.0])

    def test_jc_sweep_decreases_with_coupling(self):
        """Stronger coupling gives a shorter operator-norm speed-limit time."""
        experiment = EXPERIMENTS['jc-sweep'].model_validate({'gamma0': [20.0, 2.0], 'lambda': 50.0, 'steps': 4000})
        result = experiment.run()
        assert result.columns == ('gamma0', 'tau_qsl_op', 'n_measure')
        assert result.column('gamma0') == [2.0, 20.0]
        taus = result.column('tau_qsl_op')
        assert taus[1] < taus[0] <= 0.5

    def test_jc_single_coupling(self):
        """A scalar coupling is accepted as a one-element sweep."""
        assert EXPERIMENTS['jc-sweep'](gamma0=5.0).gamma0 == [5.0]

    def test_lmg_scan(self):
        """The scan records where the speed-limit time is smallest."""
        result = EXPERIMENTS['lmg-scan'](n_spins=10, points=3, steps=40).run()
        assert result.column('lambda') == pytest.approx([0.0, 1.0, 2.0])
        assert result.metadata['lambda_at_minimum'] in result.column('lambda')
        assert all(0.0 <= tau <= 1.05 for tau in result.column('tau_qsl'))

    def test_lmg_criticality_signature(self):
        """At N = 100 the probe saturates its bound deep in the ordered phase and collapses next to λ = 1."""
        result = EXPERIMENTS['lmg-scan'](lambda_min=0.25, lambda_max=1.1, points=18).run()
        taus = dict(zip(result.column('lambda'), result.column('tau_qsl')))
        reference = taus[0.25]
        assert reference >= 0.85
        near_critical = [tau for lam, tau in taus.items() if lam >= 0.9 - 1e-9]
        assert len(near_critical) == 5
        assert min(near_critical) <= 0.15 * reference
        # saturated up to the critical point
        assert all(tau == pytest.approx(1.0, rel=1e-3) for lam, tau in taus.items() if lam <= 1.0 + 1e-9)

    def test_pt_qubit(self):
        """Exact step propagators reproduce the closed form."""
        result = EXPERIMENTS['pt-qubit'](steps=200).run()
        assert result.metadata['max_deviation'] < 1e-8
        assert result.metadata['tau_qsl'] >= 0.0

    def test_dirac(self):
        """The superluminal field is noted and flagged rows lie above it."""
        result = EXPERIMENTS['dirac'](points=5).run()
        b_star = result.metadata['superluminal_field']
        assert b_star == pytest.approx(2 * math.pi)
        for b, flag in zip(result.column('b_field'), result.column('v_s_exceeds_c')):
            assert flag == int(b > b_star)

    def test_property_suite(self):
        """No bound exceeds the elapsed time on a handful of random systems."""
        result = EXPERIMENTS['property-suite'](instances=6, seed=11).run()
        assert result.metadata['total_violations'] == 0
        assert 'MT-driven' in result.column('variant')
        assert 'purity-ML' in result.column('variant')


class TestThermoExperiments:
    """Small runs of the thermodynamic experiments."""

    def test_thermo_identities(self):
        """Entropy production matches the relative entropy and obeys the Clausius bound."""
        result = EXPERIMENTS['thermo'](protocols=5).run()
        assert len(result.rows) == 5
        assert result.metadata['max_identity_error'] < 1e-8
        assert result.metadata['min_clausius_margin'] >= -1e-10

    def test_seed_reproducible(self):
        """The same seed gives the same table, a different one does not."""
        a = EXPERIMENTS['thermo'](protocols=2, seed=4).run()
        b = EXPERIMENTS['thermo'](protocols=2, seed=4).run()
        c = EXPERIMENTS['thermo'](protocols=2, seed=5).run()
        assert a.rows == b.rows
        assert a.rows != c.rows

    def test_sta_tradeoff(self):
        """Half the time doubles the peak cost at unchanged total."""
        result = EXPERIMENTS['sta-tradeoff']().run()
        assert result.metadata['cost_ratio'] == pytest.approx(1.0, rel=1e-10)
        assert result.metadata['peak_ratio'] == pytest.approx(2.0, rel=1e-10)
        assert all(f >= 1.0 - 1e-6 for f in result.column('tracking_fidelity'))


class TestControlExperiments:
    """Small runs of the control experiments."""

    def test_lz_threshold(self):
        """The speed limit and the endpoint fidelity are noted next to the scan."""
        result = EXPERIMENTS['lz-threshold'](durations=[1.0, 2.0], steps=100, guess_amplitude=1.0,
                                             max_iterations=500, n_guesses=2, seed=7).run()
        assert result.metadata['tau_qsl'] == pytest.approx(1.56881, abs=1e-5)
        assert result.metadata['endpoint_fidelity'] == pytest.approx(0.002, rel=1e-2)
        assert result.column('converged') == [0, 1]
        assert result.metadata['empirical_threshold'] == pytest.approx(2.0)

    def test_nonlinear_tmin(self):
        """The analytic minimal time is noted and every κ gets its scan."""
        result = EXPERIMENTS['nonlinear-tmin'](kappa=[0.0], factors=[0.9, 1.2], max_iterations=300,
                                               n_guesses=2).run()
        assert result.metadata['tmin'] == pytest.approx(math.pi / 4)
        assert result.column('converged') == [0, 1]
        assert result.metadata['threshold_kappa_0'] == pytest.approx(1.2 * math.pi / 4)

    def test_nonlinear_threshold_independent_of_interaction(self):
        """κ = 0, 1 and 5 share one threshold next to ℏΔθ/(2ω0)."""
        # 0.98 tmin leaves a Bloch-angle deficit of 0.01π, capping the overlap at 0.99988
        result = EXPERIMENTS['nonlinear-tmin'](kappa=[0.0, 1.0, 5.0], factors=[0.98, 1.04], max_iterations=300,
                                               n_guesses=2).run()
        tmin = result.metadata['tmin']
        thresholds = [result.metadata[f'threshold_kappa_{k}'] for k in ('0', '1', '5')]
        for threshold in thresholds:
            assert threshold is not None
            assert 0.98 * tmin < threshold <= 1.04 * tmin + 1e-12
        assert max(thresholds) <= 1.05 * min(thresholds)
        assert result.column('converged') == [0, 1] * 3
