import pytest

from qsl import __version__
from qsl.cli import EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, main
from qsl.errors import IntegrationError


class TestCli:
    """The `qsl` command."""

    def test_list(self, capsys):
        """Experiments, their parameters and the presets are listed."""
        assert main(['list']) == EXIT_OK
        out = capsys.readouterr().out
        assert '  jc-sweep: ' in out
        assert '      gamma0: Coupling strengths γ0 to sweep.' in out
        assert 'jc-fig2: lambda=50, tau=0.5, omega0=1' in out

    def test_version(self, capsys):
        """`--version` prints the installed version."""
        with pytest.raises(SystemExit) as info:
            main(['--version'])
        assert info.value.code == 0
        assert capsys.readouterr().out.strip() == f"qsl {__version__}"

    def test_missing_experiment(self, capsys):
        """Without a command the valid tags are shown."""
        assert main([]) == EXIT_INVALID
        assert 'lz-threshold' in capsys.readouterr().err

    def test_unknown_experiment(self, capsys):
        """argparse rejects unknown tags with exit status 2."""
        with pytest.raises(SystemExit) as info:
            main(['fig5', '--config', 'x.json'])
        assert info.value.code == EXIT_INVALID
        assert 'bounds' in capsys.readouterr().err

    def test_run(self, write_config, tmp_path, capsys):
        """A run prints the CSV path and writes both files."""
        out_dir = tmp_path / 'results'
        path = write_config({'experiment': 'bounds', 'parameters': {'energies': [0.0, 1.0]}})
        assert main(['bounds', '--config', str(path), '--out', str(out_dir)]) == EXIT_OK
        assert capsys.readouterr().out.strip() == str(out_dir / 'bounds.csv')
        assert (out_dir / 'bounds.json').exists()

    def test_config_for_other_experiment(self, write_config, capsys):
        """The command must match the config's experiment."""
        path = write_config({'experiment': 'bounds'})
        assert main(['dirac', '--config', str(path)]) == EXIT_INVALID
        assert "not 'dirac'" in capsys.readouterr().err

    def test_invalid_config(self, write_config, capsys):
        """Diagnostics go to stderr and the exit status is 2."""
        path = write_config({'experiment': 'jc-sweep', 'parameters': {'steps': -1}})
        assert main(['jc-sweep', '--config', str(path)]) == EXIT_INVALID
        err = capsys.readouterr().err
        assert 'parameters.gamma0' in err and 'parameters.steps' in err

    def test_validate(self, write_config, capsys):
        """`validate` prints one line per problem."""
        good = write_config({'experiment': 'jc-sweep', 'parameters': {'gamma0': 2.0}}, name='good.json')
        bad = write_config({'experiment': 'jc-sweep'}, name='bad.json')
        assert main(['validate', '--config', str(good)]) == EXIT_OK
        assert capsys.readouterr().out == ''
        assert main(['validate', '--config', str(bad)]) == EXIT_INVALID
        assert capsys.readouterr().out.startswith('parameters.gamma0')

    def test_unreadable_config(self, tmp_path, capsys):
        """A missing file is an input error."""
        assert main(['validate', '--config', str(tmp_path / 'absent.json')]) == EXIT_INVALID
        assert 'cannot read config' in capsys.readouterr().err

    def test_numerical_failure(self, write_config, tmp_path, monkeypatch):
        """Failures of the numerics exit with status 3."""
        def fail(self):
            raise IntegrationError("trace drifted", step=4)

        monkeypatch.setattr('qsl.cli.Runner.run', fail)
        path = write_config({'experiment': 'bounds', 'output_path': str(tmp_path)})
        assert main(['bounds', '--config', str(path)]) == EXIT_NUMERICAL
