"""Command-line front-end."""

import json

import pytest

from core import __version__
from main import build_parser, main


def _write_config(tmp_path):
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps({
        'system': {'n_bs': 1, 'antennas_per_bs': 2, 'n_users': 1, 'n_reflect': 1,
                   'decode_group_max': 1, 'max_outer_iters': 2, 'max_sca_iters': 8},
        'workers': 1,
    }))
    return path


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exit_info:
        build_parser().parse_args(['--version'])
    assert exit_info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_qos_sweep_parsed_in_mbps():
    args = build_parser().parse_args(['--sweep-qos', '1, 2.5', '--schemes', 'rs_irs,tin_irs'])
    assert args.sweep_qos == [1e6, 2.5e6]
    assert args.schemes == ['rs_irs', 'tin_irs']


def test_unknown_scheme_exits_nonzero(tmp_path):
    argv = ['--schemes', 'noma', '--out', str(tmp_path / "r.csv"), '--log-dir', str(tmp_path / "logs")]
    assert main(argv) == 1
    assert not (tmp_path / "r.csv").exists()


def test_unknown_config_key_exits_nonzero(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({'system': {'n_antennas': 3}}))
    assert main(['--config', str(path), '--log-dir', str(tmp_path)]) == 1


def test_small_run_writes_results(tmp_path):
    out = tmp_path / "runs" / "r.csv"
    argv = ['--config', str(_write_config(tmp_path)), '--out', str(out), '--drops', '1',
            '--schemes', 'tin_noirs,rs_noirs', '--sweep-qos', '1', '--no-timing',
            '--log-dir', str(tmp_path / "logs")]
    assert main(argv) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("drop_id,scheme,qos_bps")
    assert len(lines) == 3
    summary = json.loads((tmp_path / "runs" / "r.summary.json").read_text())
    assert summary['config']['record_wall_time'] is False
    assert (tmp_path / "logs" / "rsirs.log").exists()

    saved = json.loads((tmp_path / "runs" / "r.config.json").read_text())
    assert saved['drops'] == 1
    assert saved['schemes'] == ['tin_noirs', 'rs_noirs']
    assert saved['system']['n_users'] == 1
    assert saved['output_path'] == str(out)
