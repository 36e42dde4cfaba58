"""Result CSV and summary persistence."""

import math

import pytest

from core.result_store import COLUMNS, ResultRow, ResultStore
from utils.error_handling import ExperimentError


def _row(drop_id=0, scheme="rs_irs", qos=4e6, power=21.123456789012345, feasible=True):
    return ResultRow(drop_id, scheme, qos, power, power - 0.1 if feasible else math.nan,
                     3, feasible, 0.0, "0123456789ab")


def test_csv_round_trip_is_exact(tmp_path):
    rows = [_row(1, "tin_irs", 2e6, 30.000000000000004), _row(0, "rs_irs", 4e6, -7.1e-5),
            _row(0, "rs_noirs", 4e6, 1 / 3)]
    store = ResultStore(str(tmp_path / "out.csv"))
    store.write_rows(rows)
    back = store.read_rows()
    assert back == sorted(rows, key=ResultRow.sort_key)
    header = (tmp_path / "out.csv").read_text().splitlines()[0]
    assert header.split(",") == COLUMNS


def test_infeasible_rows_keep_nan(tmp_path):
    store = ResultStore(str(tmp_path / "out.csv"))
    store.write_rows([_row(power=math.nan, feasible=False)])
    (back,) = store.read_rows()
    assert not back.feasible
    assert math.isnan(back.weighted_power_dbm) and math.isnan(back.unweighted_power_dbm)
    assert back.channel_hash == "0123456789ab"


def test_hash_with_leading_digits_stays_text(tmp_path):
    store = ResultStore(str(tmp_path / "out.csv"))
    row = ResultRow(0, "rs_irs", 1e6, 1.0, 1.0, 1, True, 0.0, "000123")
    store.write_rows([row])
    assert store.read_rows()[0].channel_hash == "000123"


def test_summary_is_strict_json(tmp_path):
    store = ResultStore(str(tmp_path / "out.csv"))
    store.write_summary({'slope': math.nan, 'nested': {'x': [1.0, math.inf]}})
    assert store.summary_path.name == "out.summary.json"
    assert store.read_summary() == {'slope': None, 'nested': {'x': [1.0, None]}}


def test_missing_files_raise(tmp_path):
    store = ResultStore(str(tmp_path / "absent.csv"))
    with pytest.raises(ExperimentError):
        store.read_rows()
    with pytest.raises(ExperimentError):
        store.read_summary()


def test_validate_rejects_bad_locations(tmp_path):
    with pytest.raises(ExperimentError):
        ResultStore(str(tmp_path)).validate()
    with pytest.raises(ExperimentError):
        ResultStore(str(tmp_path / "results.txt")).validate()
    ResultStore(str(tmp_path / "fresh" / "results.csv")).validate()
