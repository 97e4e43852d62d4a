import pytest

from database.db_config import DATABASE_URL_ENV, dispose, get_db_engine, resolve_database_url
from database.db_operations import get_run_verdicts, get_runs, init_db, record_run


def make_report(run_id, subcommand="check", verdict="pass"):
    return {
        "run-id": run_id,
        "subcommand": subcommand,
        "config-hash": "0123456789abcdef",
        "verdicts": [{"label": "square", "class_id": "gs-exponential", "verdict": verdict,
                      "worst": -0.25, "tolerance": 1e-9, "sample_count": 9261}],
        "worst-witnesses": [{"kind": "worst-residual:gs-exponential", "value": -0.25, "s": 1.0, "a": 0.5,
                             "m1": [0.0], "m2": [1.0]},
                            {"kind": "minimizer", "value": 0.0, "s": None, "a": None, "m1": [0.0], "m2": None}],
    }


@pytest.fixture
def url(tmp_path):
    url = f"sqlite:///{tmp_path / 'ledger.db'}"
    init_db(url)
    yield url
    dispose(url)


def test_resolve_database_url(tmp_path, monkeypatch):
    monkeypatch.delenv(DATABASE_URL_ENV, raising=False)
    assert resolve_database_url("sqlite://") == "sqlite://"
    assert resolve_database_url(out_dir=tmp_path) == f"sqlite:///{tmp_path.resolve() / 'gsconvex_runs.db'}"
    monkeypatch.setenv(DATABASE_URL_ENV, "postgresql://lab@localhost/runs")
    assert resolve_database_url(out_dir=tmp_path) == "postgresql://lab@localhost/runs"


def test_engine_is_cached(url):
    assert get_db_engine(url) is get_db_engine(url)


def test_record_and_read_back(url):
    assert record_run(url, make_report("aaaa"), 0)
    assert record_run(url, make_report("bbbb", subcommand="oracle", verdict="fail"), 1)

    runs = get_runs(url)
    assert [r["run_id"] for r in runs] == ["aaaa", "bbbb"]
    assert [r["exit_code"] for r in runs] == [0, 1]
    assert [r["run_id"] for r in get_runs(url, subcommand="oracle")] == ["bbbb"]

    verdicts = get_run_verdicts(url, "bbbb")
    assert verdicts == [{"label": "square", "class_id": "gs-exponential", "verdict": "fail", "worst": -0.25,
                         "tolerance": 1e-9, "sample_count": 9261}]


def test_latest_recording_wins(url):
    record_run(url, make_report("aaaa", verdict="fail"), 1)
    record_run(url, make_report("aaaa", verdict="pass"), 0)
    assert get_run_verdicts(url, "aaaa")[0]["verdict"] == "pass"
    assert len(get_runs(url)) == 2


def test_unknown_run_has_no_verdicts(url):
    assert get_run_verdicts(url, "missing") == []


def test_bad_report_is_rolled_back(url):
    report = make_report("cccc")
    report["verdicts"][0]["verdict"] = None
    assert not record_run(url, report, 0)
    assert get_runs(url) == []
