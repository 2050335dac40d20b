import math

import pytest

from fedsel.config import load_config
from fedsel.errors import ConfigurationError
from fedsel.reporting import (
    METRIC_COLUMNS,
    ComparisonRow,
    csv_to_rows,
    rows_to_csv,
    run_comparison,
    summarize,
    summary_to_csv,
    summary_to_text,
    variant_order,
    write_comparison,
)


def tiny_cfg(**extra):
    overrides = {
        "corpus.per_class_train": "8",
        "corpus.per_class_val": "4",
        "corpus.per_class_test": "4",
        "federation.rounds": "2",
        "federation.local_epochs": "2",
        "baseline.max_epochs": "4",
        "baseline.patience": "4",
    }
    overrides.update(extra)
    cfg, _ = load_config(overrides=overrides)
    return cfg


@pytest.fixture(scope="module")
def campaign():
    return run_comparison(tiny_cfg(), seeds=[1, 2])


def test_campaign_row_inventory(campaign):
    # 4 locals + centralized + 2 federations, each on 2 test sets, 2 seeds
    assert len(campaign) == 7 * 2 * 2
    assert {r.seed for r in campaign} == {1, 2}
    assert {r.test_set for r in campaign} == {"global", "external"}
    assert variant_order(campaign) == [
        "local_client_0",
        "local_client_1",
        "local_client_2",
        "local_client_3",
        "centralized",
        "fl_fews",
        "fl_oews",
    ]
    for r in campaign:
        assert r.status == "ok"
        assert set(r.metrics) == set(METRIC_COLUMNS)
        for v in r.metrics.values():
            assert 0.0 <= v <= 1.0


def test_campaign_is_reproducible(campaign):
    again = run_comparison(tiny_cfg(), seeds=[1, 2])
    assert len(again) == len(campaign)
    for a, b in zip(campaign, again):
        assert a == b


def test_empty_seed_list_rejected():
    with pytest.raises(ConfigurationError):
        run_comparison(tiny_cfg(), seeds=[])


def test_summarize_handles_failed_rows():
    rows = [
        ComparisonRow(1, "centralized", "global", "failed", None, "boom"),
        ComparisonRow(1, "centralized", "external", "failed", None, "boom"),
        ComparisonRow(1, "fl_fews", "global", "ok", {m: 0.5 for m in METRIC_COLUMNS}),
        ComparisonRow(1, "fl_fews", "external", "ok", {m: 0.5 for m in METRIC_COLUMNS}),
    ]
    summaries = summarize(rows)
    failed = [s for s in summaries if s.variant == "centralized"]
    assert all(s.ok == 0 and s.failed == 1 for s in failed)
    assert all(math.isnan(s.means["macro_f1"]) for s in failed)
    ok = [s for s in summaries if s.variant == "fl_fews"]
    assert all(s.ok == 1 and s.failed == 0 for s in ok)


def test_run_comparison_survives_variant_exception(monkeypatch):
    import fedsel.reporting as reporting

    real = reporting.run_centralized
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 1:
            raise RuntimeError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(reporting, "run_centralized", flaky)
    rows = run_comparison(tiny_cfg(), seeds=[3])
    bad = [r for r in rows if r.status == "failed"]
    assert len(bad) == 2  # one variant, both test sets
    assert all(r.variant == "local_client_0" for r in bad)
    assert all("synthetic failure" in r.error for r in bad)
    assert sum(r.status == "ok" for r in rows) == len(rows) - 2


def test_row_csv_round_trip(campaign):
    text = rows_to_csv(campaign)
    back = csv_to_rows(text)
    assert len(back) == len(campaign)
    for a, b in zip(campaign, back):
        assert (a.seed, a.variant, a.test_set, a.status) == (b.seed, b.variant, b.test_set, b.status)
        for m in METRIC_COLUMNS:
            # values survive at the emitted 6-decimal precision
            assert b.metrics[m] == float(f"{a.metrics[m]:.6f}")


def test_csv_header_validated():
    with pytest.raises(ConfigurationError):
        csv_to_rows("wrong,header\n1,2\n")


def test_summarize_math_by_hand():
    def row(seed, value):
        return ComparisonRow(seed, "fl_fews", "global", "ok", {m: value for m in METRIC_COLUMNS})

    rows = [row(1, 0.4), row(2, 0.5), row(3, 0.9)]
    (summary,) = summarize(rows)
    mean = (0.4 + 0.5 + 0.9) / 3
    sd = math.sqrt(((0.4 - mean) ** 2 + (0.5 - mean) ** 2 + (0.9 - mean) ** 2) / 2)
    assert summary.means["accuracy"] == pytest.approx(mean, abs=1e-15)
    assert summary.sds["accuracy"] == pytest.approx(sd, abs=1e-15)
    assert summary.ok == 3 and summary.failed == 0


def test_single_seed_sd_is_zero():
    rows = [ComparisonRow(1, "fl_fews", "global", "ok", {m: 0.7 for m in METRIC_COLUMNS})]
    (summary,) = summarize(rows)
    assert summary.sds["macro_f1"] == 0.0


def test_summary_outputs_render(campaign):
    summaries = summarize(campaign)
    csv_text = summary_to_csv(summaries)
    header = csv_text.splitlines()[0].split(",")
    assert header[:2] == ["variant", "test_set"]
    assert "macro_f1_mean" in header and "macro_f1_sd" in header
    assert len(csv_text.splitlines()) == 1 + len(summaries)

    text = summary_to_text(summaries)
    assert "global test set" in text
    assert "external test set" in text
    assert "fl_oews" in text
    assert "±" in text


def test_write_comparison_files(tmp_path, campaign):
    paths = write_comparison(campaign, "abc123", tmp_path)
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "abc123.compare.csv",
        "abc123.summary.csv",
        "abc123.summary.txt",
    ]
    back = csv_to_rows(paths["rows"].read_text())
    assert len(back) == len(campaign)
