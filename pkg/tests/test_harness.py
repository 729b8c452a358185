"""Config loading, end-to-end runs, leakage audit, reporting, and the CLI."""

import json
from datetime import datetime, timezone
from pathlib import Path

import pytest
from click.testing import CliRunner

from finprompt import cli, harness
from finprompt.corpus import DirectionLabel, LabeledArticle, NewsArticle, SplitCorpus
from finprompt.errors import OfflineViolationError, ValidationError
from finprompt.prompts import Exemplar, PromptBundle, Sentiment, Strategy
from finprompt.verdict import read_predictions

UTC = timezone.utc

FROZEN_FIXTURE_METRICS = {
    "ZeroShot": {"tp": 6, "fp": 2, "tn": 6, "fn": 6},
    "FewShot": {"tp": 6, "fp": 2, "tn": 6, "fn": 6},
    "CoT": {"tp": 6, "fp": 2, "tn": 6, "fn": 6},
    "DKCoT": {"tp": 7, "fp": 2, "tn": 6, "fn": 5},
    "ADFCoT": {"tp": 9, "fp": 2, "tn": 6, "fn": 3},
}


# --- config -----------------------------------------------------------------------


def test_load_config_fixture(fixture_config):
    assert fixture_config.cutoff == datetime(2023, 1, 1, tzinfo=UTC)
    assert fixture_config.threshold == 0.001
    assert len(fixture_config.strategies) == 5
    assert fixture_config.provider.kind == "stub"
    assert len(fixture_config.digest) == 64


def test_config_digest_is_stable(fixture_dir):
    a = harness.load_config(fixture_dir / "config.json")
    b = harness.load_config(fixture_dir / "config.json")
    assert a.digest == b.digest


def test_config_missing_cutoff_fails_before_any_work(tmp_path, fixture_dir):
    raw = json.loads((fixture_dir / "config.json").read_text())
    del raw["cutoff"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="cutoff"):
        harness.load_config(path)


def test_config_rejects_unknown_strategy(tmp_path, fixture_dir):
    raw = json.loads((fixture_dir / "config.json").read_text())
    raw["strategies"] = ["ZeroShot", "MindReading"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="unknown strategy"):
        harness.load_config(path)


def test_config_provider_validation(tmp_path, fixture_dir):
    raw = json.loads((fixture_dir / "config.json").read_text())
    raw["provider"] = {"kind": "http"}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="base_url"):
        harness.load_config(path)
    raw["provider"] = {"kind": "stub"}
    path.write_text(json.dumps(raw))
    with pytest.raises(ValidationError, match="rulebook"):
        harness.load_config(path)


def test_offline_forbids_http_provider(make_config):
    config = make_config(provider={"kind": "http", "base_url": "https://api.example/v1"})
    with pytest.raises(OfflineViolationError):
        harness.run(config, offline=True, out_dir="unused")


# --- run --------------------------------------------------------------------------


def test_run_fixture_metrics_match_frozen_counts(make_config, tmp_path):
    config = make_config()
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    assert manifest.errors == ()
    assert manifest.leakage_audit["passed"] is True
    assert set(manifest.metrics) == set(FROZEN_FIXTURE_METRICS)
    for strategy, counts in FROZEN_FIXTURE_METRICS.items():
        assert manifest.metrics[strategy]["counts"] == counts, strategy
    assert manifest.corpus_summary["evaluable_test"] == 20
    assert manifest.corpus_summary["excluded_flat"] == 2
    assert manifest.corpus_summary["excluded_unlabeled"] == 2
    assert manifest.metrics["ZeroShot"]["excluded_unparseable"] == 3
    assert manifest.metrics["ADFCoT"]["excluded_unparseable"] == 0


def test_run_predictions_sorted_and_loadable(make_config, tmp_path):
    config = make_config(strategies=["ADFCoT"])
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    records = read_predictions(manifest.prediction_files["ADFCoT"])
    ids = [r.article_id for r in records]
    assert ids == sorted(ids)
    assert len(records) == 20
    assert all(r.strategy is Strategy.AD_FCOT for r in records)


def test_run_warm_cache_makes_zero_provider_calls(make_config, tmp_path):
    config = make_config()
    out = tmp_path / "run"
    first = harness.run(config, offline=True, out_dir=out)
    before = {
        p.name: p.read_bytes()
        for p in out.iterdir()
        if p.name.startswith(("predictions_", "bundles_", "report"))
    }
    second = harness.run(config, offline=True, out_dir=out)
    after = {
        p.name: p.read_bytes()
        for p in out.iterdir()
        if p.name.startswith(("predictions_", "bundles_", "report"))
    }
    assert second.provider_call_count == 0
    assert second.cache_hit_count == first.provider_call_count == 100
    assert before == after


def test_run_is_deterministic_across_directories(make_config, tmp_path):
    config = make_config()
    m1 = harness.run(config, offline=True, out_dir=tmp_path / "a")
    m2 = harness.run(config, offline=True, out_dir=tmp_path / "b")
    for strategy in m1.prediction_files:
        a = Path(m1.prediction_files[strategy]).read_bytes()
        b = Path(m2.prediction_files[strategy]).read_bytes()
        assert a == b, strategy
    assert (tmp_path / "a" / "report.txt").read_bytes() == (tmp_path / "b" / "report.txt").read_bytes()
    assert m1.metrics == m2.metrics


def test_interrupted_run_completes_from_cache(make_config, tmp_path):
    """A partial run then a full run lands on the same outputs as one shot."""
    config = make_config()
    out = tmp_path / "resumed"
    harness.run(config, offline=True, strategy_filter=[Strategy.ZERO_SHOT, Strategy.COT], out_dir=out)
    resumed = harness.run(config, offline=True, out_dir=out)
    fresh = harness.run(config, offline=True, out_dir=tmp_path / "fresh")
    assert resumed.metrics == fresh.metrics
    assert resumed.provider_call_count == 60  # 40 of 100 were already cached
    for strategy in fresh.prediction_files:
        assert (
            Path(resumed.prediction_files[strategy]).read_bytes()
            == Path(fresh.prediction_files[strategy]).read_bytes()
        )


def test_run_strategy_filter(make_config, tmp_path):
    config = make_config()
    manifest = harness.run(
        config, offline=True, strategy_filter=[Strategy.COT], out_dir=tmp_path / "run"
    )
    assert list(manifest.metrics) == ["CoT"]
    with pytest.raises(ValidationError, match="filter excludes"):
        config2 = make_config(strategies=["ZeroShot"])
        harness.run(config2, offline=True, strategy_filter=[Strategy.COT], out_dir=tmp_path / "x")


def test_run_with_self_consistency_samples(make_config, tmp_path):
    config = make_config(
        strategies=["CoT"], self_consistency={"enabled": True, "n": 3, "temperature": 0.7}
    )
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    records = read_predictions(manifest.prediction_files["CoT"])
    assert all(r.samples_used == 3 for r in records)
    # stub is deterministic, so the vote agrees with the single-sample run
    assert manifest.metrics["CoT"]["counts"] == FROZEN_FIXTURE_METRICS["CoT"]
    assert manifest.provider_call_count == 60  # 20 articles x 3 samples


def test_run_with_rag_context_stays_leakage_clean(make_config, tmp_path):
    config = make_config(rag={"enabled": True, "k": 2, "snippet_chars": 200})
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    assert manifest.leakage_audit["passed"] is True
    with open(manifest.bundle_files["CoT"], encoding="utf-8") as fh:
        bundles = [PromptBundle.from_dict(json.loads(line)) for line in fh if line.strip()]
    assert all(len(b.context_ids) == 2 for b in bundles)
    assert all("Related historical news:" in b.text for b in bundles)


def test_run_records_per_article_errors_and_continues(make_config, tmp_path):
    # a tiny budget makes the exemplar-bearing strategies fail per article
    config = make_config(budget=120, strategies=["ZeroShot", "ADFCoT"])
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    assert manifest.errors
    assert all(e["strategy"] == "ADFCoT" for e in manifest.errors)
    assert "ZeroShot" in manifest.metrics
    errored_ids = {e["article_id"] for e in manifest.errors}
    assert errored_ids <= {f"t{i:02d}" for i in range(1, 21)}


# --- audit ------------------------------------------------------------------------


def _mini_split():
    def art(id, ts):
        return NewsArticle(id, datetime.fromisoformat(ts).replace(tzinfo=UTC), "TT", f"headline {id}")

    dev = [LabeledArticle(art("d1", "2022-06-01T10:00:00"), DirectionLabel.UP)]
    test = [LabeledArticle(art("t1", "2023-02-01T10:00:00"), DirectionLabel.UP)]
    return SplitCorpus(dev=dev, test=test, cutoff=datetime(2023, 1, 1, tzinfo=UTC))


def _mini_pool(ts="2022-06-01T10:00:00"):
    return [
        Exemplar("d1", "old story", ("step",), Sentiment.NEGATIVE, datetime.fromisoformat(ts).replace(tzinfo=UTC))
    ]


def _bundle(target_id, exemplar_ids=(), context_ids=()):
    return PromptBundle(
        strategy=Strategy.AD_FCOT,
        text="prompt",
        token_estimate=2,
        exemplar_ids=tuple(exemplar_ids),
        knowledge_used=False,
        target_article_id=target_id,
        context_ids=tuple(context_ids),
    )


def test_audit_clean_run_passes():
    report = harness.audit_leakage(_mini_split(), [_bundle("t1", ["d1"])], _mini_pool())
    assert report.passed
    assert report.violations == ()


def test_audit_catches_future_dated_exemplar():
    pool = _mini_pool(ts="2023-06-01T10:00:00")  # after the target
    report = harness.audit_leakage(_mini_split(), [_bundle("t1", ["d1"])], pool)
    assert not report.passed
    assert [v.kind for v in report.violations] == ["future_reference"]
    assert report.violations[0].subject_id == "d1"


def test_audit_catches_future_context_snippet():
    split = _mini_split()
    late_ctx = split.test[0].article.id  # the target itself: timestamp == target
    report = harness.audit_leakage(split, [_bundle("t1", [], [late_ctx])], _mini_pool())
    assert [v.kind for v in report.violations] == ["future_reference"]


def test_audit_catches_dev_id_used_as_target():
    report = harness.audit_leakage(_mini_split(), [_bundle("d1")], _mini_pool())
    assert any(v.kind == "dev_id_as_target" for v in report.violations)


def test_audit_catches_test_article_before_cutoff():
    split = _mini_split()
    early = LabeledArticle(
        NewsArticle("t0", datetime(2022, 12, 31, tzinfo=UTC), "TT", "early"), DirectionLabel.UP
    )
    bad_split = SplitCorpus(dev=split.dev, test=[early] + split.test, cutoff=split.cutoff)
    report = harness.audit_leakage(bad_split, [], _mini_pool())
    assert [v.kind for v in report.violations] == ["test_before_cutoff"]
    assert report.violations[0].subject_id == "t0"


def test_audit_flags_unknown_exemplar_reference():
    report = harness.audit_leakage(_mini_split(), [_bundle("t1", ["ghost"])], _mini_pool())
    assert [v.kind for v in report.violations] == ["stale_reference"]


# --- report -----------------------------------------------------------------------


def _manifest_with(metrics):
    return harness.RunManifest(
        config_digest="0" * 64,
        corpus_digests={},
        prediction_files={},
        bundle_files={},
        metrics=metrics,
        started_at="",
        finished_at="",
        provider_call_count=0,
        cache_hit_count=0,
        corpus_summary={},
    )


def test_report_fixture_rendering(make_config, tmp_path):
    config = make_config()
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    text, rows = harness.report([manifest])
    expected = (
        "Method     Accuracy  Precision  Recall\n"
        "Zero-Shot     60.00      75.00   50.00\n"
        "Few-Shot      60.00      75.00   50.00\n"
        "CoT           60.00      75.00   50.00\n"
        "DK-CoT        65.00      77.78   58.33\n"
        "AD-FCoT       75.00      81.82   75.00\n"
    )
    assert text == expected
    assert [r["method"] for r in rows["rows"]] == ["Zero-Shot", "Few-Shot", "CoT", "DK-CoT", "AD-FCoT"]


def test_report_single_strategy_manifest():
    manifest = _manifest_with({"CoT": {"accuracy": 0.5, "precision": 0.25, "recall": 1.0}})
    text, rows = harness.report([manifest])
    assert len(text.splitlines()) == 2
    assert "CoT           50.00      25.00  100.00" in text


def test_report_undefined_metric_renders_em_dash():
    manifest = _manifest_with({"CoT": {"accuracy": 0.5, "precision": None, "recall": 0.5}})
    text, _ = harness.report([manifest])
    assert "—" in text


def test_report_requires_manifests():
    with pytest.raises(ValidationError):
        harness.report([])


def test_manifest_roundtrip(make_config, tmp_path):
    config = make_config(strategies=["CoT"])
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    loaded = harness.load_manifest(tmp_path / "run" / "manifest.json")
    assert loaded.metrics == manifest.metrics
    assert loaded.config_digest == manifest.config_digest


# --- CLI --------------------------------------------------------------------------


def test_cli_run_report_audit_roundtrip(make_config, tmp_path):
    make_config()  # writes tmp_path/config.json
    config_path = tmp_path / "config.json"
    out = tmp_path / "out"
    runner = CliRunner()

    result = runner.invoke(
        cli.main, ["run", "--config", str(config_path), "--offline", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "AD-FCoT" in result.output
    assert (out / "manifest.json").is_file()

    result = runner.invoke(cli.main, ["report", str(out / "manifest.json")])
    assert result.exit_code == 0
    assert "75.00" in result.output

    result = runner.invoke(
        cli.main, ["audit", "--config", str(config_path), "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    assert "leakage audit passed" in result.output


def test_cli_ingest_and_split(make_config, tmp_path):
    make_config()
    config_path = tmp_path / "config.json"
    out = tmp_path / "ingested"
    runner = CliRunner()

    result = runner.invoke(cli.main, ["ingest", "--config", str(config_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "rejections.jsonl").is_file()
    assert (out / "articles.jsonl").is_file()

    result = runner.invoke(cli.main, ["split", "--config", str(config_path)])
    assert result.exit_code == 0
    assert "dev=36" in result.output
    assert "test=24" in result.output
    assert "evaluable=20" in result.output


def test_cli_validation_error_exits_1(tmp_path):
    runner = CliRunner()
    result = runner.invoke(cli.main, ["run", "--config", str(tmp_path / "absent.json")])
    assert result.exit_code == 1


def test_cli_offline_with_http_provider_exits_2(make_config, tmp_path):
    make_config(provider={"kind": "http", "base_url": "https://api.example/v1"})
    runner = CliRunner()
    result = runner.invoke(
        cli.main,
        ["run", "--config", str(tmp_path / "config.json"), "--offline", "--out", str(tmp_path / "o")],
    )
    assert result.exit_code == 2


def test_cli_audit_detects_planted_violation_exits_3(make_config, tmp_path):
    make_config()
    config_path = tmp_path / "config.json"
    out = tmp_path / "out"
    runner = CliRunner()
    result = runner.invoke(
        cli.main, ["run", "--config", str(config_path), "--offline", "--out", str(out)]
    )
    assert result.exit_code == 0

    # plant a bundle citing an exemplar dated after its target
    planted = {
        "strategy": "ADFCoT",
        "text": "x",
        "token_estimate": 1,
        "exemplar_ids": ["t20"],
        "knowledge_used": False,
        "target_article_id": "t01",
        "context_ids": ["t19"],
    }
    with open(out / "bundles_ADFCoT.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(planted) + "\n")
    result = runner.invoke(cli.main, ["audit", "--config", str(config_path), "--out", str(out)])
    assert result.exit_code == 3
    assert "violation" in result.output


def test_exemplar_order_is_config_overridable(make_config, tmp_path):
    config = make_config(exemplar_order=["Positive", "Negative"], strategies=["ADFCoT"])
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    with open(manifest.bundle_files["ADFCoT"], encoding="utf-8") as fh:
        bundle = PromptBundle.from_dict(json.loads(fh.readline()))
    assert bundle.text.index("Sentiment: Positive") < bundle.text.index("Sentiment: Negative")


def test_bad_exemplar_order_is_rejected(make_config):
    with pytest.raises(ValidationError, match="exemplar_order"):
        make_config(exemplar_order=["Positive", "Positive"])


def test_offline_run_makes_zero_network_calls(make_config, tmp_path, monkeypatch):
    """The stub path never opens a socket: any attempt fails the test."""
    import socket

    def _blocked(*args, **kwargs):
        raise AssertionError("network call attempted during offline run")

    monkeypatch.setattr(socket.socket, "connect", _blocked)
    config = make_config(strategies=["ADFCoT", "DKCoT"])
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    assert manifest.errors == ()


def test_custom_template_file_via_config(make_config, tmp_path):
    template = tmp_path / "cot_custom.txt"
    template.write_text(
        "Custom preamble.\n\n{{context}}Story:\n{{article}}\n\n{{cue}}\n"
        "Finish with one line of the form:\nFinal answer: <Positive|Negative|Neutral>",
        encoding="utf-8",
    )
    config = make_config(strategies=["CoT"], templates={"CoT": str(template)})
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    with open(manifest.bundle_files["CoT"], encoding="utf-8") as fh:
        bundle = PromptBundle.from_dict(json.loads(fh.readline()))
    assert bundle.text.startswith("Custom preamble.")
    assert "Story:" in bundle.text
    # metrics unchanged: the stub keys on article phrases and the cue
    assert manifest.metrics["CoT"]["counts"] == FROZEN_FIXTURE_METRICS["CoT"]


def test_template_missing_placeholder_fails_per_article(make_config, tmp_path):
    template = tmp_path / "broken.txt"
    template.write_text("No placeholders at all", encoding="utf-8")
    config = make_config(strategies=["CoT"], templates={"CoT": str(template)})
    manifest = harness.run(config, offline=True, out_dir=tmp_path / "run")
    assert len(manifest.errors) == 20
    assert all("placeholder" in e["error"] for e in manifest.errors)


def test_config_rejects_unreadable_template(make_config):
    with pytest.raises(ValidationError, match="template file"):
        make_config(templates={"CoT": "no/such/template.txt"})


def test_cli_report_json_flag(make_config, tmp_path):
    make_config()
    out = tmp_path / "out"
    runner = CliRunner()
    result = runner.invoke(
        cli.main,
        ["run", "--config", str(tmp_path / "config.json"), "--offline", "--out", str(out)],
    )
    assert result.exit_code == 0
    json_path = tmp_path / "rows.json"
    result = runner.invoke(
        cli.main, ["report", str(out / "manifest.json"), "--json", str(json_path)]
    )
    assert result.exit_code == 0
    rows = json.loads(json_path.read_text(encoding="utf-8"))
    assert [r["method"] for r in rows["rows"]][-1] == "AD-FCoT"
    assert rows["rows"][-1]["accuracy"] == pytest.approx(0.75)


def test_cli_ingest_writes_rejection_entries(tmp_path, fixture_dir):
    news = tmp_path / "news.csv"
    news.write_text(
        "id,timestamp,ticker,headline,body,source\n"
        "a1,2022-06-01T10:00:00Z,AURM,Dev article,,\n"
        "a2,BAD-TIMESTAMP,AURM,Broken row,,\n"
        "a3,2023-02-01T10:00:00Z,AURM,Test article,,\n",
        encoding="utf-8",
    )
    prices = tmp_path / "prices.csv"
    prices.write_text(
        "ticker,date,open,close\n"
        "AURM,2022-06-01,100.00,102.00\n"
        "AURM,2023-02-01,100.00,98.00\n",
        encoding="utf-8",
    )
    raw = {
        "news": {"path": str(news), "format": "csv"},
        "prices": {"path": str(prices)},
        "exemplars": {"path": str(fixture_dir / "exemplars.jsonl")},
        "cutoff": "2023-01-01T00:00:00Z",
        "provider": {"kind": "stub", "rulebook": str(fixture_dir / "rulebook.json")},
    }
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(raw), encoding="utf-8")
    out = tmp_path / "ingested"
    runner = CliRunner()
    result = runner.invoke(cli.main, ["ingest", "--config", str(config_path), "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "rejections=1" in result.output
    entries = [
        json.loads(line)
        for line in (out / "rejections.jsonl").read_text(encoding="utf-8").splitlines()
    ]
    assert entries == [{"row_number": 3, "reason": entries[0]["reason"]}]
    assert "timestamp" in entries[0]["reason"]
