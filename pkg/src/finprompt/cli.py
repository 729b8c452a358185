"""Command-line entry points: ingest, split, run, report, audit.

Exit codes: 0 success, 1 validation error, 2 runtime/provider error,
3 leakage audit failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import harness
from .errors import ProviderError, ValidationError
from .prompts import PromptBundle, Strategy

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_LEAKAGE = 3

_STRATEGY_NAMES = [s.value for s in Strategy]


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Financial-news sentiment prompting benchmark."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Experiment config JSON.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory override.")
def ingest(config_path: str, out_dir: str | None):
    """Validate and normalize the corpus; write the rejection report."""
    try:
        config = harness.load_config(config_path)
        out = Path(out_dir) if out_dir else config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        news, corpus_split, pool, knowledge = harness.prepare_corpus(config)
        corpus_mod.write_rejections(news.rejections, out / "rejections.jsonl")
        with open(out / "articles.jsonl", "w", encoding="utf-8") as fh:
            for item in corpus_split.dev + corpus_split.test:
                fh.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    click.echo(
        f"articles={len(news.articles)} rejections={len(news.rejections)} "
        f"exemplars={len(pool)} knowledge_tickers={len(knowledge)}"
    )
    click.echo(f"normalized corpus and rejection report written to {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Experiment config JSON.")
def split(config_path: str):
    """Apply the temporal split and print its summary."""
    try:
        config = harness.load_config(config_path)
        _, corpus_split, _, _ = harness.prepare_corpus(config)
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    dev_ts = [item.article.timestamp for item in corpus_split.dev]
    test_ts = [item.article.timestamp for item in corpus_split.test]
    evaluable = sum(1 for item in corpus_split.test if item.evaluable)
    click.echo(f"cutoff={corpus_mod.format_timestamp(corpus_split.cutoff)}")
    click.echo(
        f"dev={len(corpus_split.dev)} "
        f"[{corpus_mod.format_timestamp(min(dev_ts))} .. {corpus_mod.format_timestamp(max(dev_ts))}]"
    )
    click.echo(
        f"test={len(corpus_split.test)} "
        f"[{corpus_mod.format_timestamp(min(test_ts))} .. {corpus_mod.format_timestamp(max(test_ts))}] "
        f"evaluable={evaluable}"
    )


@main.command(name="run")
@click.option("--config", "config_path", required=True, type=click.Path(), help="Experiment config JSON.")
@click.option(
    "--strategy",
    "strategy_names",
    multiple=True,
    type=click.Choice(_STRATEGY_NAMES),
    help="Restrict the run to the named strategies.",
)
@click.option("--offline", is_flag=True, help="Forbid network providers; stub only.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Output directory override.")
def run_cmd(config_path: str, strategy_names: tuple[str, ...], offline: bool, out_dir: str | None):
    """Run the full experiment and write predictions, metrics, and manifest."""
    try:
        config = harness.load_config(config_path)
        strategy_filter = [Strategy(name) for name in strategy_names] or None
        manifest = harness.run(config, offline=offline, strategy_filter=strategy_filter, out_dir=out_dir)
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except ProviderError as exc:
        _fail(EXIT_RUNTIME, str(exc))

    out = Path(out_dir) if out_dir else config.output_dir
    click.echo((out / "report.txt").read_text(encoding="utf-8"), nl=False)
    click.echo(
        f"provider_calls={manifest.provider_call_count} cache_hits={manifest.cache_hit_count} "
        f"errors={len(manifest.errors)}"
    )
    click.echo(f"manifest: {out / 'manifest.json'}")
    if manifest.errors:
        for err in manifest.errors:
            click.echo(f"error [{err['strategy']}/{err['article_id']}]: {err['error']}", err=True)
        sys.exit(EXIT_RUNTIME)
    if manifest.leakage_audit and not manifest.leakage_audit.get("passed", True):
        click.echo("leakage audit FAILED; see manifest.leakage_audit", err=True)
        sys.exit(EXIT_LEAKAGE)


@main.command(name="report")
@click.argument("manifests", nargs=-1, required=True, type=click.Path())
@click.option("--json", "json_path", type=click.Path(), default=None, help="Also write rows as JSON.")
def report_cmd(manifests: tuple[str, ...], json_path: str | None):
    """Render the metrics table from one or more run manifests."""
    try:
        loaded = [harness.load_manifest(path) for path in manifests]
        text, rows = harness.report(loaded)
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    click.echo(text, nl=False)
    if json_path:
        Path(json_path).write_text(json.dumps(rows, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Experiment config JSON.")
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Run directory holding bundle files.")
def audit(config_path: str, out_dir: str | None):
    """Re-check a finished run for temporal leakage."""
    try:
        config = harness.load_config(config_path)
        out = Path(out_dir) if out_dir else config.output_dir
        _, corpus_split, pool, _ = harness.prepare_corpus(config)
        bundles = []
        for path in sorted(out.glob("bundles_*.jsonl")):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        bundles.append(PromptBundle.from_dict(json.loads(line)))
        if not bundles:
            raise ValidationError(f"no bundle files found under {out}")
        audit_report = harness.audit_leakage(corpus_split, bundles, pool)
    except ValidationError as exc:
        _fail(EXIT_VALIDATION, str(exc))
    click.echo(
        f"bundles_checked={audit_report.bundles_checked} "
        f"articles_checked={audit_report.articles_checked} "
        f"violations={len(audit_report.violations)}"
    )
    for violation in audit_report.violations:
        click.echo(f"violation [{violation.kind}] {violation.subject_id}: {violation.detail}", err=True)
    if not audit_report.passed:
        sys.exit(EXIT_LEAKAGE)
    click.echo("leakage audit passed")


if __name__ == "__main__":
    main()
