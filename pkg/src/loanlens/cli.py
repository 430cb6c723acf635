"""Operator command line: generate, train, audit, simulate, analyze, serve."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click

from . import culture
from .analysis import study_report
from .dataset import Dataset, load_csv, load_schema, prune_attributes, save_csv, save_schema, split
from .errors import LoanLensError
from .fairness import (
    balanced_accuracy,
    audit_model,
    disparate_impact,
    fairness_delta,
    group_spec_for,
)
from .feedback import EventLog, aggregate
from .model import load_model, predict_all, save_model, train
from .service import replay_state
from .simulate import load_cohort_spec, run_cohort
from .synthetic import DEFAULT_BIAS_STRENGTH, generate_synthetic

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _config_callback(ctx: click.Context, param: click.Parameter, value):
    if value:
        with open(value, "rb") as fh:
            data = tomllib.load(fh)
        overrides = {key.replace("-", "_"): val for key, val in data.items()}
        ctx.default_map = {**(ctx.default_map or {}), **overrides}
    return value


def config_option(f):
    return click.option(
        "--config",
        type=click.Path(exists=True, dir_okay=False),
        callback=_config_callback,
        is_eager=True,
        expose_value=False,
        help="TOML key=value file supplying defaults; explicit flags win.",
    )(f)


def _load_dataset(dataset_path: str, schema_path: str | None) -> Dataset:
    if schema_path is None:
        schema_path = str(Path(dataset_path).with_suffix("")) + ".schema.json"
    specs, label_name, metadata = load_schema(schema_path)
    return load_csv(dataset_path, specs, label_name=label_name, metadata=metadata)


def _cleaned(dataset: Dataset, max_missing_rate: float) -> Dataset:
    return prune_attributes(dataset, max_missing_rate)


def _part_for(model, dataset: Dataset, on: str) -> Dataset:
    if on == "all":
        return dataset
    info = (model.training.split if model.training else {}) or {}
    if "train_fraction" not in info:
        raise click.ClickException(
            "model records no split; use --on all or retrain with the CLI"
        )
    train_part, test_part = split(dataset, info["train_fraction"], info["seed"])
    return train_part if on == "train" else test_part


@click.group()
def main():
    """Fairness debugging workbench for loan decisions."""


@main.command()
@config_option
@click.option("--synthetic-n", default=1000, show_default=True, help="Applications to generate.")
@click.option("--seed", default=0, show_default=True)
@click.option("--bias", default=DEFAULT_BIAS_STRENGTH, show_default=True,
              help="Penalty applied to foreign applicants' latent utility.")
@click.option("--out", default="data", show_default=True,
              help="Output directory for applications.csv + applications.schema.json.")
def generate(synthetic_n: int, seed: int, bias: float, out: str):
    """Write a synthetic biased dataset (CSV plus schema sidecar)."""
    try:
        dataset = generate_synthetic(synthetic_n, seed, bias)
    except LoanLensError as exc:
        raise click.ClickException(str(exc))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "applications.csv"
    save_csv(dataset, csv_path)
    save_schema(dataset, out_dir / "applications.schema.json")
    accepted = sum(1 for a in dataset.applications if a.label == "accepted")
    click.echo(
        f"wrote {len(dataset.applications)} applications "
        f"({accepted} accepted) to {csv_path}"
    )


@main.command(name="train")
@config_option
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True),
              help="Schema sidecar; defaults to <dataset>.schema.json.")
@click.option("--train-fraction", default=0.7, show_default=True)
@click.option("--l2", default=1.0, show_default=True, help="L2 regularization strength.")
@click.option("--seed", default=0, show_default=True)
@click.option("--max-missing-rate", default=0.10, show_default=True)
@click.option("--out", default="model.json", show_default=True)
def train_cmd(dataset_path, schema_path, train_fraction, l2, seed, max_missing_rate, out):
    """Clean, split, and train; writes the model file and prints balanced accuracy."""
    try:
        raw = _load_dataset(dataset_path, schema_path)
        cleaned = _cleaned(raw, max_missing_rate)
        train_part, test_part = split(cleaned, train_fraction, seed)
        click.echo(
            f"split: {len(train_part.applications)} train / "
            f"{len(test_part.applications)} test "
            f"({len(cleaned.attributes)} attributes after pruning)"
        )
        model = train(train_part, l2_strength=l2, seed=seed)
        preds = predict_all(model, test_part.applications)
        truth = [a.label for a in test_part.applications]
        ba = balanced_accuracy(preds, truth)
    except LoanLensError as exc:
        raise click.ClickException(str(exc))
    save_model(model, out)
    click.echo(f"balanced accuracy (test): {ba:.3f}")
    click.echo(f"wrote model to {out}")


@main.command()
@config_option
@click.option("--model", "model_path", default=None, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", default=None, type=click.Path(exists=True))
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True))
@click.option("--decisions", "decisions_path", default=None, type=click.Path(exists=True),
              help="CSV with group,decision columns; bypasses the model.")
@click.option("--group-attribute", default="nationality", show_default=True)
@click.option("--protected", default="foreign", show_default=True)
@click.option("--on", default="all", type=click.Choice(["all", "train", "test"]),
              show_default=True, help="Which split of the dataset to audit.")
@click.option("--max-missing-rate", default=0.10, show_default=True)
@click.option("--json", "json_out", default=None, type=click.Path(),
              help="Also write the report as JSON.")
def audit(model_path, dataset_path, schema_path, decisions_path, group_attribute,
          protected, on, max_missing_rate, json_out):
    """Disparate-impact report for a model on a dataset, or for a decisions file."""
    try:
        if decisions_path is not None:
            rows = list(csv.DictReader(open(decisions_path, encoding="utf-8")))
            if not rows or "group" not in rows[0] or "decision" not in rows[0]:
                raise click.ClickException(
                    "decisions file needs group,decision columns"
                )
            memberships = sorted({r["group"] for r in rows})
            if protected not in memberships:
                raise click.ClickException(
                    f"protected group {protected!r} absent from decisions file"
                )
            from .fairness import GroupSpec

            group = GroupSpec(
                attribute=group_attribute,
                protected_value=protected,
                reference_values=tuple(m for m in memberships if m != protected),
            )
            report = disparate_impact(
                [(r["group"], r["decision"]) for r in rows], group
            )
        else:
            if model_path is None or dataset_path is None:
                raise click.ClickException(
                    "audit needs either --decisions or both --model and --dataset"
                )
            model = load_model(model_path)
            cleaned = _cleaned(_load_dataset(dataset_path, schema_path), max_missing_rate)
            part = _part_for(model, cleaned, on)
            group = group_spec_for(model, group_attribute, protected)
            report = audit_model(model, part, group)
    except LoanLensError as exc:
        raise click.ClickException(str(exc))
    click.echo(report.render_text())
    if json_out:
        Path(json_out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    sys.exit(0)


@main.command()
@config_option
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True))
@click.option("--cohort", "cohort_path", required=True, type=click.Path(exists=True),
              help="TOML cohort strategy spec.")
@click.option("--on", default="test", type=click.Choice(["all", "train", "test"]),
              show_default=True)
@click.option("--group-attribute", default="nationality", show_default=True)
@click.option("--protected", default="foreign", show_default=True)
@click.option("--max-missing-rate", default=0.10, show_default=True)
@click.option("--out-log", default="simulated-events.ndjson", show_default=True)
def simulate(model_path, dataset_path, schema_path, cohort_path, on,
             group_attribute, protected, max_missing_rate, out_log):
    """Run a scripted cohort against the model; writes its event log and
    prints the before/after disparate impact."""
    try:
        model = load_model(model_path)
        cleaned = _cleaned(_load_dataset(dataset_path, schema_path), max_missing_rate)
        part = _part_for(model, cleaned, on)
        spec = load_cohort_spec(cohort_path)
        run = run_cohort(spec, model, part.applications)
        group = group_spec_for(model, group_attribute, protected)
        adjusted = aggregate(run.suggestions, model, part.applications)
        before, after = fairness_delta(adjusted, group)
    except LoanLensError as exc:
        raise click.ClickException(str(exc))
    log = EventLog(out_log)
    Path(out_log).unlink(missing_ok=True)
    for event in run.events:
        log.append(event)
    click.echo(
        f"cohort of {spec.size}: {len(run.suggestions)} suggestions, "
        f"{len(run.judgments)} judgments -> {out_log}"
    )
    click.echo(f"DI before: {before.disparate_impact:.4f} ({before.verdict})")
    click.echo(f"DI after:  {after.disparate_impact:.4f} ({after.verdict})")


@main.command()
@config_option
@click.option("--logs", "log_paths", required=True, multiple=True,
              type=click.Path(exists=True), help="Event logs (repeatable).")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True))
@click.option("--on", default="test", type=click.Choice(["all", "train", "test"]),
              show_default=True)
@click.option("--group-attribute", default="nationality", show_default=True)
@click.option("--protected", default="foreign", show_default=True)
@click.option("--culture-matrix", default=None, type=click.Path(exists=True))
@click.option("--neighbors", default=None, type=click.Path(exists=True))
@click.option("--max-missing-rate", default=0.10, show_default=True)
@click.option("--out", default=None, type=click.Path(), help="Write the report JSON here.")
def analyze(log_paths, model_path, dataset_path, schema_path, on, group_attribute,
            protected, culture_matrix, neighbors, max_missing_rate, out):
    """Cultural-dimension study report from recorded event logs."""
    try:
        model = load_model(model_path)
        cleaned = _cleaned(_load_dataset(dataset_path, schema_path), max_missing_rate)
        part = _part_for(model, cleaned, on)
        merged_sessions: dict[str, str] = {}
        judgments = []
        suggestions = []
        post_ratings: dict[str, float] = {}
        for path in log_paths:
            state = replay_state(EventLog(path))
            for sid, record in state.sessions.items():
                merged_sessions[sid] = record.country
                if record.post_rating is not None:
                    post_ratings[sid] = float(record.post_rating)
            judgments.extend(state.judgments)
            suggestions.extend(state.suggestions)

        matrix = culture.load_scores(culture_matrix, neighbors)
        groupings = culture.assign_groups(merged_sessions, matrix)
        group = group_spec_for(model, group_attribute, protected)
        original = audit_model(model, part, group)
        di_by_group = {}
        for grouping in groupings:
            reports = culture.group_fairness_delta(
                grouping, suggestions, model, part.applications, group
            )
            di_by_group[grouping.dimension] = {
                side: report.disparate_impact for side, report in reports.items()
            }
        report = study_report(
            merged_sessions,
            judgments,
            groupings,
            di_by_group=di_by_group,
            original_report=original,
            post_ratings=post_ratings,
        )
    except LoanLensError as exc:
        raise click.ClickException(str(exc))
    click.echo(report.render_text())
    if out:
        Path(out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
        click.echo(f"wrote report to {out}")


@main.command()
@config_option
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--schema", "schema_path", default=None, type=click.Path(exists=True))
@click.option("--log-dir", default="logs", show_default=True)
@click.option("--serve-split", default="test", type=click.Choice(["all", "train", "test"]),
              show_default=True)
@click.option("--max-missing-rate", default=0.10, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(model_path, dataset_path, schema_path, log_dir, serve_split,
          max_missing_rate, host, port):
    """Serve the workbench API over the chosen split of the dataset."""
    try:
        model = load_model(model_path)
        cleaned = _cleaned(_load_dataset(dataset_path, schema_path), max_missing_rate)
        part = _part_for(model, cleaned, serve_split)
    except LoanLensError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"serving {len(part.applications)} applications on http://{host}:{port}"
    )
    from .service import serve as run_service

    run_service(model, part, log_dir, host=host, port=port)


if __name__ == "__main__":
    main()
