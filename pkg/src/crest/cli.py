"""Command-line entry point: ``crest gen-data | train | eval | fuse-demo | ablate``.

Exit codes: 0 success, 2 usage or config error, 3 data or format error.
Metrics go to stdout as ``name=value`` lines; progress goes to stderr.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import sys
from pathlib import Path

import click
import numpy as np

from crest import synthzsl
from crest.config import load_configs
from crest.errors import ConfigError, DomainError, FormatError
from crest.subjective_logic import conflict, fuse, opinion_from_evidence, project, uniform_base_rate
from crest.trainer import evaluate, load_params, save_params, train, write_reports_csv

EXIT_USAGE = 2
EXIT_DATA = 3
DROP_TARGETS = ("edl", "vicl", "digs", "agt", "vgt")


def _fail(message, code):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _configs(path):
    try:
        return load_configs(path)
    except ConfigError as exc:
        _fail(str(exc), EXIT_USAGE)


def _dataset(path):
    try:
        return synthzsl.load(path)
    except (FormatError, DomainError) as exc:
        _fail(str(exc), EXIT_DATA)


def _params(path):
    try:
        return load_params(path)
    except (FormatError, DomainError) as exc:
        _fail(str(exc), EXIT_DATA)


def _progress(report):
    click.echo(f"epoch {report.epoch}: loss={report.loss_total:.4f} S={report.seen_acc:.4f} "
               f"U={report.unseen_acc:.4f} H={report.harmonic:.4f} ACC={report.czsl_acc:.4f}", err=True)


@click.group()
def main():
    """Evidential zero-shot learning on region features."""


@main.command("gen-data")
@click.option("--config", "config_path", type=click.Path(), default=None, help="key = value config file")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gen_data(config_path, out_dir):
    synth, _ = _configs(config_path)
    dataset = synthzsl.generate(synth)
    synthzsl.save(dataset, out_dir)
    counts = {s: int(np.sum(dataset.splits == s)) for s in synthzsl.SPLITS}
    click.echo(f"classes={synth.class_count} seen={synth.seen_count} unseen={synth.class_count - synth.seen_count} "
               + " ".join(f"{k}={v}" for k, v in counts.items()) + f" instances={len(dataset.labels)}")


@main.command("train")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def train_cmd(config_path, data_dir, out_dir):
    _, config = _configs(config_path)
    dataset = _dataset(data_dir)
    try:
        model, reports = train(dataset, config, log=_progress)
    except DomainError as exc:
        _fail(str(exc), EXIT_DATA)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_params(model, out / "params.npz")
    write_reports_csv(reports, out / "epochs.csv")
    click.echo(f"wrote {out / 'params.npz'} and {out / 'epochs.csv'}", err=True)


def _print_metrics(metrics):
    for name, value in metrics.items():
        click.echo(f"{name}={value:.4f}")


@main.command("eval")
@click.option("--params", "params_path", type=click.Path(), required=True)
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--mode", type=click.Choice(["czsl", "gzsl"], case_sensitive=False), default="gzsl")
def eval_cmd(params_path, data_dir, mode):
    model = _params(params_path)
    dataset = _dataset(data_dir)
    try:
        metrics = evaluate(model, dataset, model.config, mode.lower())
    except DomainError as exc:
        _fail(str(exc), EXIT_DATA)
    _print_metrics(metrics)


def _evidence(value, name):
    """Comma-separated numbers, inline or from a file."""
    path = Path(value)
    text = path.read_text(encoding="utf-8") if path.is_file() else value
    try:
        numbers = [float(tok) for tok in text.replace("\n", ",").split(",") if tok.strip()]
    except ValueError:
        _fail(f"{name}: not a comma-separated list of numbers", EXIT_USAGE)
    if not numbers:
        _fail(f"{name}: empty evidence vector", EXIT_USAGE)
    return np.array(numbers)


@main.command("fuse-demo")
@click.option("--evidence-a", required=True, help="comma-separated evidence, inline or a file path")
@click.option("--evidence-b", required=True)
def fuse_demo(evidence_a, evidence_b):
    e_a = _evidence(evidence_a, "--evidence-a")
    e_b = _evidence(evidence_b, "--evidence-b")
    if e_a.shape != e_b.shape:
        _fail(f"evidence lengths differ: {len(e_a)} vs {len(e_b)}", EXIT_USAGE)
    try:
        base = uniform_base_rate(len(e_a))
        op_a = opinion_from_evidence(e_a, base)
        op_b = opinion_from_evidence(e_b, base)
        fused = fuse(op_a, op_b)
    except DomainError as exc:
        _fail(str(exc), EXIT_USAGE)
    c = float(conflict(op_a, op_b))
    k = len(e_a)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["opinion"] + [f"b{i}" for i in range(k)] + ["u"] + [f"p{i}" for i in range(k)] + ["c"])
    for name, op in (("A", op_a), ("B", op_b), ("fused", fused)):
        row = list(np.asarray(op.belief)) + [float(op.uncertainty)] + list(np.asarray(project(op)))
        writer.writerow([name] + [f"{v:.6f}" for v in row] + [f"{c:.6f}"])


ABLATION_FIELDS = ("variant", "S", "U", "H", "ACC")


def ablated_config(config, drop):
    """(config, mu override) for the variant without ``drop``."""
    if drop == "edl":
        return dataclasses.replace(config, lambda_edl=0.0, fusion_mode="plain_average"), None
    if drop == "vicl":
        return dataclasses.replace(config, vicl_weight=0.0), None
    if drop == "digs":
        return dataclasses.replace(config, digs_weight=0.0), None
    if drop == "agt":
        return dataclasses.replace(config, mu=0.0), 0.0
    if drop == "vgt":
        return dataclasses.replace(config, mu=1.0), 1.0
    raise ConfigError(f"unknown drop target {drop!r}")


def run_ablation(dataset, config, drop, log=None):
    """Train full and ablated models with the same seed; returns the two metric rows."""
    rows = []
    for variant, (cfg, mu) in (("full", (config, None)), (f"without_{drop}", ablated_config(config, drop))):
        model, _ = train(dataset, cfg, log=log)
        gz = evaluate(model, dataset, cfg, "gzsl", mu=mu)
        cz = evaluate(model, dataset, cfg, "czsl", mu=mu)
        rows.append({"variant": variant, "S": gz["S"], "U": gz["U"], "H": gz["H"], "ACC": cz["ACC"]})
    return rows


def ablation_csv(rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ABLATION_FIELDS)
    for row in rows:
        writer.writerow([row["variant"]] + [f"{row[k]:.4f}" for k in ABLATION_FIELDS[1:]])
    return buf.getvalue()


@main.command("ablate")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--data", "data_dir", type=click.Path(), required=True)
@click.option("--drop", type=click.Choice(DROP_TARGETS), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="also write the CSV here")
def ablate(config_path, data_dir, drop, out_path):
    _, config = _configs(config_path)
    dataset = _dataset(data_dir)
    try:
        rows = run_ablation(dataset, config, drop, log=_progress)
    except DomainError as exc:
        _fail(str(exc), EXIT_DATA)
    text = ablation_csv(rows)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    click.echo(text, nl=False)


if __name__ == "__main__":
    main()
