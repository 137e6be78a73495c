"""Training loop, evaluation and per-epoch diagnostics."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import time
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crest.config import TrainConfig
from crest.digs import digs_components
from crest.edl import AnnealSchedule, EdlWeights, edl_total, fuse_alpha, one_hot
from crest.errors import DomainError, FormatError
from crest.grounding import evidence_head
from crest.inference import (
    FusionCoefficients,
    arise_loss,
    czsl_metrics,
    fused_embedding,
    gzsl_metrics,
    harmonic_mean,
    predict,
    total_loss,
)
from crest.model import CrestModel
from crest.numgraph import Adam
from crest.subjective_logic import conflict, opinion_from_alpha
from crest.vicl import ContrastiveBatch, vicl_loss


@dataclass
class EpochReport:
    epoch: int
    loss_total: float
    loss_arise: float
    loss_vicl: float
    loss_digs: float
    loss_edl: float
    uncertainty_attribute: float
    uncertainty_visual: float
    uncertainty_fused: float
    conflict: float
    seen_acc: float
    unseen_acc: float
    harmonic: float
    czsl_acc: float
    seconds: float = 0.0

    # wall-clock time varies run to run, so it stays out of the CSV
    CSV_FIELDS = ("epoch", "loss_total", "loss_arise", "loss_vicl", "loss_digs", "loss_edl",
                  "uncertainty_attribute", "uncertainty_visual", "uncertainty_fused", "conflict",
                  "seen_acc", "unseen_acc", "harmonic", "czsl_acc")


def coefficients(config, mu=None):
    return FusionCoefficients(
        mu=config.mu if mu is None else mu,
        lambda_cal=config.lambda_cal,
        lambda_edl=config.lambda_edl,
        indicator=config.indicator,
    )


@dataclass
class BatchResult:
    total: object
    components: dict
    diagnostics: dict


def batch_objective(model, features, labels, semantics, config, epoch):
    """Assemble the full training loss for one batch of seen-class instances."""
    out = model.forward(features)
    f_attr = out.features.f_attribute
    f_vis = out.features.f_visual
    coeffs = coefficients(config)

    arise = arise_loss(fused_embedding(f_attr, f_vis, coeffs.mu), labels, semantics, coeffs)
    vicl = vicl_loss(ContrastiveBatch(f_vis, labels, config.temperature, config.similarity_threshold))
    triplet, compact = digs_components(out.bank.queries, model.bank.patterns, config.margin)
    digs = triplet + compact

    # the Dirichlet for training covers the seen classes the labels can name
    z_seen = semantics.z[semantics.seen_ids]
    y = one_hot(np.searchsorted(semantics.seen_ids, labels), len(semantics.seen_ids))
    alphas = [evidence_head(f_attr, z_seen, config.evidence_activation),
              evidence_head(f_vis, z_seen, config.evidence_activation)]
    schedule = AnnealSchedule(config.annealing_steps, epoch)
    edl = edl_total(alphas, y, schedule, EdlWeights(config.beta, config.gamma), config.fusion_mode)

    total = total_loss(arise, vicl, digs, edl, config.lambda_edl, config.vicl_weight, config.digs_weight)
    components = {"total": total.item(), "arise": arise.item(), "vicl": vicl.item(),
                  "digs": digs.item(), "edl": edl.item()}
    diagnostics = _uncertainty_diagnostics([a.data for a in alphas], config.fusion_mode)
    return BatchResult(total, components, diagnostics)


def _uncertainty_diagnostics(alphas, fusion_mode):
    k = alphas[0].shape[-1]
    fused = fuse_alpha(alphas, fusion_mode)
    opinions = [opinion_from_alpha(a) for a in alphas]
    return {
        "attribute": k / alphas[0].sum(axis=-1),
        "visual": k / alphas[1].sum(axis=-1),
        "fused": k / np.asarray(fused).sum(axis=-1),
        "conflict": np.asarray(conflict(opinions[0], opinions[1])),
    }


def instance_diagnostics(model, dataset, indices, config):
    """Per-instance uncertainties and conflict over all classes for ``indices``."""
    fa, fv = model.embed(dataset.features[indices])
    z = dataset.semantics.z
    alphas = [evidence_head(fa, z, config.evidence_activation).data,
              evidence_head(fv, z, config.evidence_activation).data]
    return _uncertainty_diagnostics(alphas, config.fusion_mode)


def evaluate(model, dataset, config, mode="gzsl", mu=None, embeddings=None):
    """CZSL accuracy or GZSL (S, U, H) on the test splits."""
    coeffs = coefficients(config, mu)
    mode = mode.lower()
    if mode == "czsl":
        idx = dataset.indices("test_unseen")
    elif mode == "gzsl":
        idx = np.concatenate([dataset.indices("test_seen"), dataset.indices("test_unseen")])
    else:
        raise DomainError(f"unknown mode {mode!r}")
    if len(idx) == 0:
        raise DomainError(f"no test instances for {mode}")
    if embeddings is None:
        fa, fv = model.embed(dataset.features[idx])
    else:
        fa, fv = embeddings[0][idx], embeddings[1][idx]
    preds = predict(fa, fv, dataset.semantics, coeffs, mode)
    labels = dataset.labels[idx]
    if mode == "czsl":
        return {"ACC": czsl_metrics(preds, labels, dataset.semantics)}
    s, u, h = gzsl_metrics(preds, labels, dataset.semantics)
    return {"S": s, "U": u, "H": h}


def train(dataset, config, model=None, log=None):
    """Train on ``train_seen``; returns (model, list of EpochReport)."""
    train_idx = dataset.indices("train_seen")
    if len(train_idx) == 0:
        raise DomainError("empty training split")
    _, n_regions, width = dataset.features.shape
    if model is None:
        model = CrestModel(dataset.semantics.z.shape[1], n_regions, width, config)
    optimizer = Adam(model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed + 1)
    test_idx = np.concatenate([dataset.indices("test_seen"), dataset.indices("test_unseen")])
    reports = []
    for epoch in range(config.epochs):
        start = time.perf_counter()
        order = rng.permutation(train_idx)
        sums = {k: 0.0 for k in ("total", "arise", "vicl", "digs", "edl")}
        diag = {k: [] for k in ("attribute", "visual", "fused", "conflict")}
        n_batches = 0
        for b in range(0, len(order), config.batch_size):
            batch = order[b:b + config.batch_size]
            if len(batch) < 2:
                continue  # the contrastive loss needs a partner for every anchor
            result = batch_objective(model, dataset.features[batch], dataset.labels[batch],
                                     dataset.semantics, config, epoch)
            if not np.isfinite(result.total.item()):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            optimizer.zero_grad()
            result.total.backward()
            optimizer.step()
            for k, v in result.components.items():
                sums[k] += v
            for k, v in result.diagnostics.items():
                diag[k].append(v)
            n_batches += 1
        means = {k: v / max(n_batches, 1) for k, v in sums.items()}
        unc = {k: float(np.mean(np.concatenate(v))) if v else float("nan") for k, v in diag.items()}

        embeddings = [np.zeros((len(dataset.labels), model.n_attributes)) for _ in range(2)]
        if len(test_idx):
            fa, fv = model.embed(dataset.features[test_idx])
            embeddings[0][test_idx], embeddings[1][test_idx] = fa, fv
        gz = evaluate(model, dataset, config, "gzsl", embeddings=embeddings)
        cz = evaluate(model, dataset, config, "czsl", embeddings=embeddings)
        report = EpochReport(
            epoch=epoch,
            loss_total=means["total"], loss_arise=means["arise"], loss_vicl=means["vicl"],
            loss_digs=means["digs"], loss_edl=means["edl"],
            uncertainty_attribute=unc["attribute"], uncertainty_visual=unc["visual"],
            uncertainty_fused=unc["fused"], conflict=unc["conflict"],
            seen_acc=gz["S"], unseen_acc=gz["U"], harmonic=harmonic_mean(gz["S"], gz["U"]),
            czsl_acc=cz["ACC"], seconds=time.perf_counter() - start,
        )
        reports.append(report)
        if log is not None:
            log(report)
    return model, reports


# -- serialisation -------------------------------------------------------------

def write_reports_csv(reports, path):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EpochReport.CSV_FIELDS)
    for r in reports:
        writer.writerow([r.epoch] + [repr(float(getattr(r, f))) for f in EpochReport.CSV_FIELDS[1:]])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_reports_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != EpochReport.CSV_FIELDS:
        raise FormatError(f"{path}: unexpected header")
    out = []
    for row in rows[1:]:
        values = [int(row[0])] + [float(v) for v in row[1:]]
        out.append(EpochReport(**dict(zip(EpochReport.CSV_FIELDS, values))))
    return out


def save_params(model, path):
    meta = {
        "n_attributes": model.n_attributes,
        "n_regions": model.n_regions,
        "feature_width": model.feature_width,
        "config": dataclasses.asdict(model.config),
    }
    arrays = {"__meta__": np.array(json.dumps(meta, sort_keys=True)), **model.state_arrays()}
    # np.savez stamps the current time into each entry; a fixed stamp keeps files bitwise stable
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        for name in sorted(arrays):
            info = zipfile.ZipInfo(name + ".npy", date_time=(1980, 1, 1, 0, 0, 0))
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.asarray(arrays[name]), allow_pickle=False)
            zf.writestr(info, buf.getvalue())


def load_params(path):
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as npz:
            arrays = {k: npz[k] for k in npz.files}
        meta = json.loads(str(arrays.pop("__meta__")))
        config = TrainConfig(**meta["config"])
        model = CrestModel(meta["n_attributes"], meta["n_regions"], meta["feature_width"], config)
    except FileNotFoundError:
        raise FormatError(f"{path}: no such file") from None
    except (OSError, ValueError, KeyError, TypeError, EOFError, zipfile.BadZipFile) as exc:
        raise FormatError(f"{path}: not a valid parameter file ({exc})") from None
    model.load_state_arrays(arrays)
    return model
