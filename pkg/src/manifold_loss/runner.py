"""Grid execution: one training run per (configuration cell, seed),
per-cell CSV files, a JSON summary, and report figures.

A configuration cell is a '+'-joined preset chain ("cdc+epochR") applied
over the base config. The summary reports per-cell mean/std of the final
validation PSNR/SSIM and the delta against the "original" cell.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import statistics
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import data as data_mod
from . import train as train_mod
from .config import ExperimentConfig, apply_cell
from .train import TrainingDiverged

CSV_COLUMNS = [
    "config_label", "seed", "epoch", "base_loss", "prior_loss",
    "total_loss", "val_psnr", "val_ssim", "seconds",
]


def _cell_filename(label: str, seed: int) -> str:
    safe = label.replace("+", "_")
    return f"{safe}__seed{seed}.csv"


def run_cell(base_cfg: ExperimentConfig, label: str, seed: int):
    """One training run; returns (records, model) or raises."""
    cfg = apply_cell(base_cfg, label) if label != "custom" else base_cfg
    return train_mod.train(cfg.dataset, cfg.model, cfg.loss, cfg.optimizer, seed)


def _run_cell_entry(args):
    base_cfg, label, seed = args
    try:
        records, _ = run_cell(base_cfg, label, seed)
        return label, seed, records, None
    except TrainingDiverged as exc:
        return label, seed, [], f"aborted: {exc}"


def write_cell_csv(path, label, seed, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([
                label, seed, r.epoch,
                repr(float(r.base_loss)), repr(float(r.prior_loss)),
                repr(float(r.total_loss)), repr(float(r.val_psnr)),
                repr(float(r.val_ssim)), repr(float(r.seconds)),
            ])


def read_cell_csvs(directory):
    """Load every per-cell CSV under a directory back into record rows."""
    rows = []
    for path in sorted(Path(directory).glob("*.csv")):
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rows.append({
                    "config_label": row["config_label"],
                    "seed": int(row["seed"]),
                    "epoch": int(row["epoch"]),
                    "base_loss": float(row["base_loss"]),
                    "prior_loss": float(row["prior_loss"]),
                    "total_loss": float(row["total_loss"]),
                    "val_psnr": float(row["val_psnr"]),
                    "val_ssim": float(row["val_ssim"]),
                    "seconds": float(row["seconds"]),
                })
    return rows


def summarize(rows, statuses=None):
    """Per-cell mean/std of final PSNR/SSIM plus delta vs the Original cell."""
    statuses = statuses or {}
    finals = {}  # label -> {seed: (psnr, ssim)}
    for row in rows:
        cell = finals.setdefault(row["config_label"], {})
        seed = row["seed"]
        if seed not in cell or row["epoch"] > cell[seed][0]:
            cell[seed] = (row["epoch"], row["val_psnr"], row["val_ssim"])

    def stats(values):
        return {
            "mean": statistics.fmean(values),
            "std": statistics.pstdev(values) if len(values) > 1 else 0.0,
        }

    cells = {}
    orig_mean = None
    if "original" in finals:
        orig_mean = statistics.fmean(v[1] for v in finals["original"].values())
    runs = []
    for label in sorted(finals):
        per_seed = finals[label]
        psnrs = [v[1] for v in per_seed.values()]
        ssims = [v[2] for v in per_seed.values()]
        cells[label] = {
            "seeds": sorted(per_seed),
            "final_psnr": {**stats(psnrs),
                           "per_seed": {str(s): per_seed[s][1] for s in sorted(per_seed)}},
            "final_ssim": {**stats(ssims),
                           "per_seed": {str(s): per_seed[s][2] for s in sorted(per_seed)}},
            "delta_psnr_vs_original": (
                statistics.fmean(psnrs) - orig_mean if orig_mean is not None else None
            ),
        }
        for s in sorted(per_seed):
            runs.append({
                "config_label": label, "seed": s,
                "final_psnr": per_seed[s][1], "final_ssim": per_seed[s][2],
                "status": statuses.get((label, s), "ok"),
            })
    for (label, seed), status in statuses.items():
        if status != "ok" and not any(
            r["config_label"] == label and r["seed"] == seed for r in runs
        ):
            runs.append({
                "config_label": label, "seed": seed,
                "final_psnr": None, "final_ssim": None, "status": status,
            })
    return {"cells": cells, "runs": runs}


def _dump_images(cfg: ExperimentConfig, label, seed, model, out_dir):
    idx = data_mod.val_indices(cfg.dataset)[0]
    clean, noisy = data_mod.gen_synthetic_pair(cfg.dataset, idx)
    pred = model.forward(noisy)
    stem = _cell_filename(label, seed)[:-4]
    data_mod.write_pgm(out_dir / f"{stem}__clean.pgm", clean)
    data_mod.write_pgm(out_dir / f"{stem}__noisy.pgm", noisy)
    data_mod.write_pgm(out_dir / f"{stem}__denoised.pgm", pred.clip(0, 1))


def run_experiment(cfg: ExperimentConfig, cells=None, jobs=1,
                   dump_images=False, figures=True):
    """Execute the grid; returns (summary dict, number of aborted runs)."""
    cells = cells or ["custom"]
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(cfg, label, seed) for label in cells for seed in cfg.seeds]
    statuses = {}
    all_rows = []
    n_aborted = 0

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell_entry, tasks))
    else:
        results = []
        for task in tasks:
            if dump_images and jobs == 1:
                # keep the model around for image dumps in the serial path
                base_cfg, label, seed = task
                try:
                    records, model = run_cell(base_cfg, label, seed)
                    _dump_images(apply_cell(base_cfg, label) if label != "custom"
                                 else base_cfg, label, seed, model, out_dir)
                    results.append((label, seed, records, None))
                except TrainingDiverged as exc:
                    results.append((label, seed, [], f"aborted: {exc}"))
            else:
                results.append(_run_cell_entry(task))

    for label, seed, records, error in results:
        statuses[(label, seed)] = error or "ok"
        if error:
            n_aborted += 1
        if records:
            write_cell_csv(out_dir / _cell_filename(label, seed), label, seed, records)
            for r in records:
                all_rows.append({
                    "config_label": label, "seed": seed,
                    **dataclasses.asdict(r),
                })

    summary = summarize(all_rows, statuses)
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if figures:
        from . import report
        report.render_figures(all_rows, summary, out_dir)
    return summary, n_aborted


def analyze(directory, figures=True):
    """Regenerate summary.json (and figures) from the CSVs in a directory."""
    directory = Path(directory)
    rows = read_cell_csvs(directory)
    summary = summarize(rows)
    (directory / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    if figures:
        from . import report
        report.render_figures(rows, summary, directory)
    return summary
