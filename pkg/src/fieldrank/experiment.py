"""End-to-end experiment runner: ingest, folds, train/eval grid, stats, report.

An experiment is driven by one JSON config naming the data files, a grid of
model variants, the comparisons to test, and the seeds. Fold x variant jobs
run in a process pool; a single collector writes the bundle in canonical
order, so identical config + seeds produce a byte-identical bundle
regardless of worker count.

Bundle layout under the output directory:

    eval/<variant>.json              per-fold NDCG report
    eval/<variant>.components.json   FwFM component scores (fwfm variants)
    eval/<variant>.hist.csv          component histograms by label
    stats/stats.json, stats/stats.csv
    logs/ingest.log, logs/<variant>.foldNN.csv, logs/vocab.foldNN.tsv
    checkpoints/<variant>.foldNN.ckpt
    summary.txt, summary.csv
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import (
    FoldSet,
    IngestLog,
    build_query_groups,
    load_documents,
    load_search_log,
    pipeline_stats,
    temporal_split,
)
from .errors import BundleError, ConfigError
from .evaluation import (
    ComponentScoreTable,
    EvalReport,
    component_distributions,
    evaluate_groups,
)
from .models import ModelConfig, RankingModel
from .params import ParamStore, save_checkpoint, load_checkpoint
from .significance import paired_t_test, tukey_hsd
from .synth import SynthSpec, generate as synth_generate
from .text import build_categories, build_vocab, index_groups
from .training import Hyperparams, train_ranker

RANDOM_BASELINE = "random-baseline"


@dataclass
class ExperimentConfig:
    documents_path: str
    logs_path: str
    output_dir: str
    variants: list[tuple[str, ModelConfig]]
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    synth: SynthSpec | None = None
    seed: int = 0
    k: int = 20
    n_folds: int = 10
    t_test_pairs: list[tuple[str, str]] = field(default_factory=list)
    tukey_groups: list[list[str]] = field(default_factory=list)
    include_random_baseline: bool = True
    tukey_draws: int = 200_000
    jobs: int | None = None

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        known = {
            "data",
            "output_dir",
            "variants",
            "hyperparams",
            "synth",
            "seed",
            "k",
            "n_folds",
            "t_test_pairs",
            "tukey_groups",
            "include_random_baseline",
            "tukey_draws",
            "jobs",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        base = base_dir or Path(".")

        data = d.get("data") or {}
        for key in ("documents", "logs"):
            if key not in data:
                raise ConfigError(f"config data section is missing '{key}'")

        raw_variants = d.get("variants") or []
        if not raw_variants:
            raise ConfigError("config declares no model variants")
        variants: list[tuple[str, ModelConfig]] = []
        names = set()
        for v in raw_variants:
            v = dict(v)
            name = v.pop("name", None)
            if not name:
                raise ConfigError("every variant needs a name")
            if name in names or name == RANDOM_BASELINE:
                raise ConfigError(f"duplicate or reserved variant name '{name}'")
            names.add(name)
            variants.append((name, ModelConfig.from_dict(v)))

        for a, b in d.get("t_test_pairs", []):
            for n in (a, b):
                if n not in names and n != RANDOM_BASELINE:
                    raise ConfigError(f"t-test pair references unknown variant '{n}'")
        for group in d.get("tukey_groups", []):
            if len(group) < 2:
                raise ConfigError("a Tukey comparison needs at least 2 variants")
            for n in group:
                if n not in names and n != RANDOM_BASELINE:
                    raise ConfigError(f"Tukey group references unknown variant '{n}'")

        return cls(
            documents_path=str(base / data["documents"]),
            logs_path=str(base / data["logs"]),
            output_dir=str(base / d.get("output_dir", "out")),
            variants=variants,
            hyperparams=Hyperparams.from_dict(d.get("hyperparams", {})),
            synth=SynthSpec.from_dict(d["synth"]) if d.get("synth") else None,
            seed=int(d.get("seed", 0)),
            k=int(d.get("k", 20)),
            n_folds=int(d.get("n_folds", 10)),
            t_test_pairs=[tuple(p) for p in d.get("t_test_pairs", [])],
            tukey_groups=[list(g) for g in d.get("tukey_groups", [])],
            include_random_baseline=bool(d.get("include_random_baseline", True)),
            tukey_draws=int(d.get("tukey_draws", 200_000)),
            jobs=d.get("jobs"),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f), base_dir=path.parent)


def job_seed(master: int, variant: str, fold: int) -> int:
    """Stable per-job seed independent of process or platform."""
    digest = hashlib.sha256(f"{master}:{variant}:{fold}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def ingest(config: ExperimentConfig) -> tuple[FoldSet, IngestLog, dict]:
    """Load and label the data, split into folds, and summarize."""
    for path in (config.documents_path, config.logs_path):
        if not os.path.exists(path):
            raise ConfigError(f"data file does not exist: {path}")
    log = IngestLog()
    corpus = load_documents(config.documents_path, log)
    events = load_search_log(config.logs_path, log)
    groups = build_query_groups(events, corpus, log)
    folds = temporal_split(groups, n_folds=config.n_folds)
    stats = pipeline_stats(groups, folds)
    stats["rejected_documents"] = log.rejected_documents
    stats["rejected_events"] = log.rejected_events
    stats["dropped_groups"] = log.dropped_groups
    return folds, log, stats


def _run_job(payload: dict) -> dict:
    """Train one (variant, fold) job; returns a plain picklable payload."""
    model_config = ModelConfig.from_dict(payload["model_config"])
    hyper = Hyperparams.from_dict(payload["hyperparams"])
    result = train_ranker(model_config, payload["train"], payload["validation"], hyper)

    val_multi = [g for g in payload["validation"] if not g.is_single_doc]
    indexed_val = index_groups(val_multi, result.vocab, result.categories)
    from .models import score_groups

    scored = score_groups(result.model, indexed_val)
    fold_eval = evaluate_groups(
        scored, [g.labels for g in indexed_val], payload["k"]
    )

    out = {
        "variant": payload["variant"],
        "fold": payload["fold"],
        "mean_ndcg": fold_eval.mean_ndcg,
        "n_groups": fold_eval.n_groups,
        "n_excluded": sum(1 for g in payload["validation"] if g.is_single_doc),
        "n_parameters": result.model.n_parameters(),
        "log": [(e.epoch, e.train_loss, e.val_ndcg) for e in result.log],
        "params": [(name, p.value.copy()) for name, p in result.model.store.items()],
        "seed": model_config.seed,
        "config_hash": model_config.hash(),
    }
    if payload["collect_components"]:
        from .models import make_item_batch

        items = [(g, i) for g in indexed_val for i in range(len(g.docs))]
        matrix = result.model.component_scores(make_item_batch(items))
        out["components"] = {
            "names": result.model.component_names(),
            "scores": matrix,
            "labels": np.concatenate([g.labels for g in indexed_val]),
        }
    return out


def _baseline_report(config: ExperimentConfig, folds: FoldSet) -> EvalReport:
    """Empirical NDCG of seeded random scores; measured, never assumed."""
    fold_means, n_groups, n_excluded = [], [], []
    for fi, fold in enumerate(folds):
        rng = np.random.default_rng([config.seed, fi, 0xBA5E])
        multi = [g for g in fold.validation if not g.is_single_doc]
        scores = [rng.normal(size=len(g.documents)) for g in multi]
        fe = evaluate_groups(scores, [g.labels for g in multi], config.k)
        fold_means.append(fe.mean_ndcg)
        n_groups.append(fe.n_groups)
        n_excluded.append(len(fold.validation) - len(multi))
    return EvalReport(
        variant=RANDOM_BASELINE,
        k=config.k,
        fold_ndcg=fold_means,
        n_groups=n_groups,
        n_excluded=n_excluded,
        config_hash="none",
        n_parameters=0,
    )


def _bundle_dirs(out_dir: Path) -> dict[str, Path]:
    dirs = {name: out_dir / name for name in ("eval", "stats", "logs", "checkpoints")}
    for p in dirs.values():
        p.mkdir(parents=True, exist_ok=True)
    return dirs


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def run_experiment(config: ExperimentConfig, train_stage=True, eval_stage=True,
                   stats_stage=True, report_stage=True) -> dict:
    """Execute the configured pipeline end to end and write the bundle."""
    if config.synth is not None:
        synth_generate(
            config.synth,
            config.documents_path,
            config.logs_path,
            str(Path(config.documents_path).with_suffix(".manifest.json")),
        )

    out_dir = Path(config.output_dir)
    dirs = _bundle_dirs(out_dir)
    folds, log, data_stats = ingest(config)
    log.write(dirs["logs"] / "ingest.log")
    _write_json(dirs["logs"] / "pipeline.json", data_stats)

    for fi, fold in enumerate(folds):
        vocab = build_vocab(fold.train, config.hyperparams.min_count)
        vocab.dump(dirs["logs"] / f"vocab.fold{fi:02d}.tsv")

    jobs = []
    for name, model_config in config.variants:
        for fi, fold in enumerate(folds):
            jobs.append(
                {
                    "variant": name,
                    "fold": fi,
                    "model_config": model_config.with_seed(
                        job_seed(config.seed, name, fi)
                    ).to_dict(),
                    "hyperparams": config.hyperparams.__dict__,
                    "train": fold.train,
                    "validation": fold.validation,
                    "k": config.k,
                    "collect_components": model_config.architecture == "fwfm",
                }
            )

    results = {}
    if train_stage:
        n_workers = config.jobs or os.cpu_count() or 1
        if n_workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                for res in pool.map(_run_job, jobs):
                    results[(res["variant"], res["fold"])] = res
        else:
            for payload in jobs:
                res = _run_job(payload)
                results[(res["variant"], res["fold"])] = res

        # single collector: write in canonical (variant, fold) order
        for name, _ in config.variants:
            for fi in range(len(folds)):
                res = results[(name, fi)]
                store = ParamStore()
                for pname, value in res["params"]:
                    store.create(pname, value)
                save_checkpoint(
                    dirs["checkpoints"] / f"{name}.fold{fi:02d}.ckpt",
                    store,
                    seed=res["seed"],
                    config_hash=res["config_hash"],
                )
                with open(
                    dirs["logs"] / f"{name}.fold{fi:02d}.csv", "w", encoding="utf-8", newline=""
                ) as f:
                    writer = csv.writer(f)
                    writer.writerow(["epoch", "train_loss", "val_ndcg"])
                    for epoch, loss, ndcg in res["log"]:
                        writer.writerow([epoch, f"{loss:.10f}", "" if ndcg is None else f"{ndcg:.10f}"])

    if eval_stage:
        if train_stage:
            _write_eval_reports(config, folds, results, dirs)
        else:
            _evaluate_from_checkpoints(config, folds, dirs)

    if stats_stage:
        _write_stats(config, dirs)

    if report_stage:
        render_report(out_dir)

    return {"output_dir": str(out_dir), "data_stats": data_stats}


def _write_eval_reports(config, folds, results, dirs) -> None:
    for name, model_config in config.variants:
        per_fold = [results[(name, fi)] for fi in range(len(folds))]
        report = EvalReport(
            variant=name,
            k=config.k,
            fold_ndcg=[r["mean_ndcg"] for r in per_fold],
            n_groups=[r["n_groups"] for r in per_fold],
            n_excluded=[r["n_excluded"] for r in per_fold],
            config_hash=model_config.hash(),
            n_parameters=per_fold[0]["n_parameters"],
        )
        _write_json(dirs["eval"] / f"{name}.json", report.to_dict())

        if model_config.architecture == "fwfm":
            names = per_fold[0]["components"]["names"]
            table = ComponentScoreTable(
                components=names,
                scores=np.concatenate([r["components"]["scores"] for r in per_fold]),
                labels=np.concatenate([r["components"]["labels"] for r in per_fold]),
            )
            _write_json(dirs["eval"] / f"{name}.components.json", table.to_dict())
            with open(dirs["eval"] / f"{name}.hist.csv", "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["component", "label", "bin_lo", "bin_hi", "count"])
                for row in component_distributions(table):
                    writer.writerow(
                        [
                            row["component"],
                            row["label"],
                            f"{row['bin_lo']:.10g}",
                            f"{row['bin_hi']:.10g}",
                            row["count"],
                        ]
                    )

    if config.include_random_baseline:
        report = _baseline_report(config, folds)
        _write_json(dirs["eval"] / f"{RANDOM_BASELINE}.json", report.to_dict())


def _evaluate_from_checkpoints(config, folds, dirs) -> None:
    """Rebuild per-fold vocabularies, load checkpoints, re-evaluate."""
    from .models import score_groups

    results = {}
    for name, model_config in config.variants:
        for fi, fold in enumerate(folds):
            path = dirs["checkpoints"] / f"{name}.fold{fi:02d}.ckpt"
            if not path.exists():
                raise BundleError(f"missing checkpoint: {path}")
            manifest, values = load_checkpoint(path)
            vocab = build_vocab(fold.train, config.hyperparams.min_count)
            categories = build_categories(fold.train)
            model = RankingModel(
                model_config.with_seed(manifest["seed"]), vocab.size, categories.size
            )
            model.store.restore(values)
            multi = [g for g in fold.validation if not g.is_single_doc]
            indexed = index_groups(multi, vocab, categories)
            scored = score_groups(model, indexed)
            fe = evaluate_groups(scored, [g.labels for g in indexed], config.k)
            results[(name, fi)] = {
                "mean_ndcg": fe.mean_ndcg,
                "n_groups": fe.n_groups,
                "n_excluded": len(fold.validation) - len(multi),
                "n_parameters": model.n_parameters(),
                "components": _checkpoint_components(model, indexed)
                if model_config.architecture == "fwfm"
                else None,
            }

    for name, model_config in config.variants:
        per_fold = [results[(name, fi)] for fi in range(len(folds))]
        report = EvalReport(
            variant=name,
            k=config.k,
            fold_ndcg=[r["mean_ndcg"] for r in per_fold],
            n_groups=[r["n_groups"] for r in per_fold],
            n_excluded=[r["n_excluded"] for r in per_fold],
            config_hash=model_config.hash(),
            n_parameters=per_fold[0]["n_parameters"],
        )
        _write_json(dirs["eval"] / f"{name}.json", report.to_dict())
        if model_config.architecture == "fwfm":
            names = per_fold[0]["components"]["names"]
            table = ComponentScoreTable(
                components=names,
                scores=np.concatenate([r["components"]["scores"] for r in per_fold]),
                labels=np.concatenate([r["components"]["labels"] for r in per_fold]),
            )
            _write_json(dirs["eval"] / f"{name}.components.json", table.to_dict())

    if config.include_random_baseline:
        _write_json(
            dirs["eval"] / f"{RANDOM_BASELINE}.json", _baseline_report(config, folds).to_dict()
        )


def _checkpoint_components(model, indexed):
    from .models import make_item_batch

    items = [(g, i) for g in indexed for i in range(len(g.docs))]
    return {
        "names": model.component_names(),
        "scores": model.component_scores(make_item_batch(items)),
        "labels": np.concatenate([g.labels for g in indexed]),
    }


def _load_eval_reports(out_dir: Path) -> dict[str, EvalReport]:
    eval_dir = out_dir / "eval"
    reports = {}
    if eval_dir.exists():
        for path in sorted(eval_dir.glob("*.json")):
            if path.name.endswith(".components.json"):
                continue
            with open(path, "r", encoding="utf-8") as f:
                report = EvalReport.from_dict(json.load(f))
            reports[report.variant] = report
    return reports


def _write_stats(config: ExperimentConfig, dirs) -> None:
    reports = _load_eval_reports(Path(config.output_dir))
    missing = [
        n
        for pair in config.t_test_pairs
        for n in pair
        if n not in reports
    ] + [n for group in config.tukey_groups for n in group if n not in reports]
    if missing:
        raise BundleError(f"stats stage is missing eval reports for: {sorted(set(missing))}")

    payload = {"paired_t": [], "tukey": []}
    for a, b in config.t_test_pairs:
        r = paired_t_test(reports[a].fold_ndcg, reports[b].fold_ndcg)
        payload["paired_t"].append(
            {
                "pair": [a, b],
                "t": r.t,
                "df": r.df,
                "p": r.p,
                "flags": list(r.flags),
                "mean_a": reports[a].mean,
                "mean_b": reports[b].mean,
            }
        )
    for group in config.tukey_groups:
        pairs = tukey_hsd(
            [reports[n].fold_ndcg for n in group],
            draws=config.tukey_draws,
            seed=config.seed,
        )
        payload["tukey"].append(
            {
                "groups": list(group),
                "pairs": [
                    {
                        "pair": [group[r.i], group[r.j]],
                        "q": r.q,
                        "p": r.p,
                        "flags": list(r.flags),
                    }
                    for r in pairs
                ],
            }
        )
    _write_json(dirs["stats"] / "stats.json", payload)

    with open(dirs["stats"] / "stats.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["kind", "a", "b", "statistic", "p", "flags"])
        for row in payload["paired_t"]:
            writer.writerow(
                ["paired_t", row["pair"][0], row["pair"][1], f"{row['t']:.6f}",
                 f"{row['p']:.6f}", ";".join(row["flags"])]
            )
        for block in payload["tukey"]:
            for row in block["pairs"]:
                writer.writerow(
                    ["tukey", row["pair"][0], row["pair"][1], f"{row['q']:.6f}",
                     f"{row['p']:.6f}", ";".join(row["flags"])]
                )


def render_report(out_dir) -> str:
    """Render summary.txt and summary.csv from the bundle JSON files.

    Values are read back from the eval reports, never recomputed, so the
    summary always agrees with the JSON artifacts.
    """
    out_dir = Path(out_dir)
    reports = _load_eval_reports(out_dir)
    if not reports:
        raise BundleError(f"no eval reports found under {out_dir / 'eval'}")

    stats_path = out_dir / "stats" / "stats.json"
    stats = None
    if stats_path.exists():
        with open(stats_path, "r", encoding="utf-8") as f:
            stats = json.load(f)

    pipeline_path = out_dir / "logs" / "pipeline.json"
    pipeline = None
    if pipeline_path.exists():
        with open(pipeline_path, "r", encoding="utf-8") as f:
            pipeline = json.load(f)

    lines = ["Experiment summary", "=================="]
    if pipeline:
        lines.append("")
        lines.append(
            f"data: {pipeline['groups']} groups, {pipeline['documents']} documents, "
            f"{pipeline['single_doc_groups']} single-doc groups, "
            f"{len(pipeline.get('folds', []))} folds"
        )

    k = next(iter(reports.values())).k
    lines += ["", f"NDCG@{k} per variant", "-" * 62]
    lines.append(f"{'variant':32s} {'mean':>8s} {'std':>8s} {'params':>10s}")
    for name in sorted(reports):
        r = reports[name]
        lines.append(f"{name:32s} {r.mean:8.4f} {r.std:8.4f} {r.n_parameters:10d}")

    if stats and (stats.get("paired_t") or stats.get("tukey")):
        if stats.get("paired_t"):
            lines += ["", "Paired t-tests", "-" * 62]
            lines.append(f"{'pair':44s} {'t':>8s} {'p':>8s}")
            for row in stats["paired_t"]:
                label = f"{row['pair'][0]} vs {row['pair'][1]}"
                flag = " *" + ";".join(row["flags"]) if row["flags"] else ""
                lines.append(f"{label:44s} {row['t']:8.4f} {row['p']:8.4f}{flag}")
        if stats.get("tukey"):
            lines += ["", "Tukey HSD", "-" * 62]
            for block in stats["tukey"]:
                lines.append("groups: " + ", ".join(block["groups"]))
                lines.append(f"{'pair':44s} {'q':>8s} {'p':>8s}")
                for row in block["pairs"]:
                    label = f"{row['pair'][0]} vs {row['pair'][1]}"
                    flag = " *" + ";".join(row["flags"]) if row["flags"] else ""
                    lines.append(f"{label:44s} {row['q']:8.4f} {row['p']:8.4f}{flag}")

    text = "\n".join(lines) + "\n"
    with open(out_dir / "summary.txt", "w", encoding="utf-8") as f:
        f.write(text)

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        n_folds = max(len(r.fold_ndcg) for r in reports.values())
        writer.writerow(
            ["variant", "mean_ndcg", "std_ndcg", "n_parameters", "config_hash"]
            + [f"fold_{i:02d}" for i in range(n_folds)]
        )
        for name in sorted(reports):
            r = reports[name]
            writer.writerow(
                [name, f"{r.mean:.4f}", f"{r.std:.4f}", r.n_parameters, r.config_hash]
                + [f"{v:.6f}" for v in r.fold_ndcg]
            )
    return text
