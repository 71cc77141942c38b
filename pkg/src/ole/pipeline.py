"""File-level pipeline stages shared by the CLI and the test suite.

Every stage reads and writes OLE-EMB/OLE-GMM files, so composing the
stages one subcommand at a time is byte-identical to running them
back to back in one process: the data always passes through the same
serialization points.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .embeddings import LabeledEmbeddings, load_embeddings, normalize_rows
from .errors import ValidationError
from .hard_prototypes import cluster_id_classes, generate_hard_prototypes, select_fringe
from .metrics import DetectionReport, evaluate
from .mixture import extract_prototypes, fit_gmm, save_gmm
from .prototypes import load_prototypes, refine_prototypes, save_prototypes
from .scoring import ScoringContext, score_batch
from .synthetic import generate_world

GMM_FILE = "model.olegmm"
RAW_PROTOTYPES_FILE = "prototypes_raw.oleemb"
REFINED_PROTOTYPES_FILE = "prototypes_refined.oleemb"
FULL_PROTOTYPES_FILE = "prototypes_full.oleemb"
LAMBDA_FILE = "refine_lambda.json"
REPORT_FILE = "report.json"
ABLATION_FILE = "ablation.json"

ABLATION_ROWS = ("baseline", "raw", "opl", "opl_refine", "opl_refine_hopg")


def _load_unit(path) -> LabeledEmbeddings:
    """Load an embedding file and bring it into cosine geometry."""
    data = load_embeddings(path)
    return data if data.normalized else normalize_rows(data)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _echo(config: PipelineConfig, out_dir: Path, stage: str) -> None:
    _write_json(out_dir / f"{stage}_config.json", config.echo())


def run_fit(config: PipelineConfig, out_dir) -> tuple[Path, Path]:
    """Fit the outlier mixture and dump the model plus raw prototypes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = _load_unit(config.path("outlier_labels"))
    if config.k > labels.n:
        raise ValidationError(
            f"k={config.k} exceeds the {labels.n} outlier label embeddings"
        )
    model = fit_gmm(labels, config.k, config.em_config())
    save_gmm(model, out_dir / GMM_FILE)
    save_prototypes(extract_prototypes(model), out_dir / RAW_PROTOTYPES_FILE)
    _echo(config, out_dir, "fit")
    return out_dir / GMM_FILE, out_dir / RAW_PROTOTYPES_FILE


def run_refine(config: PipelineConfig, out_dir, prototypes_path=None) -> tuple[Path, Path]:
    """Drop prototypes aligned with the ID classes; keep the furthest ones."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prototypes_path = Path(prototypes_path or out_dir / RAW_PROTOTYPES_FILE)
    prototypes = load_prototypes(prototypes_path)
    id_embeddings = _load_unit(config.path("id_labels"))
    refined, threshold = refine_prototypes(prototypes, id_embeddings, config.refine_percentile)
    save_prototypes(refined, out_dir / REFINED_PROTOTYPES_FILE)
    _write_json(
        out_dir / LAMBDA_FILE,
        {
            "lambda": threshold,
            "retained": refined.size,
            "total": prototypes.size,
            "percentile": config.refine_percentile,
            "config_echo": config.echo(),
        },
    )
    _echo(config, out_dir, "refine")
    return out_dir / REFINED_PROTOTYPES_FILE, out_dir / LAMBDA_FILE


def run_hard(config: PipelineConfig, out_dir, refined_path=None) -> Path:
    """Generate hard prototypes from fringe ID classes and append them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    refined_path = Path(refined_path or out_dir / REFINED_PROTOTYPES_FILE)
    refined = load_prototypes(refined_path)
    id_embeddings = _load_unit(config.path("id_labels"))
    fringe_cfg = config.fringe_config()
    assignments = cluster_id_classes(id_embeddings, fringe_cfg.id_cluster_count, config.seed)
    fringe_idx = select_fringe(id_embeddings, assignments, fringe_cfg.fringe_per_cluster)
    fringe = LabeledEmbeddings(
        id_embeddings.matrix[fringe_idx],
        tuple(id_embeddings.labels[i] for i in fringe_idx) if id_embeddings.labels else (),
        normalized=True,
    )
    hard = generate_hard_prototypes(fringe, refined, fringe_cfg)
    save_prototypes(refined.concat(hard), out_dir / FULL_PROTOTYPES_FILE)
    _echo(config, out_dir, "hard")
    return out_dir / FULL_PROTOTYPES_FILE


def _load_prototype_vectors(path) -> np.ndarray:
    """Any OLE-EMB file can serve as a prototype source for scoring."""
    data = _load_unit(path)
    return data.matrix


def build_context(
    config: PipelineConfig,
    prototypes_path=None,
    no_probabilities: np.ndarray | None = None,
) -> ScoringContext:
    id_embeddings = _load_unit(config.path("id_labels"))
    if prototypes_path is not None:
        prototypes = _load_prototype_vectors(prototypes_path)
    else:
        prototypes = np.empty((0, id_embeddings.d))
    no_embeddings = None
    no_path = config.path("no_embeddings", required=False)
    if no_probabilities is None and no_path is not None:
        no_embeddings = _load_unit(no_path).matrix
    return ScoringContext(
        id_embeddings=id_embeddings.matrix,
        prototypes=prototypes,
        temperature=config.temperature,
        no_embeddings=no_embeddings,
        no_probabilities=no_probabilities,
    )


def write_scores_csv(path, images: LabeledEmbeddings, scores: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "label", "score"])
        labels = images.labels or ("",) * images.n
        for i, (label, score) in enumerate(zip(labels, scores)):
            writer.writerow([i, label, repr(float(score))])


def read_scores_csv(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"scores file does not exist: {path}")
    values = []
    with path.open("r", newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["index", "label", "score"]:
            raise ValidationError(f"unexpected scores header {header!r} in {path}")
        for row in reader:
            values.append(float(row[2]))
    return np.asarray(values, dtype=np.float64)


def run_score(
    config: PipelineConfig,
    images_path,
    out_csv,
    prototypes_path=None,
    no_probs_path=None,
    method: str | None = None,
) -> Path:
    """Score an image-embedding file and emit an index,label,score CSV."""
    method = method or config.method
    images = _load_unit(images_path)
    no_probabilities = None
    if no_probs_path is not None:
        stored = load_embeddings(no_probs_path)  # n x M matrix, unnormalized
        no_probabilities = stored.matrix
    ctx = build_context(config, prototypes_path, no_probabilities)
    scores = score_batch(images, ctx, method)
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    write_scores_csv(out_csv, images, scores)
    return out_csv


def run_eval(
    config: PipelineConfig,
    id_scores_path,
    ood_scores_paths: dict,
    out_json,
) -> DetectionReport:
    id_scores = read_scores_csv(id_scores_path)
    named = {name: read_scores_csv(path) for name, path in ood_scores_paths.items()}
    report = evaluate(
        id_scores,
        named,
        bins=config.eval_bins,
        score_range=config.eval_range,
        config_echo=config.echo(),
    )
    out_json = Path(out_json)
    out_json.parent.mkdir(parents=True, exist_ok=True)
    report.save(out_json)
    return report


def run_synth(config: PipelineConfig, out_dir) -> Path:
    if config.synth is None:
        raise ValidationError("config has no synth section")
    out_dir = Path(out_dir)
    world = generate_world(config.synth)
    world.save(out_dir)
    _echo(config, out_dir, "synth")
    return out_dir


def synth_paths(world_dir) -> dict:
    world_dir = Path(world_dir)
    return {
        "id_labels": str(world_dir / "id_labels.oleemb"),
        "outlier_labels": str(world_dir / "outlier_labels.oleemb"),
        "id_test": str(world_dir / "id_test.oleemb"),
        "ood_tests": {"ood": str(world_dir / "ood_test.oleemb")},
        "no_embeddings": str(world_dir / "no_embeddings.oleemb"),
    }


def run_pipeline(config: PipelineConfig, out_dir) -> DetectionReport:
    """fit -> refine -> hard -> score -> eval, through the file formats."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    run_fit(config, out_dir)
    run_refine(config, out_dir)
    run_hard(config, out_dir)
    run_score(
        config,
        config.path("id_test"),
        out_dir / "scores_id.csv",
        prototypes_path=out_dir / FULL_PROTOTYPES_FILE,
    )
    ood_csvs = {}
    for name, path in config.paths.get("ood_tests", {}).items():
        csv_path = out_dir / f"scores_{name}.csv"
        run_score(config, path, csv_path, prototypes_path=out_dir / FULL_PROTOTYPES_FILE)
        ood_csvs[name] = csv_path
    if not ood_csvs:
        raise ValidationError("config lists no ood_tests to evaluate")
    return run_eval(config, out_dir / "scores_id.csv", ood_csvs, out_dir / REPORT_FILE)


def run_ablate(config: PipelineConfig, out_dir) -> dict:
    """Five-configuration ablation on the seeded synthetic world.

    Rows share identical test inputs; only the prototype source and the
    scoring method vary:

        baseline          plain two-branch scoring, no prototypes
        raw               every outlier label embedding as a prototype
        opl               all learned prototypes, unrefined
        opl_refine        prototypes surviving ID-alignment refinement
        opl_refine_hopg   refined plus generated hard prototypes
    """
    if config.synth is None:
        raise ValidationError("ablation requires a synth section in the config")
    out_dir = Path(out_dir)
    world_dir = out_dir / "world"
    run_synth(config, world_dir)

    # rebind the pipeline inputs to the generated world
    config = PipelineConfig(
        paths=synth_paths(world_dir),
        k=config.k,
        refine_percentile=config.refine_percentile,
        id_cluster_count=config.id_cluster_count,
        fringe_per_cluster=config.fringe_per_cluster,
        alpha_low=config.alpha_low,
        alpha_high=config.alpha_high,
        temperature=config.temperature,
        method=config.method,
        seed=config.seed,
        max_iterations=config.max_iterations,
        convergence_tolerance=config.convergence_tolerance,
        variance_floor=config.variance_floor,
        eval_bins=config.eval_bins,
        eval_range=config.eval_range,
        synth=config.synth,
    )

    run_fit(config, out_dir)
    run_refine(config, out_dir)
    run_hard(config, out_dir)

    variants = {
        "baseline": (None, "clipn"),
        "raw": (config.path("outlier_labels"), "clipn_ole"),
        "opl": (out_dir / RAW_PROTOTYPES_FILE, "clipn_ole"),
        "opl_refine": (out_dir / REFINED_PROTOTYPES_FILE, "clipn_ole"),
        "opl_refine_hopg": (out_dir / FULL_PROTOTYPES_FILE, "clipn_ole"),
    }
    rows = []
    for name in ABLATION_ROWS:
        protos, method = variants[name]
        id_csv = out_dir / f"scores_id_{name}.csv"
        ood_csv = out_dir / f"scores_ood_{name}.csv"
        run_score(config, config.path("id_test"), id_csv, prototypes_path=protos, method=method)
        run_score(
            config,
            config.paths["ood_tests"]["ood"],
            ood_csv,
            prototypes_path=protos,
            method=method,
        )
        report = run_eval(config, id_csv, {"ood": ood_csv}, out_dir / f"report_{name}.json")
        result = report.datasets[0]
        rows.append(
            {
                "name": name,
                "fpr95": round(result.fpr95, 6),
                "auroc": round(result.auroc, 6),
                "fpr95_raw": result.fpr95,
                "auroc_raw": result.auroc,
            }
        )
    payload = {"rows": rows, "config_echo": config.echo()}
    _write_json(out_dir / ABLATION_FILE, payload)
    return payload
