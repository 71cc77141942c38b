"""Command line interface.

    ole fit     --config cfg.json [--out DIR] [--seed N] [--k N]
    ole refine  --config cfg.json [--out DIR] [--percentile P] [--prototypes F]
    ole hard    --config cfg.json [--out DIR] [--prototypes F]
    ole score   --config cfg.json --images F [--prototypes F] [--no-probs F]
                [--method M] [--out CSV]
    ole eval    --config cfg.json --id-scores CSV --ood-scores NAME=CSV ...
                [--out JSON]
    ole synth   --config cfg.json [--out DIR] [--seed N]
    ole ablate  --config cfg.json [--out DIR] [--seed N]
    ole inspect FILE

Exit codes: 0 success, 2 validation error, 3 numeric failure.
OLE_THREADS, when set, caps internal parallelism (all current
computations are single-threaded, which satisfies any cap).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import load_config
from .embeddings import load_embeddings
from .errors import NumericError, ValidationError
from .scoring import SCORE_METHODS


def _add_common(parser: argparse.ArgumentParser, *, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required, help="JSON config file")
    parser.add_argument("--out", default="ole_out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ole", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the outlier mixture, dump raw prototypes")
    _add_common(p)
    p.add_argument("--k", type=int, default=None, help="override prototype count")

    p = sub.add_parser("refine", help="remove prototypes aligned with the ID classes")
    _add_common(p)
    p.add_argument("--percentile", type=float, default=None, help="override refine percentile")
    p.add_argument("--prototypes", default=None, help="prototype file (default: fit output)")

    p = sub.add_parser("hard", help="generate hard prototypes from fringe ID classes")
    _add_common(p)
    p.add_argument("--prototypes", default=None, help="refined prototype file")

    p = sub.add_parser("score", help="score an image-embedding file")
    _add_common(p)
    p.add_argument("--images", required=True, help="OLE-EMB image embeddings")
    p.add_argument("--prototypes", default=None, help="prototype source file")
    p.add_argument("--no-probs", default=None, help="precomputed no-probabilities file")
    p.add_argument("--method", choices=SCORE_METHODS, default=None)
    p.add_argument("--scores-out", default=None, help="output CSV path")

    p = sub.add_parser("eval", help="compute FPR95/AUROC report from score CSVs")
    _add_common(p)
    p.add_argument("--id-scores", required=True, help="CSV of ID scores")
    p.add_argument(
        "--ood-scores",
        action="append",
        required=True,
        metavar="NAME=CSV",
        help="named OOD score CSV (repeatable)",
    )
    p.add_argument("--report-out", default=None, help="output JSON path")

    p = sub.add_parser("synth", help="generate the seeded synthetic world")
    _add_common(p)

    p = sub.add_parser("ablate", help="run the five-row ablation on the synthetic world")
    _add_common(p)

    p = sub.add_parser("inspect", help="validate and summarize an OLE-EMB file")
    p.add_argument("file", help="path to an OLE-EMB v1 file")

    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out: dict = {}
    if getattr(args, "seed", None) is not None:
        out["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        out["k"] = args.k
    if getattr(args, "percentile", None) is not None:
        out["refine_percentile"] = args.percentile
    if getattr(args, "method", None) is not None:
        out["method"] = args.method
    return out


def _cmd_inspect(args: argparse.Namespace) -> None:
    data = load_embeddings(args.file)
    summary = {
        "n": data.n,
        "d": data.d,
        "normalized": data.normalized,
        "labeled": bool(data.labels),
        "label_preview": list(data.labels[:5]),
    }
    print(json.dumps(summary, indent=2))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect":
            _cmd_inspect(args)
            return 0

        config = load_config(args.config, _overrides(args))
        out_dir = Path(args.out)
        if args.command == "fit":
            model_path, proto_path = pipeline.run_fit(config, out_dir)
            print(f"wrote {model_path} and {proto_path}")
        elif args.command == "refine":
            refined_path, lambda_path = pipeline.run_refine(
                config, out_dir, prototypes_path=args.prototypes
            )
            print(f"wrote {refined_path} and {lambda_path}")
        elif args.command == "hard":
            full_path = pipeline.run_hard(config, out_dir, refined_path=args.prototypes)
            print(f"wrote {full_path}")
        elif args.command == "score":
            out_csv = args.scores_out or out_dir / "scores.csv"
            path = pipeline.run_score(
                config,
                args.images,
                out_csv,
                prototypes_path=args.prototypes,
                no_probs_path=args.no_probs,
                method=args.method,
            )
            print(f"wrote {path}")
        elif args.command == "eval":
            ood = {}
            for item in args.ood_scores:
                if "=" not in item:
                    raise ValidationError(f"--ood-scores needs NAME=CSV, got {item!r}")
                name, _, csv_path = item.partition("=")
                ood[name] = csv_path
            out_json = args.report_out or out_dir / pipeline.REPORT_FILE
            report = pipeline.run_eval(config, args.id_scores, ood, out_json)
            print(f"wrote {out_json} (average auroc {report.average_auroc:.6f})")
        elif args.command == "synth":
            path = pipeline.run_synth(config, out_dir)
            print(f"wrote world to {path}")
        elif args.command == "ablate":
            payload = pipeline.run_ablate(config, out_dir)
            for row in payload["rows"]:
                print(f"{row['name']:16s} fpr95={row['fpr95']:.6f} auroc={row['auroc']:.6f}")
            print(f"wrote {out_dir / pipeline.ABLATION_FILE}")
        else:  # pragma: no cover
            raise ValidationError(f"unknown command {args.command!r}")
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
