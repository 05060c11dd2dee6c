"""Command-line entry point: ingest | score | evaluate | correlate."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import Sequence

from .errors import (
    CapabilityError,
    EvaluationError,
    FormatError,
    NumericalError,
    ScoringError,
    TransportError,
    ValidationError,
)
from .pipeline import PipelineConfig, cmd_correlate, cmd_evaluate, cmd_ingest, cmd_score


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sentmetrics",
        description="Sentence surprisal / relevance scoring and reading-speed evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("ingest", "normalize discourses, reading data, and frequency lists"),
        ("score", "compute the per-sentence metrics table"),
        ("evaluate", "fit base/full models and report AIC differences"),
        ("correlate", "correlate surprisal methods with relevance"),
    ):
        cmd = sub.add_parser(name, help=text)
        cmd.add_argument("--config", required=True, help="path to the JSON config")
        cmd.add_argument(
            "--backend",
            help="override backend: mock | stdio:<cmd> | http:<url>",
        )
        cmd.add_argument("--methods", help="comma-separated subset of CR,NLL,NSP")
        cmd.add_argument("--out", help="override the output directory")
        cmd.add_argument("--seed", type=int, help="override the RNG seed")
        cmd.add_argument(
            "--per-language",
            action="store_true",
            default=None,
            help="also fit per-language models in evaluate",
        )
    return parser


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config)
    overrides = {}
    if args.backend is not None:
        overrides["backend"] = args.backend
    if args.methods is not None:
        overrides["methods"] = tuple(
            m.strip().upper() for m in args.methods.split(",") if m.strip()
        )
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.per_language:
        overrides["evaluate"] = dataclasses.replace(config.evaluate, per_language=True)
    return config.with_overrides(**overrides) if overrides else config


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "ingest":
            report = cmd_ingest(config)
            print(
                f"ingested {report['discourses']} discourses "
                f"({report['sentences']} sentences), "
                f"{report['reading_records']} reading records"
            )
            if report["warnings"]:
                print(
                    f"warning: {len(report['row_errors'])} reading rows rejected "
                    f"(see {config.store_path / 'ingest_report.json'})",
                    file=sys.stderr,
                )
        elif args.command == "score":
            path = cmd_score(config)
            print(f"metrics written to {path}")
        elif args.command == "evaluate":
            report = cmd_evaluate(config)
            for metric, entry in report["models"].items():
                if "error" in entry:
                    print(f"{metric}: error: {entry['error']}")
                else:
                    print(f"{metric}: delta_aic={entry['delta_aic']:.2f} n={entry['n']}")
            if report.get("combined") and "error" not in report["combined"]:
                combo = report["combined"]
                print(
                    f"combined ({'+'.join(combo['metrics'])}): "
                    f"delta_aic={combo['delta_aic']:.2f}"
                )
            print(f"report written to {config.out_path / 'evaluation.json'}")
        elif args.command == "correlate":
            report = cmd_correlate(config)
            for pair, entry in report["overall"].items():
                value = entry["value"]
                shown = "undefined" if value is None else f"{value:.4f}"
                print(f"{pair}: r={shown}")
            print(f"report written to {config.out_path / 'correlation.json'}")
    except (FormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TransportError, ScoringError, CapabilityError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3
    except (EvaluationError, NumericalError) as exc:
        print(f"evaluation error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
