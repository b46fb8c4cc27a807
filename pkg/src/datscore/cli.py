"""Command-line entry point.

Subcommands: score, augment, meta-eval, ablate, synth. Flags mirror
RunConfig one-to-one; a JSON config file (or a previous run's manifest,
whose "config" key is unwrapped) supplies defaults and explicit flags
win. Every file-writing run drops a manifest next to its primary output
recording the resolved config, the backend identity, and the input
hash, which is enough to reproduce the run byte for byte on the
deterministic backends.

Exit codes: 0 ok, 2 input/validation error, 3 backend error,
4 insufficient data.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

from . import __version__
from .backends import make_backend
from .data import Direction, load_dataset, save_dataset, validate_dataset
from .errors import (
    BackendUnavailable,
    DatasetError,
    DatscoreError,
    InsufficientData,
    PipelineAborted,
    TraceInvariantError,
    TraceMissing,
    TranslateUnsupported,
    ZeroVariance,
)
from .backends.tracefile import save_traces
from .metaeval import TiePolicy, ablation_report, grouped_correlations, render_json, render_text, render_tsv
from .pipeline import AugmentPolicy, Averaging, DirectionSet, Mode, augment_example, run_pipeline
from .scoring import WeightScheme
from .synth import synth_generate

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3
EXIT_DATA = 4

_BACKEND_ERRORS = (BackendUnavailable, TranslateUnsupported, TraceMissing, TraceInvariantError, PipelineAborted)
_DATA_ERRORS = (InsufficientData, ZeroVariance)


def exit_code_for(exc: BaseException) -> int:
    """Map a caught error to an exit code; everything else is input-side.

    Input-side covers DatasetError and friends, EmptyInput,
    UnsupportedLanguage, bad flag values (ValueError), and OS errors
    like a missing dataset path.
    """
    if isinstance(exc, _BACKEND_ERRORS):
        return EXIT_BACKEND
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_DATA
    return EXIT_INPUT


@dataclass
class RunConfig:
    """Resolved options of one run; serialized verbatim into manifests.

    Worker count and output paths are execution details: they never
    affect results, so they are kept out of the serialized config.
    """

    dataset: str | None = None
    backend: str = "toy"
    mode: str = "mt8"
    term_weighting: str = "entropy"
    averaging: str = "one-vs-rest"
    raw_sum: bool = False
    tie_policy: str = "discordant"
    include_directions: list[str] = field(default_factory=list)
    exclude_directions: list[str] = field(default_factory=list)
    trans1_lang: str | None = None
    trans2_lang: str | None = None
    seed: int = 0

    def to_json_obj(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    # typed views ----------------------------------------------------------

    def mode_enum(self) -> Mode:
        return Mode(self.mode)

    def scheme_enum(self) -> WeightScheme:
        return WeightScheme(self.term_weighting)

    def averaging_enum(self) -> Averaging:
        return Averaging(self.averaging)

    def tie_policy_enum(self) -> TiePolicy:
        return TiePolicy(self.tie_policy)

    def direction_set(self) -> DirectionSet:
        return DirectionSet.resolve(self.mode_enum(), self.include_directions, self.exclude_directions)

    def augment_policy(self) -> AugmentPolicy:
        return AugmentPolicy(self.trans1_lang, self.trans2_lang)


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError(f"config file {path} is not a JSON object")
    if "config" in obj and isinstance(obj["config"], dict):
        obj = obj["config"]  # a manifest: unwrap the config it recorded
    known = {f.name for f in fields(RunConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return obj


def _split_list(value: str | None) -> list[str] | None:
    if value is None:
        return None
    return [v.strip() for v in value.split(",") if v.strip()]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """File config (if any) under explicit flags; flags always win."""
    base: dict = {}
    if getattr(args, "config", None):
        base = _load_config_file(args.config)
    cfg = RunConfig(**base)
    overrides = {
        "dataset": args.dataset if hasattr(args, "dataset") else None,
        "backend": getattr(args, "backend", None),
        "mode": getattr(args, "mode", None),
        "term_weighting": getattr(args, "term_weighting", None),
        "averaging": getattr(args, "averaging", None),
        "raw_sum": getattr(args, "raw_sum", None),
        "tie_policy": getattr(args, "tie_policy", None),
        "include_directions": _split_list(getattr(args, "include_directions", None)),
        "exclude_directions": _split_list(getattr(args, "exclude_directions", None)),
        "trans1_lang": getattr(args, "trans1_lang", None),
        "trans2_lang": getattr(args, "trans2_lang", None),
        "seed": getattr(args, "seed", None),
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    return cfg


def _sha256_file(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _dumps(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _write_manifest(path: str, command: str, config: RunConfig, extra: dict) -> None:
    manifest = {
        "tool": "datscore",
        "version": __version__,
        "command": command,
        "config": config.to_json_obj(),
        **extra,
    }
    Path(path).write_text(json.dumps(manifest, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def _manifest_path(out: str, explicit: str | None) -> str:
    return explicit if explicit else out + ".manifest.json"


def _load_valid_dataset(path: str | None):
    if not path:
        raise DatasetError("--dataset is required (flag or config file)")
    examples = load_dataset(path)
    report = validate_dataset(examples)
    if not report.accepted:
        raise DatasetError(report.summary())
    return examples


# -- subcommands -------------------------------------------------------------


def cmd_score(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    examples = _load_valid_dataset(config.dataset)
    direction_set = config.direction_set()
    backend = make_backend(config.backend)
    try:
        result = run_pipeline(
            examples,
            backend,
            direction_set,
            scheme=config.scheme_enum(),
            averaging=config.averaging_enum(),
            normalize_terms=not config.raw_sum,
            workers=args.workers,
            policy=config.augment_policy(),
        )
        backend_identity = backend.identity()
    finally:
        backend.close()

    lines = []
    matrix = result.matrix
    for i, row_id in enumerate(matrix.row_ids):
        per_direction = {d.key: float(matrix.values[i, j]) for j, d in enumerate(matrix.directions)}
        lines.append(_dumps({"id": row_id, "datscore": result.values[row_id], "per_direction": per_direction}))
    payload = "".join(line + "\n" for line in lines)
    if args.out == "-":
        sys.stdout.write(payload)
    else:
        Path(args.out).write_text(payload, encoding="utf-8")
        _write_manifest(
            _manifest_path(args.out, args.manifest),
            "score",
            config,
            {
                "backend_identity": backend_identity,
                "input_sha256": _sha256_file(config.dataset),
                "directions": [d.key for d in direction_set],
                "direction_weights": result.weights.to_json_obj(),
                "n_examples": len(examples),
                "n_rows": len(matrix.row_ids),
                "exclusions": [e.to_json_obj() for e in result.exclusions],
            },
        )
    for e in result.exclusions:
        print(f"excluded {e.example_id} ({e.direction.key}): {e.reason}", file=sys.stderr)
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    examples = _load_valid_dataset(config.dataset)
    backend = make_backend(config.backend)
    try:
        if not backend.supports_translate:
            raise TranslateUnsupported(f"backend {backend.name!r} cannot translate")
        policy = config.augment_policy()
        augmented = [augment_example(ex, policy, backend) for ex in examples]
        backend_identity = backend.identity()
    finally:
        backend.close()
    save_dataset(augmented, args.out)
    _write_manifest(
        _manifest_path(args.out, args.manifest),
        "augment",
        config,
        {"backend_identity": backend_identity, "input_sha256": _sha256_file(config.dataset)},
    )
    return EXIT_OK


def _read_scores(path: str) -> dict[str, float]:
    values: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                values[str(obj["id"])] = float(obj["datscore"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}: line {line_no}: {exc}") from None
    return values


def cmd_meta_eval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    examples = _load_valid_dataset(config.dataset)
    values = _read_scores(args.scores)
    groups = grouped_correlations(examples, values, config.tie_policy_enum())
    if not groups:
        raise InsufficientData("dataset carries no human judgments")
    header = ("lang_pair", "judgments", "kind", "value", "n_used", "n_ties", "tie_policy")
    rows = []
    for lang_pair, judgment, corr in groups:
        rows.append(
            (
                lang_pair,
                judgment,
                corr.kind.value,
                repr(corr.value),
                str(corr.n_used),
                "" if corr.n_ties is None else str(corr.n_ties),
                "" if corr.tie_policy is None else corr.tie_policy.value,
            )
        )
    tsv = "\n".join("\t".join(r) for r in [header, *rows]) + "\n"
    if args.out:
        Path(args.out).write_text(tsv, encoding="utf-8")
        mirror = [
            {"lang_pair": lp, "judgments": j, "correlation": corr.to_json_obj()}
            for (lp, j, corr) in groups
        ]
        Path(args.out).with_suffix(".json").write_text(
            json.dumps(mirror, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
        )
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    for r in [header, *rows]:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    examples = _load_valid_dataset(config.dataset)
    backend = make_backend(config.backend)
    try:
        report = ablation_report(
            examples,
            backend,
            mode=config.mode_enum(),
            scheme=config.scheme_enum(),
            averaging=config.averaging_enum(),
            normalize_terms=not config.raw_sum,
            tie_policy=config.tie_policy_enum(),
            workers=args.workers,
            policy=config.augment_policy(),
        )
        backend_identity = backend.identity()
    finally:
        backend.close()
    if args.out:
        Path(args.out).write_text(render_tsv(report), encoding="utf-8")
        Path(args.out).with_suffix(".json").write_text(render_json(report), encoding="utf-8")
        _write_manifest(
            _manifest_path(args.out, args.manifest),
            "ablate",
            config,
            {"backend_identity": backend_identity, "input_sha256": _sha256_file(config.dataset)},
        )
    sys.stdout.write(render_text(report))
    return EXIT_OK


def cmd_synth(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    outlier = Direction.from_key(args.outlier_direction) if args.outlier_direction else None
    result = synth_generate(
        n=args.n,
        noise=args.noise,
        outlier_direction=outlier,
        seed=config.seed,
        signal=args.signal,
        mode=config.mode_enum(),
    )
    save_dataset(result.examples, args.dataset_out)
    save_traces(result.traces, args.traces_out)
    _write_manifest(
        _manifest_path(args.dataset_out, args.manifest),
        "synth",
        config,
        {
            "n": args.n,
            "noise": args.noise,
            "signal": args.signal,
            "outlier_direction": args.outlier_direction,
            "traces_out_sha256": _sha256_file(args.traces_out),
        },
    )
    return EXIT_OK


# -- parser ------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *, backend: bool = True) -> None:
    p.add_argument("--dataset", help="input dataset (JSON Lines)")
    p.add_argument("--config", help="JSON config file or a previous run's manifest")
    if backend:
        p.add_argument("--backend", help="toy | trace:<path> | http:<url>")


def _add_scoring_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in Mode], help="direction set")
    p.add_argument("--term-weighting", dest="term_weighting", choices=[s.value for s in WeightScheme])
    p.add_argument("--averaging", choices=[a.value for a in Averaging])
    p.add_argument("--raw-sum", dest="raw_sum", action="store_const", const=True,
                   help="skip term-weight normalization (weighted sum, not mean)")
    p.add_argument("--tie-policy", dest="tie_policy", choices=[t.value for t in TiePolicy])
    p.add_argument("--include-directions", dest="include_directions", help="comma-separated direction keys")
    p.add_argument("--exclude-directions", dest="exclude_directions", help="comma-separated direction keys")
    p.add_argument("--trans1-lang", dest="trans1_lang")
    p.add_argument("--trans2-lang", dest="trans2_lang")
    p.add_argument("--workers", type=int, default=os.cpu_count(), help="parallel backend requests")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="datscore", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"datscore {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a dataset and write per-example values")
    _add_common(p)
    _add_scoring_flags(p)
    p.add_argument("--out", default="-", help="scores output path ('-' = stdout)")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("augment", help="fill trans1/trans2 via the backend's translator")
    _add_common(p)
    p.add_argument("--trans1-lang", dest="trans1_lang")
    p.add_argument("--trans2-lang", dest="trans2_lang")
    p.add_argument("--out", required=True, help="augmented dataset output path")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("meta-eval", help="correlate a scores file with human judgments")
    _add_common(p, backend=False)
    p.add_argument("--scores", required=True, help="scores file from the score command")
    p.add_argument("--tie-policy", dest="tie_policy", choices=[t.value for t in TiePolicy])
    p.add_argument("--out", help="write a TSV table (+ .json mirror) here")
    p.set_defaults(func=cmd_meta_eval)

    p = sub.add_parser("ablate", help="per-direction / leave-one-out / weighting-grid report")
    _add_common(p)
    _add_scoring_flags(p)
    p.add_argument("--out", help="write a TSV table (+ .json mirror) here")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic ranked dataset + trace store")
    p.add_argument("--config", help="JSON config file or a previous run's manifest")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--noise", type=float, required=True)
    p.add_argument("--signal", type=float, default=1.0)
    p.add_argument("--outlier-direction", dest="outlier_direction", help="direction key, e.g. trans1->hypo")
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--dataset-out", dest="dataset_out", required=True)
    p.add_argument("--traces-out", dest="traces_out", required=True)
    p.add_argument("--manifest", help="manifest path (default: <dataset-out>.manifest.json)")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatscoreError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
