"""Command-line front end: generate, train, sweep, evaluate.

Every run is driven by a JSON config file; a handful of flags override
config keys.  The only environment dependence is the optional FAIRPAIR_OUT
variable, which overrides the output directory.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .constraints import ConstraintKind, compute_group_stats
from .data import (
    Dataset,
    generate_synthetic,
    load_csv,
    make_pairs,
    save_csv,
    save_truth_csv,
    split_queries,
)
from .errors import ValidationError
from .evaluation import evaluate
from .model import load_model, save_model
from .reweight import (
    Coefficients,
    FairTrainConfig,
    fair_train,
    pair_weights,
    pointwise_reweight_train,
    write_history_csv,
)
from .training import TrainConfig, train_weighted

PAIR_KINDS = {
    "statistical": ConstraintKind.PAIR_STATISTICAL,
    "inter": ConstraintKind.PAIR_INTER_GROUP,
    "intra": ConstraintKind.PAIR_INTRA_GROUP,
    "marginal": ConstraintKind.PAIR_MARGINAL,
}
POINT_KINDS = {
    "statistical": ConstraintKind.POINT_STATISTICAL,
    "equal_opportunity": ConstraintKind.POINT_EQUAL_OPPORTUNITY,
}
METHODS = ("unconstrained", "pairwise", "pointwise")
DEFAULT_SWEEP_SCALES = [0.0, 0.5, 1.0, 1.5, 2.0]


@dataclass(eq=False)
class RunConfig:
    """Resolved knobs for one experiment run."""

    csv_path: Path | None
    csv_K: int | None
    synth: dict | None
    constraint: ConstraintKind
    point_constraint: ConstraintKind
    method: str
    ratio_test: float
    ratio_valid: float
    split_seed: int
    train: TrainConfig
    fair: FairTrainConfig
    sweep_scales: list[float]
    out_dir: Path


def _build_config(doc: dict, args: argparse.Namespace) -> RunConfig:
    source = doc.get("dataset")
    if not isinstance(source, dict) or ("csv" in source) == ("synth" in source):
        raise ValidationError("config must set dataset.csv or dataset.synth (exactly one)")

    constraint_name = args.constraint or doc.get("constraint", "statistical")
    if constraint_name not in PAIR_KINDS:
        raise ValidationError(f"unknown constraint {constraint_name!r}")
    point_name = doc.get("point_constraint", "equal_opportunity")
    if point_name not in POINT_KINDS:
        raise ValidationError(f"unknown point_constraint {point_name!r}")
    method = args.method or doc.get("method", "pairwise")
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}")

    split = doc.get("split", {})
    train_doc = dict(doc.get("train", {}))
    if args.seed is not None:
        train_doc["seed"] = args.seed
    train_cfg = TrainConfig(**train_doc)

    fair_doc = dict(doc.get("fair", {}))
    if args.T is not None:
        fair_doc["T"] = args.T
    fair_cfg = FairTrainConfig(inner=train_cfg, **fair_doc)

    out_dir = args.out or os.environ.get("FAIRPAIR_OUT") or doc.get("out_dir")
    if not out_dir:
        raise ValidationError("no output directory: set out_dir, FAIRPAIR_OUT, or --out")

    csv_src = source.get("csv")
    if csv_src is not None and "K" not in source:
        raise ValidationError("dataset.csv requires a declared group count dataset.K")

    return RunConfig(
        csv_path=Path(csv_src) if csv_src is not None else None,
        csv_K=int(source["K"]) if csv_src is not None else None,
        synth=dict(source["synth"]) if "synth" in source else None,
        constraint=PAIR_KINDS[constraint_name],
        point_constraint=POINT_KINDS[point_name],
        method=method,
        ratio_test=float(split.get("ratio_test", 0.2)),
        ratio_valid=float(split.get("ratio_valid", 0.16)),
        split_seed=int(split.get("seed", 13)),
        train=train_cfg,
        fair=fair_cfg,
        sweep_scales=[float(x) for x in doc.get("sweep_scales", DEFAULT_SWEEP_SCALES)],
        out_dir=Path(out_dir),
    )


def load_config(path, args: argparse.Namespace) -> RunConfig:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    try:
        return _build_config(doc, args)
    except TypeError as exc:
        raise ValidationError(f"config {path}: {exc}") from None


def _load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.csv_path is not None:
        return load_csv(cfg.csv_path, cfg.csv_K)
    return generate_synthetic(**cfg.synth)[0]


def _has_pairs(ds: Dataset) -> bool:
    return any(0 < int(q.labels.sum()) < len(q) for q in ds.queries)


def _write_reports(model, splits: dict[str, Dataset], kind, out_dir: Path) -> None:
    for name, ds in splits.items():
        if ds.queries and _has_pairs(ds):
            report = evaluate(model, ds, kind)
            report.write_json(out_dir / f"eval_{name}.json")
            print(
                f"eval_{name}: auc={report.auc:.4f} fairness={report.fairness:.4f}"
            )


def cmd_generate(cfg: RunConfig) -> None:
    if cfg.synth is None:
        raise ValidationError("generate requires a dataset.synth config block")
    ds, truth = generate_synthetic(**cfg.synth)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    save_csv(ds, cfg.out_dir / "dataset.csv")
    save_truth_csv(truth, ds, cfg.out_dir / "truth.csv")
    print(f"wrote {cfg.out_dir / 'dataset.csv'} ({len(ds.queries)} queries, d={ds.d}, K={ds.K})")


def _split(cfg: RunConfig, ds: Dataset):
    return split_queries(ds, cfg.ratio_test, cfg.ratio_valid, cfg.split_seed)


def cmd_train(cfg: RunConfig) -> None:
    ds = _load_dataset(cfg)
    train, valid, test = _split(cfg, ds)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    if cfg.method == "pointwise":
        model = pointwise_reweight_train(train, valid, cfg.point_constraint, cfg.fair)
    else:
        fair_cfg = cfg.fair
        if cfg.method == "unconstrained":
            fair_cfg = dataclasses.replace(cfg.fair, T=0)
        model, coeffs, history = fair_train(train, valid, cfg.constraint, fair_cfg)
        write_history_csv(history, train.K, cfg.out_dir / "history.csv")
        _write_coefficients(coeffs, cfg.out_dir / "coefficients.json")

    save_model(model, cfg.out_dir / "model.json")
    print(f"wrote {cfg.out_dir / 'model.json'} (method={cfg.method})")
    _write_reports(
        model, {"train": train, "valid": valid, "test": test}, cfg.constraint, cfg.out_dir
    )


def _write_coefficients(coeffs: Coefficients, path: Path) -> None:
    doc = {
        "kind": coeffs.kind.value,
        "K": coeffs.values.shape[0],
        "values": [float(v) for v in coeffs.values.ravel()],
    }
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _read_coefficients(path: Path) -> Coefficients:
    if not path.exists():
        raise ValidationError(
            f"missing coefficients artifact {path}; run `fairpair train` first"
        )
    doc = json.loads(path.read_text(encoding="utf-8"))
    K = int(doc["K"])
    values = np.asarray(doc["values"], dtype=np.float64).reshape(K, K)
    kind = ConstraintKind(doc["kind"])
    return Coefficients(values, kind)


def cmd_sweep(cfg: RunConfig) -> None:
    coeffs_star = _read_coefficients(cfg.out_dir / "coefficients.json")
    ds = _load_dataset(cfg)
    train, _valid, test = _split(cfg, ds)
    ps = make_pairs(train)
    stats = compute_group_stats(ps)
    kind = coeffs_star.kind

    rows = []
    for x in cfg.sweep_scales:
        scaled = Coefficients(x * coeffs_star.values, kind)
        weights = pair_weights(scaled, stats, ps, cfg.fair.weight_form)
        model = train_weighted(ps, weights, cfg.fair.inner)
        report = evaluate(model, test, kind)
        rows.append((x, report.auc, report.fairness))
        print(f"sweep x={x:g}: auc={report.auc:.4f} fairness={report.fairness:.4f}")

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    with (cfg.out_dir / "sweep.csv").open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "auc", "fairness"])
        for x, a, f in rows:
            writer.writerow([repr(float(x)), repr(a), repr(f)])
    print(f"wrote {cfg.out_dir / 'sweep.csv'}")


def cmd_evaluate(cfg: RunConfig) -> None:
    model_path = cfg.out_dir / "model.json"
    if not model_path.exists():
        raise ValidationError(f"missing model artifact {model_path}; run `fairpair train` first")
    model = load_model(model_path)
    ds = _load_dataset(cfg)
    train, valid, test = _split(cfg, ds)
    _write_reports(
        model, {"train": train, "valid": valid, "test": test}, cfg.constraint, cfg.out_dir
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairpair",
        description="Fair learning-to-rank via pairwise data reweighting",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("generate", cmd_generate),
        ("train", cmd_train),
        ("sweep", cmd_sweep),
        ("evaluate", cmd_evaluate),
    ):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to the JSON run config")
        sp.add_argument("--method", choices=METHODS, help="override config method")
        sp.add_argument(
            "--constraint", choices=sorted(PAIR_KINDS), help="override pairwise constraint"
        )
        sp.add_argument("--T", type=int, help="override the outer loop count")
        sp.add_argument("--seed", type=int, help="override the trainer seed")
        sp.add_argument("--out", help="override the output directory")
        sp.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        args.fn(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant breach
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
