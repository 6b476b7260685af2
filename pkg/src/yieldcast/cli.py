"""Command-line pipeline: ingest -> explore -> cv -> predict.

Each subcommand is a separate batch stage with on-disk intermediates, so
stages can be rerun independently. Exit codes: 0 success, 1 for IO or file
format problems, 2 for domain errors (empty join, failed folds, bad
shapes). All outputs are deterministic given flags and input bytes; reports
never embed paths or timestamps.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import evaluate, explore, ingest, persist
from .core import (
    FeatureConfig,
    FeatureMatrix,
    build_feature_matrix,
    train_test_split,
)
from .errors import (
    FormatError,
    InsufficientRows,
    InvalidConfig,
    IoError,
    ShapeError,
    UndefinedKappa,
    UnsupportedVersion,
    YieldcastError,
)
from .knn import KnnModel, fit_knn
from .linear import LinearModel, SgdConfig, fit_ols, fit_sgd
from .trees import ForestConfig, GbmConfig, TreeConfig, fit_cart, fit_forest, fit_gbm

MODEL_ORDER = ("ols", "sgd", "cart", "gbm", "knn", "forest")

KNN_K = 5

CONFIG_KEYS = {
    "cv": {
        "panel",
        "out",
        "k",
        "seed",
        "models",
        "encode_item",
        "encode_country",
        "test_fraction",
    },
}


def _threads_cap() -> int:
    """YIELDCAST_THREADS caps worker parallelism; 0 means auto.

    Execution is sequential either way (the contract is equality with a
    sequential run), so the value is validated and recorded only.
    """
    raw = os.environ.get("YIELDCAST_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        raise InvalidConfig(f"YIELDCAST_THREADS must be an integer, got {raw!r}")
    if value < 0:
        raise InvalidConfig(f"YIELDCAST_THREADS must be >= 0, got {value}")
    return value


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc


def _load_aliases(path: Optional[str]) -> ingest.CountryAliasMap:
    if path is None:
        return ingest.CountryAliasMap.load_default()
    return ingest.CountryAliasMap.from_csv(_read_bytes(path))


def _parse_inputs(args) -> tuple[dict, dict]:
    """Read and parse the four CSVs; returns (parsed, sha256 digests)."""
    raw = {
        "rain": _read_bytes(args.rain),
        "temp": _read_bytes(args.temp),
        "pesticides": _read_bytes(args.pesticides),
        "yield": _read_bytes(args.yield_path),
    }
    digests = {k: hashlib.sha256(v).hexdigest() for k, v in raw.items()}
    parsed = {
        "rain": ingest.parse_cckp_csv(raw["rain"], "precipitation"),
        "temp": ingest.parse_cckp_csv(raw["temp"], "temperature"),
        "pesticides": ingest.parse_fao_csv(raw["pesticides"]),
        "yield": ingest.parse_fao_csv(raw["yield"]),
    }
    for name, result in parsed.items():
        for w in result.warnings:
            print(f"warning [{name}]: {w}", file=sys.stderr)
        if result.row_errors:
            print(
                f"warning [{name}]: skipped {len(result.row_errors)} malformed rows",
                file=sys.stderr,
            )
    return parsed, digests


def _out_dir(path: str | Path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create output directory {out}: {exc}") from exc
    return out


# ------------------------------------------------------------------ ingest


def cmd_ingest(args) -> int:
    parsed, digests = _parse_inputs(args)
    aliases = _load_aliases(args.aliases)
    table, report = ingest.merge_panel(
        parsed["rain"].records,
        parsed["temp"].records,
        parsed["pesticides"].records,
        parsed["yield"].records,
        aliases,
        source_digests=digests,
    )
    out = _out_dir(args.out)
    persist.save_panel(table, out / "panel.json")
    persist.write_json(report.to_dict(), out / "merge_report.json")
    print(report.summary())
    return 0


# ----------------------------------------------------------------- explore


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    def cell(v) -> str:
        if isinstance(v, float):
            return format(v, ".17g")
        return str(v)

    lines = [",".join(header)]
    lines += [",".join(cell(v) for v in row) for row in rows]
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def cmd_explore(args) -> int:
    parsed, digests = _parse_inputs(args)
    aliases = _load_aliases(args.aliases)
    out = _out_dir(args.out)

    rain = explore.annual_mean(parsed["rain"].records, "rain_mm")
    temp = explore.annual_mean(parsed["temp"].records, "temp_c")
    pest_records = [
        r
        for r in parsed["pesticides"].records
        if r.item == ingest.PESTICIDE_ITEM and r.unit == "tonnes"
    ]
    pest = explore.annual_mean(pest_records, "pesticides_tonnes")
    explore.emit_plot_data(rain, out / "annual_rain.csv")
    explore.emit_plot_data(temp, out / "annual_temp.csv")
    explore.emit_plot_data(pest, out / "annual_pesticides.csv")

    freq = explore.item_frequency(parsed["yield"].records)
    _write_csv(out / "item_frequency.csv", ["item", "count"], freq)

    table, _ = ingest.merge_panel(
        parsed["rain"].records,
        parsed["temp"].records,
        parsed["pesticides"].records,
        parsed["yield"].records,
        aliases,
        source_digests=digests,
    )
    names = ["rain_mm", "temp_c", "pesticides_tonnes", "yield_hg_ha"]
    x = np.array([[getattr(r, c) for c in names] for r in table.rows])
    corr = explore.pearson_corr_matrix(x, names)
    _write_csv(
        out / "correlation_matrix.csv",
        ["feature", *corr.names],
        [[name, *corr.matrix[i]] for i, name in enumerate(corr.names)],
    )

    if args.vif:
        predictors = ["rain_mm", "temp_c", "pesticides_tonnes"]
        vif_values = explore.vif(x[:, :3], predictors)
        _write_csv(
            out / "vif.csv",
            ["feature", "vif"],
            [[name, vif_values[name]] for name in predictors],
        )

    print(f"explored {len(table)} merged rows covering {table.year_range()}")
    return 0


# ---------------------------------------------------------------------- cv


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one cross-validation run."""

    panel: Path
    out: Path
    k: int = 10
    seed: int = 0
    models: tuple[str, ...] = MODEL_ORDER
    encode_item: bool = True
    encode_country: bool = False
    test_fraction: float = 0.2

    def __post_init__(self):
        if not isinstance(self.k, int) or isinstance(self.k, bool) or self.k < 2:
            raise InvalidConfig(f"k must be an integer >= 2, got {self.k!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise InvalidConfig(f"seed must be an integer, got {self.seed!r}")
        if not self.models:
            raise InvalidConfig("at least one model must be selected")
        unknown = [name for name in self.models if name not in MODEL_ORDER]
        if unknown:
            raise InvalidConfig(
                f"unknown models {unknown}; choose from {list(MODEL_ORDER)}"
            )
        if len(set(self.models)) != len(self.models):
            raise InvalidConfig("duplicate model names selected")
        if not isinstance(self.test_fraction, float) or not 0.0 < self.test_fraction < 1.0:
            raise InvalidConfig(
                f"test_fraction must be a float in (0, 1), got {self.test_fraction!r}"
            )
        if not self.panel.exists():
            raise IoError(f"panel file {self.panel} does not exist")


def _parse_models(value) -> tuple[str, ...]:
    if isinstance(value, str):
        return tuple(p.strip() for p in value.split(",") if p.strip())
    if isinstance(value, (list, tuple)):
        return tuple(str(p) for p in value)
    raise InvalidConfig(f"models must be a comma-separated string, got {value!r}")


def _run_config(args) -> RunConfig:
    settings: dict[str, Any] = {}
    if args.config is not None:
        doc = persist.read_json(args.config)
        if not isinstance(doc, dict):
            raise InvalidConfig(f"config file {args.config} must hold a JSON object")
        unknown = set(doc) - CONFIG_KEYS["cv"]
        if unknown:
            raise InvalidConfig(f"unknown config keys {sorted(unknown)}")
        settings.update(doc)
    for key in CONFIG_KEYS["cv"]:
        flag_value = getattr(args, key)
        if flag_value is not None:
            settings[key] = flag_value

    out = Path(settings.get("out", "."))
    panel = Path(settings["panel"]) if "panel" in settings else out / "panel.json"
    return RunConfig(
        panel=panel,
        out=out,
        k=settings.get("k", 10),
        seed=settings.get("seed", 0),
        models=_parse_models(settings.get("models", ",".join(MODEL_ORDER))),
        encode_item=bool(settings.get("encode_item", True)),
        encode_country=bool(settings.get("encode_country", False)),
        test_fraction=settings.get("test_fraction", 0.2),
    )


def model_specs(
    names: Sequence[str],
    onehot: Sequence[bool],
    feature_names: Sequence[str],
    seed: int,
) -> list[evaluate.ModelSpec]:
    """ModelSpec per selected name, in the given order.

    Scaled models receive the one-hot mask so indicator columns pass
    through standardization untouched.
    """
    mask = tuple(onehot)
    fnames = tuple(feature_names)
    factories = {
        "ols": lambda: evaluate.ModelSpec(
            "ols",
            fit=lambda x, y: fit_ols(x, y, feature_names=fnames),
            predict=persist.predict_model,
        ),
        "sgd": lambda: evaluate.ModelSpec(
            "sgd",
            fit=lambda x, y: fit_sgd(
                x, y, SgdConfig(seed=seed), passthrough=mask, feature_names=fnames
            ),
            predict=persist.predict_model,
        ),
        "cart": lambda: evaluate.ModelSpec(
            "cart",
            fit=lambda x, y: fit_cart(x, y, TreeConfig()),
            predict=persist.predict_model,
        ),
        "gbm": lambda: evaluate.ModelSpec(
            "gbm",
            fit=lambda x, y: fit_gbm(x, y, GbmConfig(seed=seed)),
            predict=persist.predict_model,
        ),
        "knn": lambda: evaluate.ModelSpec(
            "knn",
            fit=lambda x, y: fit_knn(
                x, y, k=KNN_K, passthrough=mask, feature_names=fnames
            ),
            predict=persist.predict_model,
        ),
        "forest": lambda: evaluate.ModelSpec(
            "forest",
            fit=lambda x, y: fit_forest(x, y, ForestConfig(seed=seed)),
            predict=persist.predict_model,
        ),
    }
    return [factories[name]() for name in names]


def _fmt_mean_std(summary: evaluate.MetricSummary) -> str:
    if summary.mean is None:
        return "n/a"
    if summary.std is None:
        return f"{summary.mean:.4g}"
    return f"{summary.mean:.4g} ± {summary.std:.4g}"


def render_cv_table(results: Sequence[evaluate.CvResult]) -> str:
    """Plain-text table: one row per model, mean +/- std per metric."""
    header = ["model", *evaluate.METRIC_NAMES]
    rows = [
        [r.model_label, *(_fmt_mean_std(r.summary[m]) for m in evaluate.METRIC_NAMES)]
        for r in results
    ]
    widths = [
        max(len(header[j]), *(len(row[j]) for row in rows)) if rows else len(header[j])
        for j in range(len(header))
    ]
    lines = [
        "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def render_ensemble_block(result: evaluate.CvResult, k: int) -> str:
    lines = [f"{result.model_label}: mean ± sample std over {k} folds"]
    for metric in evaluate.METRIC_NAMES:
        lines.append(f"  {metric}: {_fmt_mean_std(result.summary[metric])}")
    return "\n".join(lines)


def _kappa_entry(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    try:
        return evaluate.cohen_kappa(y_true, y_pred).to_dict()
    except (UndefinedKappa, InsufficientRows) as exc:
        return {"undefined": str(exc)}


def cmd_cv(args) -> int:
    _threads_cap()
    cfg = _run_config(args)
    table = persist.load_panel(cfg.panel)
    feature_cfg = FeatureConfig(
        encode_item=cfg.encode_item, encode_country=cfg.encode_country
    )
    m = build_feature_matrix(table, feature_cfg)
    plan = evaluate.make_folds(m.n, cfg.k, cfg.seed)
    specs = model_specs(cfg.models, m.onehot, m.feature_names, cfg.seed)

    if len(specs) >= 2:
        member_log: list[dict] = []
        ensemble_result = evaluate.ensemble_cv(specs, m, plan, member_log=member_log)
        per_model = []
        for pos, name in enumerate(cfg.models):
            key = f"{pos}:{name}"
            per_fold = [
                evaluate.metrics_bundle(
                    m.y[entry["test_indices"]], entry["members"][key], strict=False
                )
                for entry in member_log
            ]
            per_model.append(
                evaluate.CvResult(
                    model_label=name,
                    per_fold=tuple(per_fold),
                    summary=evaluate.summarize_folds(per_fold),
                )
            )
    else:
        ensemble_result = None
        per_model = [evaluate.cross_validate(specs[0], m, plan)]

    train, test = train_test_split(m, cfg.test_fraction, cfg.seed)
    fitted: dict[str, Any] = {}
    holdout_metrics: dict[str, dict] = {}
    kappa: dict[str, dict] = {}
    for spec in specs:
        model = spec.fit(train.x, train.y)
        fitted[spec.name] = model
        yhat = np.asarray(spec.predict(model, test.x), dtype=float)
        holdout_metrics[spec.name] = evaluate.metrics_bundle(
            test.y, yhat, strict=False
        ).to_dict()
        kappa[spec.name] = _kappa_entry(test.y, yhat)
    if len(specs) >= 2:
        ensemble_model = persist.EnsembleModel(
            members=tuple((name, fitted[name]) for name in cfg.models)
        )
        fitted["ensemble"] = ensemble_model
        yhat = persist.predict_model(ensemble_model, test.x)
        holdout_metrics["ensemble"] = evaluate.metrics_bundle(
            test.y, yhat, strict=False
        ).to_dict()
        kappa["ensemble"] = _kappa_entry(test.y, yhat)

    eda: dict[str, Any] = {
        "item_counts": [
            [item, sum(1 for r in table.rows if r.item == item)]
            for item in table.items()
        ],
        "n_rows": len(table),
        "year_range": list(table.year_range()),
    }
    names = ["rain_mm", "temp_c", "pesticides_tonnes", "yield_hg_ha"]
    panel_x = np.array([[getattr(r, c) for c in names] for r in table.rows])
    try:
        corr = explore.pearson_corr_matrix(panel_x, names)
        eda["correlation"] = {"names": list(corr.names), "matrix": corr.matrix}
    except YieldcastError as exc:
        eda["correlation"] = {"undefined": str(exc)}

    table_text = render_cv_table(
        per_model + ([ensemble_result] if ensemble_result else [])
    )
    report = persist.RunReport(
        environment={
            "k": cfg.k,
            "seed": cfg.seed,
            "models": list(cfg.models),
            "test_fraction": cfg.test_fraction,
            "feature_config": {
                "use_rain": feature_cfg.use_rain,
                "use_temp": feature_cfg.use_temp,
                "use_pesticides": feature_cfg.use_pesticides,
                "encode_item": feature_cfg.encode_item,
                "encode_country": feature_cfg.encode_country,
            },
            "knn_k": KNN_K,
        },
        merge_report=table.provenance.get("merge", {}),
        eda=eda,
        per_model=tuple(per_model),
        ensemble=ensemble_result,
        kappa=kappa,
        holdout={
            "test_fraction": cfg.test_fraction,
            "n_train": train.n,
            "n_test": test.n,
            "metrics": holdout_metrics,
        },
        table=table_text,
    )

    out = _out_dir(cfg.out)
    persist.write_report(report, out / "report.json")
    models_dir = out / "models"
    try:
        models_dir.mkdir(exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {models_dir}: {exc}") from exc
    for name, model in fitted.items():
        persist.save_model(model, models_dir / f"{name}.json")

    print(table_text)
    if ensemble_result is not None:
        print()
        print(render_ensemble_block(ensemble_result, cfg.k))
    return 0


# ----------------------------------------------------------------- predict


def _expected_features(model) -> Optional[int]:
    """Exact column count when the model records one; trees do not."""
    if isinstance(model, LinearModel):
        return len(model.coefficients)
    if isinstance(model, KnnModel):
        return model.x_train.shape[1]
    if isinstance(model, persist.EnsembleModel):
        for _, member in model.members:
            exact = _expected_features(member)
            if exact is not None:
                return exact
    return None


def _read_feature_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    text = _read_bytes(path).decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise FormatError(f"{path}: empty input")
    header = [c.strip() for c in rows[0]]
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{i}: expected {len(header)} cells, got {len(row)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise FormatError(f"{path}:{i}: non-numeric cell: {exc}") from exc
    if not data:
        raise FormatError(f"{path}: no data rows")
    return header, np.array(data)


def cmd_predict(args) -> int:
    model = persist.load_model(args.model)
    header, x = _read_feature_csv(args.input)

    expected = _expected_features(model)
    if expected is not None and x.shape[1] != expected:
        raise ShapeError(
            f"model expects {expected} feature columns, input has {x.shape[1]}"
        )
    names = getattr(model, "feature_names", ())
    if names and list(names) != header:
        raise ShapeError(
            f"input header does not match the model's feature names {list(names)}"
        )
    try:
        preds = persist.predict_model(model, x)
    except IndexError as exc:
        raise ShapeError(f"input has too few columns for this model: {exc}") from exc

    lines = ["prediction"] + [format(float(v), ".17g") for v in preds]
    try:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {len(preds)} predictions")
    return 0


# ------------------------------------------------------------------ parser


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rain", required=True, help="CCKP precipitation CSV")
    p.add_argument("--temp", required=True, help="CCKP temperature CSV")
    p.add_argument("--pesticides", required=True, help="FAOSTAT pesticides CSV")
    p.add_argument(
        "--yield", dest="yield_path", required=True, help="FAOSTAT crop yield CSV"
    )
    p.add_argument(
        "--aliases",
        default=None,
        help="country alias CSV (source_name,iso3); default: packaged table",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yieldcast",
        description="Crop yield modeling pipeline: ingest, explore, cross-validate, predict.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser(
        "ingest", help="merge the four input CSVs into a panel table"
    )
    _add_input_flags(p_ingest)
    p_ingest.add_argument(
        "--out", default=".", help="output directory (default: current directory)"
    )
    p_ingest.set_defaults(func=cmd_ingest)

    p_explore = sub.add_parser(
        "explore", help="write descriptive statistics for the inputs"
    )
    _add_input_flags(p_explore)
    p_explore.add_argument(
        "--out", default=".", help="output directory (default: current directory)"
    )
    p_explore.add_argument(
        "--vif",
        action="store_true",
        help="also write variance inflation factors (default: off)",
    )
    p_explore.set_defaults(func=cmd_explore)

    p_cv = sub.add_parser(
        "cv", help="cross-validate the models and write the run report"
    )
    p_cv.add_argument(
        "--panel", default=None, help="panel JSON from ingest (default: <out>/panel.json)"
    )
    p_cv.add_argument(
        "--out", default=None, help="output directory (default: current directory)"
    )
    p_cv.add_argument("--k", type=int, default=None, help="fold count (default: 10)")
    p_cv.add_argument("--seed", type=int, default=None, help="RNG seed (default: 0)")
    p_cv.add_argument(
        "--models",
        default=None,
        help="comma-separated subset of ols,sgd,cart,gbm,knn,forest (default: all six)",
    )
    p_cv.add_argument(
        "--encode-item",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="one-hot encode the crop item (default: on)",
    )
    p_cv.add_argument(
        "--encode-country",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="one-hot encode the country (default: off)",
    )
    p_cv.add_argument(
        "--test-fraction",
        type=float,
        default=None,
        help="holdout fraction for the saved models and kappa (default: 0.2)",
    )
    p_cv.add_argument(
        "--config",
        default=None,
        help="JSON file with defaults for these flags; explicit flags win",
    )
    p_cv.set_defaults(func=cmd_cv)

    p_predict = sub.add_parser(
        "predict", help="apply a saved model to new feature rows"
    )
    p_predict.add_argument("--model", required=True, help="model JSON from cv")
    p_predict.add_argument(
        "--input", required=True, help="CSV of feature rows (header + numbers)"
    )
    p_predict.add_argument(
        "--out", default="predictions.csv", help="output CSV (default: predictions.csv)"
    )
    p_predict.set_defaults(func=cmd_predict)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IoError, FormatError, UnsupportedVersion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except YieldcastError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
