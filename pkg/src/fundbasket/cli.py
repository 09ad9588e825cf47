"""``fundbasket`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 model error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import pandas as pd
from joblib import Parallel, delayed

from .config import RunConfig
from .dataset import build_panel, export_atomic, load_panel, save_panel
from .eval.harness import evaluate
from .eval.report import load_outcomes, write_report
from .exceptions import ConfigError, DataError, FundbasketError, ModelError
from .models import make_model
from .stats import presence_markdown, presence_stats, summary_stats, turnover_markdown, turnover_table
from .synth import generate

logger = logging.getLogger("fundbasket")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_DATA, EXIT_MODEL = 0, 1, 2, 3, 4


def _dump(obj, path: Path):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _sidecar_log(out: Path):
    """Timestamps go to ``run.log`` only, so other outputs stay byte-stable."""
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(handler)
    return handler


def _write_panel(panel, cfg: RunConfig, out: Path):
    panel_dir = save_panel(panel, out / "panel", provenance={"config": cfg.to_dict()})
    try:
        split = cfg.resolve_split(panel)
    except DataError as exc:
        logger.warning("no atomic split files written: %s", exc)
        split = None
    else:
        export_atomic(panel, split, out / "atomic")
    quarter = split.valid_target if split else panel.quarters[-1]
    (out / "stats.md").write_text(_stats_markdown(panel, quarter, cfg.repeat_window))
    return panel_dir


def _stats_markdown(panel, quarter, window) -> str:
    parts = [summary_stats(panel, quarter).to_markdown()]
    consecutive = [q for q in panel.quarters if q - 1 in panel.quarters]
    if consecutive:
        parts.append(turnover_markdown(turnover_table(panel, consecutive)))
    if quarter > panel.quarters[0] and panel.previous_quarters(quarter, window):
        overall, explore = presence_stats(panel, quarter, window)
        parts.append(presence_markdown(overall, explore, quarter))
    return "\n".join(parts)


def load_run_panel(cfg: RunConfig, out: Path):
    if cfg.source == "synth":
        return generate(cfg.synth_config())
    if cfg.source == "files":
        if "panel" in cfg.files:
            return load_panel(cfg.files["panel"])
        if "holdings" in cfg.files:
            return _panel_from_holdings(cfg.files["holdings"], cfg)
        raise ConfigError("files source needs files.panel or files.holdings")
    panel_dir = out / "panel"
    if not (panel_dir / "panel.json").exists():
        raise DataError(f"no built panel under {panel_dir}; run 'fundbasket build' first")
    return load_panel(panel_dir)


def _panel_from_holdings(path, cfg: RunConfig):
    path = Path(path)
    if not path.exists():
        raise DataError(f"holdings file {path} not found")
    df = pd.read_csv(path, sep="\t", dtype={"fund_id": str, "cusip": str, "ticker": str, "quarter": str},
                     keep_default_na=False, na_values={"weight": ["", "nan"]}, float_precision="round_trip")
    if "ticker" in df.columns:
        df["ticker"] = df["ticker"].replace("", None)
    return build_panel(df, min_history=cfg.min_history, window=cfg.window_quarters())


# -- commands ---------------------------------------------------------------


def cmd_ingest(cfg: RunConfig, out: Path) -> Path:
    from .ingest.edgar import EdgarClient
    from .ingest.figi import FigiClient
    from .ingest.pipeline import run_ingest

    if cfg.source != "edgar":
        raise ConfigError("ingest requires source = 'edgar'")
    settings = cfg.edgar
    cache_dir = Path(settings.get("cache_dir", out / "cache"))
    user_agent = settings.get("user_agent") or os.environ.get("FUNDBASKET_USER_AGENT", "")
    try:
        client = EdgarClient(cache_dir, user_agent=user_agent)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    figi = FigiClient(api_key=os.environ.get("OPENFIGI_API_KEY"))
    out_path = out / "holdings.tsv"
    report = run_ingest(settings["ciks"], cfg.window_quarters(), cache_dir, out_path,
                        edgar_client=client, figi_client=figi)
    _dump({"config": cfg.to_dict(), "ingest": report.to_dict()}, out / "ingest_report.json")
    return out_path


def cmd_build(cfg: RunConfig, out: Path) -> Path:
    holdings = cfg.files.get("holdings", out / "holdings.tsv")
    panel = _panel_from_holdings(holdings, cfg)
    return _write_panel(panel, cfg, out)


def cmd_synth(cfg: RunConfig, out: Path) -> Path:
    panel = generate(cfg.synth_config())
    return _write_panel(panel, cfg, out)


def _fit_and_evaluate(name: str, params: dict, panel, split, cfg: RunConfig):
    model = make_model(name, **params)
    model.fit(panel.restrict(split.history))
    return [evaluate(model, panel, split, target, cfg.ks, cfg.tasks, cfg.empty_target, name=name, label=label)
            for label, target in split.targets.items()]


def cmd_eval(cfg: RunConfig, out: Path) -> dict:
    panel = load_run_panel(cfg, out)
    split = cfg.resolve_split(panel)
    jobs = [(name, cfg.model_params(name)) for name in cfg.models]
    if cfg.jobs > 1:
        results = Parallel(n_jobs=cfg.jobs)(delayed(_fit_and_evaluate)(n, p, panel, split, cfg) for n, p in jobs)
    else:
        results = [_fit_and_evaluate(n, p, panel, split, cfg) for n, p in jobs]
    outcomes = [o for group in results for o in group]
    config = cfg.to_dict()
    config["resolved_split"] = split.to_dict()
    config["panel_fingerprint"] = panel.fingerprint()
    return write_report(outcomes, out, config, k=20 if 20 in cfg.ks else cfg.ks[-1],
                        level=cfg.confidence, resamples=cfg.bootstrap_resamples, seed=cfg.seed)


def cmd_report(files, out: Path, k=None) -> dict:
    if not files:
        raise ConfigError("report needs at least one outcome file")
    for f in files:
        if not Path(f).exists():
            raise DataError(f"outcome file {f} not found")
    try:
        outcomes, boot = load_outcomes(files)
    except (KeyError, ValueError) as exc:
        raise DataError(f"unreadable outcome file: {exc}") from exc
    return write_report(outcomes, out, {"merged_from": [str(f) for f in files]}, k=k,
                        level=boot.get("level", 0.95), resamples=boot.get("resamples", 2000),
                        seed=boot.get("seed", 0))


# -- argument parsing -------------------------------------------------------


def _split_list(values):
    if values is None:
        return None
    return [v for item in values for v in str(item).split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fundbasket", description="Next-basket recommendation for fund portfolios.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--seed", type=int, help="root random seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--jobs", type=int, help="models evaluated in parallel")
    common.add_argument("--tasks", action="append", help="nbr, nnbr and/or nbrr (repeat or comma-separate)")
    common.add_argument("--k", action="append", help="cut-off(s) K (repeat or comma-separate)")
    common.add_argument("--models", action="append", help="registry names of models to run")
    common.add_argument("--empty-target", choices=("skip", "zero"), dest="empty_target")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="download and normalize NPORT-P holdings")
    sub.add_parser("build", parents=[common], help="build the panel from a holdings file")
    sub.add_parser("synth", parents=[common], help="generate a synthetic panel")
    sub.add_parser("eval", parents=[common], help="fit models and evaluate on the validation and test targets")
    report = sub.add_parser("report", parents=[common], help="merge outcome files into one comparison table")
    report.add_argument("files", nargs="+", type=Path)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {"seed": args.seed, "jobs": args.jobs, "empty_target": args.empty_target,
                 "out": str(args.out) if args.out else None}
    tasks = _split_list(args.tasks)
    if tasks:
        overrides["tasks"] = tasks
    models = _split_list(args.models)
    if models:
        overrides["models"] = models
    ks = _split_list(args.k)
    if ks:
        try:
            overrides["ks"] = [int(k) for k in ks]
        except ValueError as exc:
            raise ConfigError(f"bad --k value: {exc}") from None
    if args.seed is not None and cfg.synth and "seed" in cfg.synth:
        synth = dict(cfg.synth)
        synth["seed"] = args.seed
        overrides["synth"] = synth
    return cfg.with_overrides(**overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    root = logging.getLogger()
    root.setLevel(logging.INFO)
    console = logging.StreamHandler()
    console.setLevel(logging.INFO if args.verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(console)
    handler = None
    try:
        cfg = resolve_config(args)
        out = Path(cfg.out)
        handler = _sidecar_log(out)
        logger.info("fundbasket %s (seed %d)", args.command, cfg.seed)
        if args.command == "report":
            ks = _split_list(args.k)
            result = cmd_report(args.files, out, int(ks[-1]) if ks else None)
        else:
            command = {"ingest": cmd_ingest, "build": cmd_build, "synth": cmd_synth, "eval": cmd_eval}[args.command]
            result = command(cfg, out)
        logger.info("done: %s", result)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except FundbasketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    finally:
        root.removeHandler(console)
        if handler is not None:
            logging.getLogger().removeHandler(handler)
            handler.close()


if __name__ == "__main__":
    sys.exit(main())
