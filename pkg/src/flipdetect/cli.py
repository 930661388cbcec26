"""Command-line entry point: ``flipdetect <command> [flags]``.

Every command writes its resolved flags to ``<out>/run.json`` and its
machine-readable results under ``--out``; logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import evaluation, metadb, metalearner
from ._seeding import derive_seed
from .attacks import ATTACKS, run_attack
from .classifiers import TrainConfig
from .cmeasures import extract_dict
from .data import DatasetError, Difficulty, load_csv, save_csv, synth_by_difficulty, synth_noise_grid
from .detector import EXIT_ERROR, CalibratedTNR, Heuristic, detect

log = logging.getLogger("flipdetect")


class UsageError(Exception):
    pass


def _rate_grid(text: str) -> list[float]:
    """``start:stop:step`` inclusive of ``stop``, e.g. 0:0.40:0.05 -> 9 rates."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty grid {text!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 10) for i in range(count)]


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    names = [v.strip() for v in text.split(",") if v.strip()]
    bad = [n for n in names if n not in ATTACKS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown attack {bad[0]!r}; choose from {', '.join(ATTACKS)}")
    return names


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _load_dir(path) -> list:
    files = sorted(Path(path).glob("*.csv"))
    if not files:
        raise UsageError(f"no CSV datasets in {path}; create some with `flipdetect synth`")
    return [load_csv(f) for f in files]


def _require_file(path, flag: str, hint: str) -> Path:
    if path is None:
        raise UsageError(f"missing required flag {flag}; {hint}")
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{flag} {path} does not exist; {hint}")
    return path


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, seed=args.seed)


# ------------------------------------------------------------- commands

def cmd_synth(args, out: Path) -> int:
    if args.noise_grid is not None:
        sets = synth_noise_grid(args.count, args.noise_grid, args.seed)
    else:
        sets = synth_by_difficulty(args.difficulty, args.count, args.seed)
    for ds in sets:
        save_csv(ds, out / f"{ds.name}.csv")
    log.info("wrote %d datasets to %s", len(sets), out)
    return 0


def cmd_attack(args, out: Path) -> int:
    ds = load_csv(_require_file(args.input, "--in", "pass a dataset CSV"))
    res = run_attack(args.attack, ds, args.rate, seed=derive_seed(args.seed, "attack"),
                     cfg=_train_cfg(args))
    target = out / f"{ds.name}-{args.attack}-{args.rate:g}.csv"
    save_csv(res.poisoned, target, {"attack": args.attack, "rate": args.rate, "seed": args.seed,
                                    "flipped_indices": res.flipped_indices.tolist(),
                                    "rounds_run": res.rounds_run})
    log.info("%s: flipped %d labels -> %s", args.attack, res.flipped_indices.size, target)
    return 0


def cmd_cmeasures(args, out: Path) -> int:
    ds = load_csv(_require_file(args.input, "--in", "pass a dataset CSV"))
    values = extract_dict(ds, args.seed)
    text = json.dumps(values, indent=2) + "\n"
    (out / f"{ds.name}.cmeasures.json").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_build_metadb(args, out: Path) -> int:
    datasets = _load_dir(_require_file(args.data, "--data", "point it at a directory of CSVs"))
    db = metadb.build(datasets, args.rates, [args.seed], _train_cfg(args), args.attacks,
                      args.threads)
    metadb.save(db, out / "metadb.csv")
    log.info("meta-database: %d rows", len(db))
    return 0


def cmd_train_meta(args, out: Path) -> int:
    db = metadb.load(_require_file(args.db, "--db", "build one with `flipdetect build-metadb`"))
    ml = metalearner.fit(db, args.alphas, args.folds, args.seed)
    ml.save(out / "meta_learner.json")
    log.info("alpha=%g, rows=%d", ml.alpha, len(ml.training_row_ids))
    return 0


def _policy(args):
    if args.calibration is None:
        return Heuristic(args.delta)
    obj = json.loads(_require_file(args.calibration, "--calibration",
                                   "produce one with `flipdetect evaluate --task lodo`").read_text())
    scores = obj["diva"] if isinstance(obj, dict) else obj
    return CalibratedTNR(args.target_tnr, tuple(scores))


def cmd_detect(args, out: Path) -> int:
    model = _require_file(args.model, "--model",
                          "train a meta-learner with `flipdetect train-meta` and pass its JSON")
    ds = load_csv(_require_file(args.input, "--in", "pass a dataset CSV"))
    ml = metalearner.MetaLearner.load(model)
    verdict = detect(ds, ml, _policy(args), _train_cfg(args), args.seed)
    text = verdict.to_json() + "\n"
    (out / "verdict.json").write_text(text)
    sys.stdout.write(text)
    return verdict.exit_code


def cmd_evaluate(args, out: Path) -> int:
    datasets = _load_dir(_require_file(args.data, "--data", "point it at a directory of CSVs"))
    sources = {ds.name: ds for ds in datasets}
    cfg = _train_cfg(args)
    if args.task == "lodo":
        result, db = evaluation.lodo_rmse(datasets, args.attacks, args.rates, cfg, [args.seed],
                                          args.threads)
        metadb.save(db, out / "metadb.csv")
        evaluation.save_rmse_table(result, out / "rmse.csv")
        evaluation.save_scores(result, out / "scores.csv")
        groups = sorted({evaluation.group_of(ds) for ds in datasets})
        for group in ["all"] + groups:
            ids = None if group == "all" else [n for n, ds in sources.items()
                                                 if evaluation.group_of(ds) == group]
            for attack in args.attacks:
                preds = result.select(ids, ("clean", attack), args.roc_rates)
                labels = [p.row.variant != "clean" for p in preds]
                if not any(labels) or all(labels):
                    continue
                curve = evaluation.roc_auc([p.score for p in preds], labels)
                evaluation.save_roc(curve, out / f"roc_{group}_{attack}.csv",
                                    {"group": group, "attack": attack, "n": len(preds),
                                     "rates": list(args.roc_rates)})
        calib = evaluation.calibration_scores(result, sources)
        (out / "calibration.json").write_text(json.dumps(calib, indent=2) + "\n")
        for attack in args.attacks:
            log.info("mean RMSE %s: %.4f", attack, result.mean_rmse(attack))
        return 0
    if args.task == "attacks":
        db = metadb.build(datasets, args.rates, [args.seed], cfg, args.attacks, args.threads)
        evaluation.save_attack_effects(evaluation.attack_effects(db), out / "attack_effects.csv")
        return 0
    # heatmap
    ml = metalearner.MetaLearner.load(_require_file(
        args.model, "--model", "train a meta-learner with `flipdetect train-meta`"))
    db = metadb.build(datasets, args.rates, [args.seed], cfg, ("falfa",), args.threads,
                      empirical=True)
    if args.calibration is not None:
        calib = json.loads(_require_file(args.calibration, "--calibration", "").read_text())
    else:
        log.warning("no --calibration; calibrating on the clean sets of this grid")
        clean = [r for r in db.rows if r.variant == "clean"]
        calib = {"diva": evaluation.diva_scores(clean, ml).tolist(),
                 "baseline": evaluation.baseline_scores(clean, sources).tolist()}
    thresholds = {k: evaluation.calibrate(calib[k], args.target_tnr) for k in ("diva", "baseline")}
    grids = evaluation.heatmap_experiment(db.rows, ml, sources, args.rates, thresholds, args.rows)
    for name, grid in grids.items():
        evaluation.save_heatmap(grid, out / f"heatmap_{name}.csv")
    return 0


COMMANDS = {"synth": cmd_synth, "attack": cmd_attack, "cmeasures": cmd_cmeasures,
            "build-metadb": cmd_build_metadb, "train-meta": cmd_train_meta,
            "detect": cmd_detect, "evaluate": cmd_evaluate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=_positive, default=1)
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--epochs", type=_positive, default=TrainConfig().epochs,
                        help="MLP epochs for victims, FALFA surrogates and CV")

    parser = argparse.ArgumentParser(prog="flipdetect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic datasets")
    p.add_argument("--count", type=_positive, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--difficulty", choices=[d.value for d in Difficulty], default="easy")
    g.add_argument("--noise-grid", type=_rate_grid, metavar="START:STOP:STEP")

    p = sub.add_parser("attack", parents=[common], help="poison a dataset's labels")
    p.add_argument("--attack", choices=ATTACKS, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--in", dest="input")

    p = sub.add_parser("cmeasures", parents=[common], help="compute complexity measures")
    p.add_argument("--in", dest="input")

    p = sub.add_parser("build-metadb", parents=[common], help="build the meta-database")
    p.add_argument("--data")
    p.add_argument("--rates", type=_float_list, default=list(metadb.DEFAULT_RATES))
    p.add_argument("--attacks", type=_name_list, default=list(metadb.TRAINING_ATTACKS))

    p = sub.add_parser("train-meta", parents=[common], help="fit the meta-learner")
    p.add_argument("--db")
    p.add_argument("--alphas", type=_float_list, default=list(metalearner.DEFAULT_ALPHAS))
    p.add_argument("--folds", type=_positive, default=5)

    p = sub.add_parser("detect", parents=[common], help="flag a poisoned training set")
    p.add_argument("--in", dest="input")
    p.add_argument("--model")
    p.add_argument("--calibration", help="JSON list of clean scores, or calibration.json")
    p.add_argument("--target-tnr", type=float, default=0.98)
    p.add_argument("--delta", type=float, default=5.0)

    p = sub.add_parser("evaluate", parents=[common], help="run an evaluation protocol")
    p.add_argument("--task", choices=["lodo", "heatmap", "attacks"], default="lodo")
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--calibration")
    p.add_argument("--rates", type=_float_list, default=list(metadb.DEFAULT_RATES))
    p.add_argument("--attacks", type=_name_list, default=list(evaluation.EVAL_ATTACKS))
    p.add_argument("--roc-rates", type=_float_list, default=[0.2, 0.3])
    p.add_argument("--rows", choices=["difficulty", "noise"], default="difficulty")
    p.add_argument("--target-tnr", type=float, default=0.98)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        run = {k: v for k, v in sorted(vars(args).items())}
        run["version"] = __version__
        (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n")
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        sys.stderr.write(f"{parser.prog} {args.command}: error: {exc}\n")
        return EXIT_ERROR
    except (DatasetError, ValueError, OSError, RuntimeError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
