"""Command-line front end: synthesize, train, refine, evaluate, sweep, replay.

Exit codes: 0 success, 2 usage, 3 data/validation, 4 numerical failure.
Every file-writing command drops a ``key = value`` manifest alongside its
outputs recording the exact argv, the effective configuration and the
SHA-256 of each deterministic output, so a run can be replayed and
verified bit for bit. Timing fields (and the step log, which contains
per-step wall-clock) are excluded from that guarantee.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import shlex
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (align, load_labels, load_model, load_table,
                     normalize_rows, save_model, write_labels, write_table,
                     _atomic_write_text)
from .elbo import Edge
from .errors import (BemError, ConfigError, DataError, EvalError,
                     NumericalError, ShapeError, TrainingError)
from .evalkit import (cluster_ratio_detail, classify_accuracy, concat_tables,
                      hit_recall, make_split, random_project,
                      similarity_histogram, train_classifier)
from .rng import named_rng
from .synthgen import SynthSpec, generate, load_truth, oracle_error, write_truth
from .trainer import TrainConfig, refine, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

EDGE_NAMES = {"translation": Edge.TRANSLATION, "inner": Edge.INNER_PRODUCT,
              "identity": Edge.IDENTITY}

TRAIN_DEFAULTS = {
    "nB": 500, "epochs": 20.0, "lambda1": 1.0, "lambda2": 1.0,
    "lr": 0.001, "nh": 500, "bootstrap": 30, "n_iter": 1,
    "seed": 0, "normalize": True, "align": "intersect",
}

SWEEP_PARAMS = {
    "lambda1": ("lambda1", float), "lambda2": ("lambda2", float),
    "lr": ("learning_rate", float), "nB": ("n_batch", int),
    "nh": ("hidden_dim", int), "epochs": ("epochs", float),
}


class UsageError(Exception):
    pass


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest_path(target: Path) -> Path:
    target = Path(target)
    if target.is_dir():
        return target / "manifest.txt"
    return target.with_name(target.name + ".manifest.txt")


def write_manifest(target, command: str, argv: list[str], seed,
                   config: dict, inputs: dict, outputs: list,
                   unhashed_outputs: list = (), wall_s: float = 0.0) -> Path:
    lines = [
        f"command = {command}",
        f"tool_version = {__version__}",
        f"created_utc = {datetime.now(timezone.utc).isoformat()}",
        f"seed = {seed}",
        f"argv = {json.dumps(list(argv))}",
        f"wall_clock_s = {wall_s:.3f}",
    ]
    for key, path in sorted(inputs.items()):
        lines.append(f"input.{key} = {path}")
    for path in outputs:
        lines.append(f"output.{Path(path).name} = {path}")
        lines.append(f"sha256.{Path(path).name} = {_sha256_file(path)}")
    for path in unhashed_outputs:
        lines.append(f"output.{Path(path).name} = {path}")
    for key in sorted(config):
        lines.append(f"cfg.{key} = {config[key]}")
    path = _manifest_path(target)
    _atomic_write_text(path, "\n".join(lines) + "\n")
    return path


def read_manifest(path) -> dict:
    entries: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if " = " not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split(" = ", 1)
        entries[key.strip()] = value
    return entries


def read_config_file(path, allowed: set[str]) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def resolve_train_options(args) -> tuple[TrainConfig, str]:
    """Merge flags over config-file values over built-in defaults."""
    file_values: dict[str, str] = {}
    if getattr(args, "config", None):
        allowed = set(TRAIN_DEFAULTS) | {"mode", "edge"}
        file_values = read_config_file(args.config, allowed)

    def pick(key, cast):
        flag = getattr(args, key.replace("-", "_"), None)
        if flag is not None:
            return flag
        if key in file_values:
            try:
                return cast(file_values[key])
            except ValueError as exc:
                raise ConfigError(f"bad config value for {key}: {exc}")
        return TRAIN_DEFAULTS[key]

    mode = args.mode if args.mode is not None else file_values.get("mode", "p")
    if mode not in ("p", "i"):
        raise UsageError(f"unknown mode {mode!r}")
    edge_name = args.edge if args.edge is not None else file_values.get("edge")
    if mode == "i":
        if edge_name is not None and edge_name != "identity":
            raise UsageError("--mode i fixes the identity edge; drop --edge or use identity")
        edge = Edge.IDENTITY
    else:
        edge = EDGE_NAMES[edge_name] if edge_name is not None else Edge.TRANSLATION

    normalize = args.normalize
    if normalize is None:
        raw = file_values.get("normalize")
        normalize = TRAIN_DEFAULTS["normalize"] if raw is None else _parse_bool(raw)

    cfg = TrainConfig(
        n_batch=int(pick("nB", int)),
        epochs=float(pick("epochs", float)),
        lambda1=float(pick("lambda1", float)),
        lambda2=float(pick("lambda2", float)),
        learning_rate=float(pick("lr", float)),
        hidden_dim=int(pick("nh", int)),
        n_bootstrap=int(pick("bootstrap", int)),
        n_iter=int(pick("n_iter", int)),
        seed=int(pick("seed", int)),
        edge=edge,
        normalize_inputs=normalize,
    )
    cfg.validate()
    align_policy = pick("align", str)
    if align_policy not in ("strict", "intersect"):
        raise UsageError(f"unknown alignment policy {align_policy!r}")
    return cfg, align_policy


def _steplog_text(report) -> str:
    lines = ["step\telbo\trecon\tkl\twall_s"]
    for r in report.records:
        lines.append(f"{r.step}\t{r.elbo:.17g}\t{r.recon:.17g}\t{r.kl:.17g}\t{r.wall_s:.6f}")
    return "\n".join(lines) + "\n"


def _report_lines(pairs) -> str:
    return "\n".join(f"{k} = {v}" for k, v in pairs) + "\n"


def _emit_report(pairs, out_dir: Path | None) -> list[Path]:
    text = _report_lines(pairs)
    sys.stdout.write(text)
    written = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        report_path = out_dir / "report.txt"
        _atomic_write_text(report_path, text)
        summary_path = out_dir / "summary.json"
        _atomic_write_text(summary_path,
                           json.dumps(dict(pairs), indent=2, sort_keys=True) + "\n")
        written = [report_path, summary_path]
    return written


def cmd_synth(args, argv) -> int:
    t0 = time.perf_counter()
    out_dir = Path(args.out)
    if out_dir.exists() and not args.force:
        raise DataError(f"output directory {out_dir} exists; pass --force to overwrite")
    spec = SynthSpec(n_entities=args.n, kg_dim=args.kg_dim, bg_dim=args.bg_dim,
                     n_clusters=args.clusters, delta_scale=args.delta_scale,
                     noise_scale=args.noise_scale, true_hidden=args.true_hidden,
                     jitter_scale=args.jitter, signal_std=args.signal_std,
                     seed=args.seed)
    truth = generate(spec)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "kg.tsv": out_dir / "kg.tsv",
        "bg.tsv": out_dir / "bg.tsv",
        "labels.tsv": out_dir / "labels.tsv",
        "truth.tsv": out_dir / "truth.tsv",
    }
    write_table(truth.kg, paths["kg.tsv"])
    write_table(truth.bg, paths["bg.tsv"])
    write_labels(truth.labels, paths["labels.tsv"])
    write_truth(truth, paths["truth.tsv"])
    write_manifest(out_dir, "synth", argv, spec.seed,
                   config=vars(spec).copy(), inputs={},
                   outputs=list(paths.values()),
                   wall_s=time.perf_counter() - t0)
    print(f"wrote {len(paths) + 1} files to {out_dir}")
    return EXIT_OK


def _load_aligned(kg_path, bg_path, policy: str):
    kg = load_table(kg_path)
    bg = load_table(bg_path)
    kg, bg, result = align(kg, bg, policy=policy)
    if result.dropped_kg or result.dropped_bg:
        print(f"aligned on {result.kept} ids "
              f"(dropped {result.dropped_kg} kg, {result.dropped_bg} bg)",
              file=sys.stderr)
    return kg, bg


def cmd_train(args, argv) -> int:
    t0 = time.perf_counter()
    cfg, policy = resolve_train_options(args)
    kg, bg = _load_aligned(args.kg, args.bg, policy)
    proj_net, infer_net, report = train(kg, bg, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model(proj_net, infer_net, cfg, out)
    steplog = Path(args.log) if args.log else out.with_name(out.name + ".steplog.tsv")
    _atomic_write_text(steplog, _steplog_text(report))
    write_manifest(out, "train", argv, cfg.seed, config=cfg.to_dict(),
                   inputs={"kg": args.kg, "bg": args.bg},
                   outputs=[out], unhashed_outputs=[steplog],
                   wall_s=time.perf_counter() - t0)
    final = report.records[-1]
    print(f"trained {report.n_steps} steps; final elbo {final.elbo:.6f}; "
          f"checksum {report.param_checksum[:16]}")
    return EXIT_OK


def cmd_refine(args, argv) -> int:
    t0 = time.perf_counter()
    proj_net, infer_net, cfg = load_model(args.model)
    kg, bg = _load_aligned(args.kg, args.bg, "intersect")
    if cfg.normalize_inputs:
        kg = normalize_rows(kg)
        bg = normalize_rows(bg)
    try:
        kg_refined, bg_refined = refine(kg, bg, proj_net, infer_net)
    except ShapeError as exc:
        raise ShapeError(f"model does not fit tables {args.kg} / {args.bg}: {exc}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    kg_path = out_dir / "kg_refined.tsv"
    bg_path = out_dir / "bg_refined.tsv"
    write_table(kg_refined, kg_path)
    write_table(bg_refined, bg_path)
    write_manifest(out_dir, "refine", argv, cfg.seed, config=cfg.to_dict(),
                   inputs={"kg": args.kg, "bg": args.bg, "model": args.model},
                   outputs=[kg_path, bg_path],
                   wall_s=time.perf_counter() - t0)
    print(f"wrote refined tables for {len(kg_refined)} entities to {out_dir}")
    return EXIT_OK


def _eval_classify(args, table):
    labels = load_labels(args.labels)
    ids = tuple(eid for eid in table.ids if eid in labels.mapping)
    if not ids:
        raise EvalError("no labeled entities overlap the table")
    accs = []
    for offset in range(args.splits):
        split = make_split(ids, args.seed + offset, args.train_frac)
        model = train_classifier(table, labels, split, reg=args.reg,
                                 epochs=args.epochs, lr=args.lr)
        accs.append(classify_accuracy(model, table, labels, split.test_ids))
    pairs = [("task", "classify"), ("n_labeled", len(ids)),
             ("splits", args.splits),
             ("accuracy_mean", float(np.mean(accs))),
             ("accuracy_sd", float(np.std(accs)))]
    for s, acc in enumerate(accs):
        pairs.append((f"accuracy.split{s}", acc))
    if args.project_dim is not None:
        proj_accs = []
        split = make_split(ids, args.seed, args.train_frac)
        for p in range(args.n_proj):
            projected = random_project(table, args.project_dim,
                                       named_rng(args.seed, f"eval.proj.{p}"))
            model = train_classifier(projected, labels, split, reg=args.reg,
                                     epochs=args.epochs, lr=args.lr)
            proj_accs.append(classify_accuracy(model, projected, labels, split.test_ids))
        pairs += [("project_dim", args.project_dim), ("n_proj", args.n_proj),
                  ("proj_accuracy_mean", float(np.mean(proj_accs))),
                  ("proj_accuracy_stderr",
                   float(np.std(proj_accs) / np.sqrt(len(proj_accs))))]
    return pairs, []


def _eval_histogram(args, table, out_dir):
    hist = similarity_histogram(table, args.n_pairs, args.bins,
                                named_rng(args.seed, "eval.hist"))
    pairs = [("task", "histogram"), ("n_pairs", hist.n_pairs),
             ("n_used", hist.n_used), ("n_skipped", hist.n_skipped),
             ("mass_sum", float(np.sum(hist.mass))),
             ("mean_abs_cosine", hist.mean()),
             ("variance_abs_cosine", hist.variance())]
    extra = []
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        hist_path = out_dir / "histogram.tsv"
        rows = "\n".join(f"{lo:.17g}\t{hi:.17g}\t{mass:.17g}"
                         for lo, hi, mass in hist.rows())
        _atomic_write_text(hist_path, rows + "\n")
        extra.append(hist_path)
    return pairs, extra


def _eval_cluster_ratio(args, table):
    labels = load_labels(args.labels)
    detail = cluster_ratio_detail(table, labels)
    return [("task", "cluster-ratio"), ("cluster_ratio", detail.ratio),
            ("max_within", detail.max_within),
            ("min_between", detail.min_between),
            ("n_classes", detail.n_classes)], []


def _eval_recall(args, table):
    labels = load_labels(args.labels)
    attrs = {eid: ls[0] for eid, ls in labels.mapping.items()}
    users = [eid for eid in table.ids if eid in attrs]
    if not users:
        raise EvalError("no labeled entities overlap the table")
    rng = named_rng(args.seed, "eval.recall")
    n_users = min(args.n_users, len(users))
    chosen = [users[i] for i in rng.choice(len(users), size=n_users, replace=False)]
    triggers = {uid: [uid] for uid in chosen}
    truth = {uid: {attrs[uid]} for uid in chosen}
    result = hit_recall(table, table, triggers, truth, attrs, args.k)
    return [("task", "recall"), ("k", args.k), ("n_users", n_users),
            ("recall", result.recall), ("hits", result.hits),
            ("retrieved", result.retrieved),
            ("skipped_triggers", result.skipped_triggers)], []


def cmd_eval(args, argv) -> int:
    t0 = time.perf_counter()
    table = load_table(args.table)
    if args.table2:
        table = concat_tables(table, load_table(args.table2))
    out_dir = Path(args.out) if args.out else None
    if args.task == "classify":
        pairs, extra = _eval_classify(args, table)
    elif args.task == "histogram":
        pairs, extra = _eval_histogram(args, table, out_dir)
    elif args.task == "cluster-ratio":
        pairs, extra = _eval_cluster_ratio(args, table)
    else:
        pairs, extra = _eval_recall(args, table)
    written = _emit_report(pairs, out_dir)
    if out_dir is not None:
        inputs = {"table": args.table}
        if args.table2:
            inputs["table2"] = args.table2
        if getattr(args, "labels", None):
            inputs["labels"] = args.labels
        write_manifest(out_dir, "eval", argv, args.seed, config=dict(pairs),
                       inputs=inputs, outputs=written + extra,
                       wall_s=time.perf_counter() - t0)
    return EXIT_OK


def cmd_sweep(args, argv) -> int:
    t0 = time.perf_counter()
    if len(args.values) < 2:
        raise UsageError("sweep needs at least 2 values")
    field, cast = SWEEP_PARAMS[args.param]
    values = []
    for v in args.values:
        if cast is int and not float(v).is_integer():
            raise UsageError(f"{args.param} takes integers, got {v}")
        values.append(cast(v))
    base_cfg, policy = resolve_train_options(args)
    kg, bg = _load_aligned(args.kg, args.bg, policy)
    truth_table = None
    if args.metric == "oracle-error":
        if not args.truth:
            raise UsageError("--metric oracle-error needs --truth")
        truth_table, _ = load_truth(args.truth)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    model_paths = []
    for value in values:
        cfg = TrainConfig.from_dict(base_cfg.to_dict())
        setattr(cfg, field, value)
        cfg.validate()
        proj_net, infer_net, report = train(kg, bg, cfg)
        if args.metric == "elbo":
            window = min(50, report.n_steps)
            metric = float(np.mean(report.elbo_trace()[-window:]))
        elif args.metric == "oracle-error":
            _, bg_refined = refine(kg, bg, proj_net, infer_net)
            diff = bg_refined.matrix - truth_table.matrix
            metric = float(np.mean(diff ** 2))
        else:
            raise UsageError(f"unknown metric {args.metric!r}")
        model_path = out_dir / f"model_{args.param}_{value}.bem"
        save_model(proj_net, infer_net, cfg, model_path)
        model_paths.append(model_path)
        rows.append((args.param, value, args.metric, metric, report.param_checksum))
        print(f"{args.param} = {value}: {args.metric} = {metric:.6f}")
    table_path = out_dir / "sweep.tsv"
    lines = ["param\tvalue\tmetric\tmetric_value\tchecksum"]
    lines += [f"{p}\t{v}\t{m}\t{mv:.17g}\t{ck}" for p, v, m, mv, ck in rows]
    _atomic_write_text(table_path, "\n".join(lines) + "\n")
    inputs = {"kg": args.kg, "bg": args.bg}
    if args.truth:
        inputs["truth"] = args.truth
    write_manifest(out_dir, "sweep", argv, base_cfg.seed,
                   config=base_cfg.to_dict(), inputs=inputs,
                   outputs=[table_path] + model_paths,
                   wall_s=time.perf_counter() - t0)
    return EXIT_OK


def cmd_replay(args, argv) -> int:
    entries = read_manifest(args.manifest)
    if "argv" not in entries:
        raise DataError(f"{args.manifest}: manifest lacks an argv record")
    recorded = json.loads(entries["argv"])
    if recorded and recorded[0] == "synth" and "--force" not in recorded:
        recorded.append("--force")
    print(f"replaying: {shlex.join(recorded)}")
    code = main(recorded)
    if code != EXIT_OK:
        return code
    mismatches = []
    for key, value in entries.items():
        if not key.startswith("sha256."):
            continue
        name = key[len("sha256."):]
        out_path = Path(entries[f"output.{name}"])
        actual = _sha256_file(out_path)
        if actual != value:
            mismatches.append(name)
    if mismatches:
        print(f"replay mismatch for: {', '.join(mismatches)}", file=sys.stderr)
        return EXIT_DATA
    print("replay verified: outputs are bit-identical")
    return EXIT_OK


def _add_train_flags(sub, with_out: bool = True):
    sub.add_argument("--kg", required=True, help="KG embedding table (prior side)")
    sub.add_argument("--bg", required=True, help="BG embedding table (observed side)")
    sub.add_argument("--mode", choices=("p", "i"), default=None,
                     help="p: pairwise edges (default); i: per-node independence")
    sub.add_argument("--edge", choices=tuple(EDGE_NAMES), default=None)
    sub.add_argument("--nB", dest="nB", type=int, default=None, help="batch size")
    sub.add_argument("--epochs", type=float, default=None)
    sub.add_argument("--lambda1", type=float, default=None)
    sub.add_argument("--lambda2", type=float, default=None)
    sub.add_argument("--lr", type=float, default=None, help="learning rate")
    sub.add_argument("--nh", dest="nh", type=int, default=None, help="hidden width")
    sub.add_argument("--bootstrap", type=int, default=None,
                     help="bootstrap replicates for the prior estimate")
    sub.add_argument("--n-iter", dest="n_iter", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--normalize", dest="normalize", action="store_true", default=None)
    sub.add_argument("--no-normalize", dest="normalize", action="store_false")
    sub.add_argument("--align", choices=("strict", "intersect"), default=None)
    sub.add_argument("--config", default=None, help="key = value config file")
    if with_out:
        sub.add_argument("--out", required=True, help="model output path")
        sub.add_argument("--log", default=None, help="step log path (default: <out>.steplog.tsv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bem",
        description="Refine paired KG/BG embedding tables with a variational model.")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="generate a synthetic dataset with known truth")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=2000, help="entity count")
    p.add_argument("--kg-dim", type=int, default=16)
    p.add_argument("--bg-dim", type=int, default=32)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--delta-scale", type=float, default=0.1)
    p.add_argument("--noise-scale", type=float, default=0.3)
    p.add_argument("--true-hidden", type=int, default=24)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--signal-std", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("train", help="fit the model on a table pair")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("refine", help="emit refined tables from a trained model")
    p.add_argument("--kg", required=True)
    p.add_argument("--bg", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_refine)

    p = subs.add_parser("eval", help="evaluate one embedding table")
    p.add_argument("--table", required=True)
    p.add_argument("--table2", default=None,
                   help="second table; evaluates the concatenation")
    p.add_argument("--labels", default=None)
    p.add_argument("--task", required=True,
                   choices=("classify", "histogram", "cluster-ratio", "recall"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="directory for report files")
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--splits", type=int, default=1)
    p.add_argument("--reg", type=float, default=1e-4)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--project-dim", type=int, default=None)
    p.add_argument("--n-proj", type=int, default=10)
    p.add_argument("--n-pairs", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n-users", type=int, default=200)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sweep", help="train once per value of one parameter")
    p.add_argument("--param", required=True, choices=tuple(SWEEP_PARAMS))
    p.add_argument("--values", required=True, nargs="+", type=float)
    p.add_argument("--metric", choices=("elbo", "oracle-error"), default="elbo")
    p.add_argument("--truth", default=None, help="truth sidecar for oracle-error")
    _add_train_flags(p, with_out=False)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("replay", help="re-run a manifest and verify outputs")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args, list(argv))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (BemError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
