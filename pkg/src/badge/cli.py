"""Command-line interface.

Subcommands: train-victim, attack, eval, transfer, sweep.  Attack
settings resolve with the precedence flags > config file > defaults;
the resolved configuration is echoed into the output directory so a
run is reproducible from its artifacts alone.

Exit codes: 0 success, 1 usage or configuration problem, 2 runtime
failure (diverged training, aborted attack).
"""

import argparse
import configparser
import os
import sys
from dataclasses import fields

from .attack import (AttackAborted, AttackConfig, run_attack,
                     load_perturbation, save_perturbation)
from .data import load_mnist, make_blobs
from .errors import ConfigError
from .evaluate import (budget_sweep, build_report, norms, random_baseline,
                       target_accuracy, transfer_matrix, write_matrix_csv,
                       write_report_csv, write_report_json, write_trace_csv, asr)
from .victim import (ARCHS, QueryOracle, accuracy, load_model, save_model,
                     train_victim)

_MNIST_FILES = (
    ("train_images", "train-images-idx3-ubyte"),
    ("train_labels", "train-labels-idx1-ubyte"),
    ("test_images", "t10k-images-idx3-ubyte"),
    ("test_labels", "t10k-labels-idx1-ubyte"),
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags; usage errors are 1 here.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write("error: %s\n" % message)
        raise SystemExit(1)


def _out_path(path):
    base = os.environ.get("BADGE_OUT")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _add_data_flags(sub):
    sub.add_argument("--data", choices=("blobs", "mnist"), default="blobs")
    sub.add_argument("--mnist-dir", help="directory with the four standard IDX files")
    for dest, name in _MNIST_FILES:
        sub.add_argument("--mnist-" + dest.replace("_", "-"),
                         help="path to %s (overrides --mnist-dir)" % name)
    sub.add_argument("--blob-seed", type=int, default=0)
    sub.add_argument("--blob-n", type=int, default=200, help="samples per class")
    sub.add_argument("--blob-classes", type=int, default=4)
    sub.add_argument("--blob-dim", type=int, default=16)
    sub.add_argument("--blob-sep", type=float, default=4.0)


def _find_mnist_file(directory, name):
    for candidate in (name, name + ".gz"):
        path = os.path.join(directory, candidate)
        if os.path.exists(path):
            return path
    raise ConfigError("missing %s(.gz) under %s" % (name, directory))


def _load_dataset(args):
    if args.data == "blobs":
        return make_blobs(args.blob_seed, args.blob_n, args.blob_classes,
                          args.blob_dim, args.blob_sep)
    paths = {}
    for dest, name in _MNIST_FILES:
        explicit = getattr(args, "mnist_" + dest)
        if explicit:
            if not os.path.exists(explicit):
                raise ConfigError("no such file: %s" % explicit)
            paths[dest] = explicit
        elif args.mnist_dir:
            paths[dest] = _find_mnist_file(args.mnist_dir, name)
        else:
            raise ConfigError("--data mnist needs --mnist-dir or the four file flags")
    return load_mnist(paths["train_images"], paths["train_labels"],
                      paths["test_images"], paths["test_labels"])


def _opt_int(text):
    text = text.strip()
    return None if text.lower() in ("", "none") else int(text)


_ATTACK_CASTS = {
    "mode": str, "loss": str, "optimizer": str, "eps": float,
    "norm_order": str, "projection": str, "batch_size": int, "epochs": int,
    "target_class": _opt_int, "train_limit": _opt_int,
    "shuffle_seed": int, "direction_seed": int,
    "alpha_kind": str, "alpha_start": float, "alpha_end": float,
    "delta_kind": str, "delta_start": float, "delta_ratio": float,
    "delta_period": _opt_int, "gamma": float, "beta1": float, "beta2": float,
    "eta": float, "momentum": float, "clamp_mode": str,
    "checkpoint_interval": int, "probe_size": int,
}

# argparse dest -> AttackConfig field, for flags named differently
_FLAG_FIELDS = (
    ("mode", "mode"), ("loss", "loss"), ("opt", "optimizer"), ("eps", "eps"),
    ("norm", "norm_order"), ("projection", "projection"),
    ("batch_size", "batch_size"), ("epochs", "epochs"),
    ("target", "target_class"), ("train_limit", "train_limit"),
    ("alpha_kind", "alpha_kind"), ("alpha_start", "alpha_start"),
    ("alpha_end", "alpha_end"), ("delta_kind", "delta_kind"),
    ("delta_start", "delta_start"), ("delta_ratio", "delta_ratio"),
    ("delta_period", "delta_period"), ("gamma", "gamma"),
    ("clamp_mode", "clamp_mode"),
    ("checkpoint_interval", "checkpoint_interval"), ("probe_size", "probe_size"),
)


def _add_attack_flags(sub):
    sub.add_argument("--config", help="INI file; flags override its [attack] section")
    sub.add_argument("--mode", choices=("decision", "score"))
    sub.add_argument("--loss")
    sub.add_argument("--opt")
    sub.add_argument("--eps", type=float)
    sub.add_argument("--norm", choices=("linf", "l2"))
    sub.add_argument("--projection", choices=("radial", "clamp"))
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--target", type=int)
    sub.add_argument("--train-limit", type=int)
    sub.add_argument("--seed", type=int, help="sets both shuffle and direction seeds")
    sub.add_argument("--alpha-kind")
    sub.add_argument("--alpha-start", type=float)
    sub.add_argument("--alpha-end", type=float)
    sub.add_argument("--delta-kind")
    sub.add_argument("--delta-start", type=float)
    sub.add_argument("--delta-ratio", type=float)
    sub.add_argument("--delta-period", type=int)
    sub.add_argument("--gamma", type=float)
    sub.add_argument("--clamp-mode", choices=("global", "batch"))
    sub.add_argument("--checkpoint-interval", type=int)
    sub.add_argument("--probe-size", type=int)


def _resolve_attack_config(args) -> AttackConfig:
    cfg = AttackConfig()
    loss_given = args.loss is not None
    if args.config:
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            raise ConfigError("cannot read config file %s" % args.config)
        if parser.has_section("attack"):
            for key, raw in parser.items("attack"):
                if key not in _ATTACK_CASTS:
                    raise ConfigError("unknown key %r in [attack]" % key)
                try:
                    setattr(cfg, key, _ATTACK_CASTS[key](raw))
                except ValueError:
                    raise ConfigError("bad value %r for %s" % (raw, key)) from None
            loss_given = loss_given or parser.has_option("attack", "loss")
    for dest, field in _FLAG_FIELDS:
        value = getattr(args, dest)
        if value is not None:
            setattr(cfg, field, value)
    if getattr(args, "seed", None) is not None:
        cfg.shuffle_seed = args.seed
        cfg.direction_seed = args.seed
    if cfg.target_class is not None and not loss_given:
        cfg.loss = "target_acc"
    return cfg


def _echo_config(path, cfg: AttackConfig) -> None:
    parser = configparser.ConfigParser()
    parser["attack"] = {f.name: str(getattr(cfg, f.name)) for f in fields(cfg)}
    parser["meta"] = {"config_hash": cfg.config_hash()}
    with open(path, "w") as fh:
        parser.write(fh)


def _cmd_train_victim(args):
    data = _load_dataset(args)
    model = train_victim(args.arch, data, epochs=args.epochs, lr=args.lr,
                         seed=args.seed, batch_size=args.batch_size,
                         hidden=args.hidden)
    out = _out_path(args.out)
    os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
    save_model(out, model)
    print("saved %s arch=%s test_acc=%.4f" % (out, args.arch, accuracy(model, data.test)))
    return 0


def _cmd_attack(args):
    cfg = _resolve_attack_config(args)
    data = _load_dataset(args)
    model = load_model(args.victim)
    outdir = _out_path(args.out)
    os.makedirs(outdir, exist_ok=True)
    _echo_config(os.path.join(outdir, "config.ini"), cfg)

    ckpt = None
    if cfg.checkpoint_interval:
        ckpt = os.path.join(outdir, "checkpoint.bin")
    oracle = QueryOracle(model, cfg.mode)
    try:
        pert, trace = run_attack(cfg, oracle, data,
                                 checkpoint_path=ckpt, resume_from=args.resume)
    except AttackAborted as exc:
        write_trace_csv(os.path.join(outdir, "trace.csv"), exc.trace)
        print("error: %s (partial trace written)" % exc, file=sys.stderr)
        return 2
    save_perturbation(os.path.join(outdir, "perturbation.bin"), pert)
    write_trace_csv(os.path.join(outdir, "trace.csv"), trace)
    report = build_report(os.path.basename(os.path.normpath(outdir)) or "run",
                          cfg, pert, trace, model, data)
    write_report_csv(os.path.join(outdir, "report.csv"), [report])
    write_report_json(os.path.join(outdir, "report.json"), [report])
    tacc = "" if report.target_acc is None else " target_acc=%.2f" % report.target_acc
    print("asr=%.2f%s l2=%.3f linf=%.3f queries=%d updates=%d"
          % (report.asr, tacc, report.l2, report.linf, report.queries, report.udt))
    return 0


def _cmd_eval(args):
    data = _load_dataset(args)
    model = load_model(args.victim)
    pert = load_perturbation(args.pert)
    oracle = QueryOracle(model, "decision")
    rate = asr(oracle, data.test, pert)
    l2, linf = norms(pert.values)
    line = "asr=%.2f l2=%.3f linf=%.3f" % (rate, l2, linf)
    if args.target is not None:
        line += " target_acc=%.2f" % target_accuracy(oracle, data.test, pert, args.target)
    if args.baseline_trials:
        base = random_baseline(oracle, data.test, "l2", l2,
                               args.baseline_trials, args.seed)
        line += " baseline_asr=%.2f" % base
    print(line)
    return 0


def _cmd_transfer(args):
    data = _load_dataset(args)
    models = [load_model(p) for p in args.victims]
    perts = [load_perturbation(p) for p in args.perts]
    matrix = transfer_matrix(models, perts, data.test)
    col_names = [os.path.basename(p) for p in args.victims]
    row_names = [os.path.basename(p) for p in args.perts]
    if args.out:
        out = _out_path(args.out)
        os.makedirs(os.path.dirname(out) or ".", exist_ok=True)
        write_matrix_csv(out, matrix, row_names, col_names)
    print("\t" + "\t".join(col_names))
    for name, row in zip(row_names, matrix):
        print(name + "\t" + "\t".join("%.2f" % v for v in row))
    return 0


def _cmd_sweep(args):
    cfg = _resolve_attack_config(args)
    data = _load_dataset(args)
    model = load_model(args.victim)
    budgets = [float(tok) for tok in args.budgets.split(",") if tok]
    seeds = [int(tok) for tok in args.seeds.split(",") if tok]
    outdir = _out_path(args.out)
    os.makedirs(outdir, exist_ok=True)
    _echo_config(os.path.join(outdir, "config.ini"), cfg)
    results, summary = budget_sweep(cfg, budgets, seeds, model, data, jobs=args.jobs)
    reports = []
    for pert, report in results:
        save_perturbation(os.path.join(outdir, report.run_id + ".bin"), pert)
        reports.append(report)
    write_report_csv(os.path.join(outdir, "report.csv"), reports)
    write_report_json(os.path.join(outdir, "report.json"), reports)
    with open(os.path.join(outdir, "summary.csv"), "w") as fh:
        fh.write("eps,mean_asr,std_asr,n\n")
        for eps, mean, std, n in summary:
            fh.write("%g,%r,%r,%d\n" % (eps, mean, std, n))
    for eps, mean, std, n in summary:
        print("eps=%g mean_asr=%.2f std_asr=%.2f n=%d" % (eps, mean, std, n))
    return 0


def build_parser():
    parser = _Parser(prog="badge")
    subs = parser.add_subparsers(dest="command")

    tv = subs.add_parser("train-victim", help="train and save a victim model")
    tv.add_argument("--arch", choices=ARCHS, required=True)
    _add_data_flags(tv)
    tv.add_argument("--epochs", type=int, default=3)
    tv.add_argument("--lr", type=float, default=0.1)
    tv.add_argument("--seed", type=int, default=0)
    tv.add_argument("--batch-size", type=int, default=64)
    tv.add_argument("--hidden", type=int, default=64)
    tv.add_argument("--out", required=True)
    tv.set_defaults(handler=_cmd_train_victim)

    at = subs.add_parser("attack", help="optimize a universal perturbation")
    at.add_argument("--victim", required=True)
    _add_data_flags(at)
    _add_attack_flags(at)
    at.add_argument("--resume", help="checkpoint file to continue from")
    at.add_argument("--out", required=True, help="output directory")
    at.set_defaults(handler=_cmd_attack)

    ev = subs.add_parser("eval", help="evaluate a saved perturbation")
    ev.add_argument("--victim", required=True)
    ev.add_argument("--pert", required=True)
    _add_data_flags(ev)
    ev.add_argument("--target", type=int)
    ev.add_argument("--baseline-trials", type=int, default=0)
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(handler=_cmd_eval)

    tr = subs.add_parser("transfer", help="cross-victim ASR matrix")
    tr.add_argument("--victims", nargs="+", required=True)
    tr.add_argument("--perts", nargs="+", required=True)
    _add_data_flags(tr)
    tr.add_argument("--out")
    tr.set_defaults(handler=_cmd_transfer)

    sw = subs.add_parser("sweep", help="attack across budgets and seeds")
    sw.add_argument("--victim", required=True)
    _add_data_flags(sw)
    _add_attack_flags(sw)
    sw.add_argument("--budgets", required=True, help="comma-separated eps values")
    sw.add_argument("--seeds", required=True, help="comma-separated seeds")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--out", required=True, help="output directory")
    sw.set_defaults(handler=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler", None):
        parser.print_help()
        return 1
    try:
        return args.handler(args)
    except ValueError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
