"""Attack evaluation: success rates, baselines, transfer, sweeps, reports.

Success is always judged in decision space: the attack succeeded on an
image when the top-1 prediction of the perturbed image differs from the
clean prediction (or, for targeted runs, equals the target class).
"""

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .attack import clamp_pixels, run_attack
from .data import VALUE_RANGE
from .errors import ConfigError, MetricError, ParameterError
from .optim import Perturbation
from .rng import ROLE_BASELINE, keyed_rng
from .victim import QueryOracle

REPORT_COLUMNS = ("run_id", "mode", "objective", "loss", "optimizer", "eps",
                  "norm_order", "batch_size", "epochs", "udt", "queries",
                  "asr", "target_acc", "l2", "linf", "seconds", "seed")
TRACE_COLUMNS = ("update", "loss_minus", "loss_plus", "alpha", "delta", "probe_asr")


@dataclass
class AttackReport:
    run_id: str
    mode: str
    objective: str
    loss: str
    optimizer: str
    eps: float
    norm_order: str
    batch_size: int
    epochs: int
    udt: int
    queries: int
    asr: float
    target_acc: float
    l2: float
    linf: float
    seconds: float
    seed: int


def _adversarial(test, pert):
    lo, hi = VALUE_RANGE
    return clamp_pixels(test.pixels, pert.values, lo, hi)


def asr(oracle, test, pert: Perturbation) -> float:
    """Percent of test images whose top-1 prediction the perturbation flips."""
    if len(test) == 0:
        raise MetricError("attack success rate is undefined on an empty test set")
    clean = oracle.query(test.pixels).argmax(axis=1)
    adv = oracle.query(_adversarial(test, pert)).argmax(axis=1)
    return 100.0 * float(np.mean(adv != clean))


def target_accuracy(oracle, test, pert: Perturbation, target) -> float:
    """Percent of perturbed test images predicted as the target class."""
    if len(test) == 0:
        raise MetricError("target accuracy is undefined on an empty test set")
    adv = oracle.query(_adversarial(test, pert)).argmax(axis=1)
    return 100.0 * float(np.mean(adv == target))


def norms(values) -> tuple:
    """(l2, linf) of a perturbation's values."""
    values = np.asarray(values)
    linf = float(np.max(np.abs(values))) if values.size else 0.0
    return float(np.linalg.norm(values)), linf


def random_baseline(oracle, test, norm_order, magnitude, n_trials, seed) -> float:
    """Mean ASR of random-sign perturbations with the exact given norm.

    Each trial draws a Rademacher vector and scales it so its norm under
    `norm_order` equals `magnitude` (for l2: magnitude / sqrt(dim) per
    coordinate; for linf: magnitude itself).
    """
    if n_trials < 1:
        raise ParameterError("n_trials must be >= 1, got %d" % n_trials)
    if magnitude < 0:
        raise ParameterError("magnitude must be >= 0, got %g" % magnitude)
    dim = test.input_dim
    scale = magnitude if norm_order == "linf" else magnitude / np.sqrt(dim)
    rates = []
    for trial in range(n_trials):
        signs = 2.0 * keyed_rng(ROLE_BASELINE, seed, trial).integers(0, 2, size=dim) - 1.0
        pert = Perturbation(signs * scale, norm_order, eps=max(magnitude, 1.0))
        rates.append(asr(oracle, test, pert))
    return float(np.mean(rates))


def transfer_matrix(models, perturbations, test) -> np.ndarray:
    """ASR of every perturbation (rows) against every model (columns)."""
    if not models or not perturbations:
        raise MetricError("transfer matrix needs at least one model and one perturbation")
    for model in models:
        if model.input_dim != test.input_dim:
            raise ConfigError("victim expects %d pixels, test set has %d"
                              % (model.input_dim, test.input_dim))
    out = np.zeros((len(perturbations), len(models)))
    for j, model in enumerate(models):
        oracle = QueryOracle(model, "decision")
        for i, pert in enumerate(perturbations):
            out[i, j] = asr(oracle, test, pert)
    return out


def build_report(run_id, config, pert, trace, model, data) -> AttackReport:
    """Evaluate a finished run on the test split and assemble its report row."""
    eval_oracle = QueryOracle(model, "decision")
    l2, linf = norms(pert.values)
    targeted = config.target_class is not None
    return AttackReport(
        run_id=run_id,
        mode=config.mode,
        objective="targeted" if targeted else "untargeted",
        loss=config.loss,
        optimizer=config.optimizer,
        eps=config.eps,
        norm_order=config.norm_order,
        batch_size=config.batch_size,
        epochs=config.epochs,
        udt=trace.n_updates,
        queries=trace.queries,
        asr=asr(eval_oracle, data.test, pert),
        target_acc=(target_accuracy(eval_oracle, data.test, pert, config.target_class)
                    if targeted else None),
        l2=l2,
        linf=linf,
        seconds=trace.seconds,
        seed=config.shuffle_seed,
    )


def run_single(config, model, data, run_id="run"):
    """Attack one victim end to end; returns (perturbation, trace, report)."""
    oracle = QueryOracle(model, config.mode)
    pert, trace = run_attack(config, oracle, data)
    return pert, trace, build_report(run_id, config, pert, trace, model, data)


def _sweep_worker(payload):
    config, model, data, run_id = payload
    pert, _, report = run_single(config, model, data, run_id)
    return pert, report


def budget_sweep(base_config, budgets, seeds, model, data, jobs=1):
    """Run the attack for every (budget, seed) pair.

    Returns (results, summary): results is a list of (perturbation,
    report) in (budget, seed) order; summary rows are (eps, mean_asr,
    std_asr, n_runs) in budget order.
    """
    if not budgets or not seeds:
        raise ParameterError("budget_sweep needs at least one budget and one seed")
    payloads = []
    for eps in budgets:
        for seed in seeds:
            cfg = replace(base_config, eps=float(eps),
                          shuffle_seed=int(seed), direction_seed=int(seed))
            payloads.append((cfg, model, data, "eps%g-seed%d" % (eps, seed)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    else:
        results = [_sweep_worker(p) for p in payloads]
    reports = [rep for _, rep in results]
    summary = []
    for eps in budgets:
        rates = [r.asr for r in reports if r.eps == float(eps)]
        summary.append((float(eps), float(np.mean(rates)), float(np.std(rates)), len(rates)))
    return results, summary


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float) and np.isnan(value):
        return ""
    return value


def write_report_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            writer.writerow([_cell(getattr(rep, col)) for col in REPORT_COLUMNS])


def write_report_json(path, reports) -> None:
    rows = []
    for rep in reports:
        row = {}
        for col in REPORT_COLUMNS:
            value = getattr(rep, col)
            if isinstance(value, float) and np.isnan(value):
                value = None
            row[col] = value
        rows.append(row)
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_trace_csv(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for row in trace.records:
            out = [int(row[0])] + [repr(float(v)) for v in row[1:5]]
            out.append("" if np.isnan(row[5]) else repr(float(row[5])))
            writer.writerow(out)


def write_matrix_csv(path, matrix, row_names, col_names) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + list(col_names))
        for name, row in zip(row_names, matrix):
            writer.writerow([name] + [repr(float(v)) for v in row])
