"""The universal-perturbation attack loop.

One update consumes one mini-batch and exactly two oracle query calls
(the minus and plus probe), computes the batch agreement loss for both
probes, and feeds the pair to the optimizer.  Directions are keyed by
update index, so a run checkpointed and resumed mid-way reproduces an
uninterrupted run bit for bit.
"""

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import binio
from .data import batches, one_hot
from .errors import ConfigError, FormatError
from .losses import LOSSES
from .optim import (NORM_ORDERS, VARIANTS, OptimizerState, Perturbation,
                    Schedule, direction_rng, probe_points, sample_direction,
                    sample_gaussian_direction, step)

CHECKPOINT_MAGIC = b"BCK1"
PERTURBATION_MAGIC = b"BPT1"
TRACE_COLUMNS = ("update", "loss_minus", "loss_plus", "alpha", "delta", "probe_asr")


class AttackAborted(RuntimeError):
    """Raised when a run hits a non-finite loss; carries the partial trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class AttackConfig:
    mode: str = "decision"            # decision | score
    loss: str = "acc"
    optimizer: str = "spsa_am"
    eps: float = 10.0
    norm_order: str = "linf"          # linf | l2
    projection: str = "radial"        # radial | clamp (linf only)
    batch_size: int = 256
    epochs: int = 1
    target_class: int = None
    shuffle_seed: int = 0
    direction_seed: int = 0
    train_limit: int = None
    alpha_kind: str = "cosine"        # cosine | constant
    alpha_start: float = 1e-4
    alpha_end: float = 1e-3
    delta_kind: str = "step"          # step | constant
    delta_start: float = 0.01
    delta_ratio: float = 0.9
    delta_period: int = None          # None: one decay per epoch
    gamma: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    eta: float = 1e-8
    momentum: float = 0.9
    clamp_mode: str = "global"        # global | batch
    checkpoint_interval: int = 0      # also the probe-ASR cadence; 0 = off
    probe_size: int = 512

    def validate(self, n_classes=None):
        if self.mode not in ("decision", "score"):
            raise ConfigError("mode must be 'decision' or 'score', got %r" % (self.mode,))
        if self.loss not in LOSSES:
            raise ConfigError("unknown loss %r" % (self.loss,))
        if self.optimizer not in VARIANTS:
            raise ConfigError("unknown optimizer %r" % (self.optimizer,))
        if self.norm_order not in NORM_ORDERS:
            raise ConfigError("norm_order must be one of %r" % (NORM_ORDERS,))
        if self.projection not in ("radial", "clamp"):
            raise ConfigError("projection must be 'radial' or 'clamp'")
        if self.projection == "clamp" and self.norm_order != "linf":
            raise ConfigError("clamp projection requires the linf budget")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0, got %g" % self.eps)
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("batch_size and epochs must be >= 1")
        if self.train_limit is not None and self.train_limit < 1:
            raise ConfigError("train_limit must be >= 1 when set")
        # Only the target-agreement loss rewards convergence on a class,
        # so targeted mode and that loss imply each other.
        if (self.target_class is None) == (self.loss == "target_acc"):
            raise ConfigError("target_class and loss 'target_acc' go together")
        if self.target_class is not None and n_classes is not None:
            if not 0 <= self.target_class < n_classes:
                raise ConfigError(
                    "target_class %d outside [0, %d)" % (self.target_class, n_classes)
                )
        if self.alpha_kind not in ("cosine", "constant"):
            raise ConfigError("alpha_kind must be 'cosine' or 'constant'")
        if self.delta_kind not in ("step", "constant"):
            raise ConfigError("delta_kind must be 'step' or 'constant'")
        for name in ("alpha_start", "delta_start", "gamma", "eta"):
            if getattr(self, name) <= 0:
                raise ConfigError("%s must be positive" % name)
        # beta = 1 would zero the bias-correction divisor
        for name in ("beta1", "beta2", "momentum"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError("%s must lie in [0, 1)" % name)
        if self.delta_period is not None and self.delta_period < 1:
            raise ConfigError("delta_period must be >= 1 when set")
        if self.checkpoint_interval < 0 or self.probe_size < 1:
            raise ConfigError("bad checkpoint_interval or probe_size")

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        ).hexdigest()


@dataclass
class RunTrace:
    """Per-update log plus run totals.

    records columns: update index, loss at the minus probe, loss at the
    plus probe, alpha, delta, probe ASR in percent (NaN off-cadence).
    `queries` counts oracle queries made by this process, so a resumed
    run reports only its own share.
    """

    records: np.ndarray = field(default_factory=lambda: np.zeros((0, 6)))
    seconds: float = 0.0
    queries: int = 0

    @property
    def n_updates(self):
        return self.records.shape[0]


def clamp_pixels(pixels, pert_values, lo, hi) -> np.ndarray:
    """Apply a perturbation row to every image and clip into [lo, hi]."""
    return np.clip(pixels + pert_values, lo, hi)


def save_perturbation(path, pert: Perturbation) -> None:
    header = {"norm_order": pert.norm_order, "eps": pert.eps}
    binio.write_blob(path, PERTURBATION_MAGIC, header, {"values": pert.values})


def load_perturbation(path) -> Perturbation:
    header, arrays = binio.read_blob(path, PERTURBATION_MAGIC)
    if header.get("norm_order") not in NORM_ORDERS:
        raise FormatError("bad norm_order %r in perturbation file" % (header.get("norm_order"),))
    return Perturbation(arrays["values"], header["norm_order"], float(header["eps"]))


def save_checkpoint(path, config: AttackConfig, pert: Perturbation,
                    state: OptimizerState, records) -> None:
    header = {"config_hash": config.config_hash(), "update_index": int(state.t)}
    arrays = {
        "values": pert.values,
        "m": np.atleast_1d(state.m),
        "v": np.atleast_1d(state.v),
        "velocity": state.velocity,
        "records": np.asarray(records, dtype=np.float64).reshape(-1, 6),
    }
    binio.write_blob(path, CHECKPOINT_MAGIC, header, arrays)


def load_checkpoint(path):
    return binio.read_blob(path, CHECKPOINT_MAGIC)


def run_attack(config: AttackConfig, oracle, data,
               checkpoint_path=None, resume_from=None):
    """Run the attack; returns (Perturbation, RunTrace).

    `oracle` is the only channel to the victim.  `data.train` drives the
    optimization; `data.test` supplies the fixed probe subset for the
    running-ASR column when checkpointing is on.
    """
    config.validate(oracle.n_classes)
    if oracle.mode != config.mode:
        raise ConfigError(
            "oracle mode %r does not match config mode %r" % (oracle.mode, config.mode)
        )

    if data.n_classes != oracle.n_classes:
        raise ConfigError(
            "data has %d classes, oracle %d" % (data.n_classes, oracle.n_classes)
        )

    train = data.train
    if config.train_limit is not None:
        train = train.take(slice(0, min(config.train_limit, len(train))))
    dim = train.input_dim
    if dim != oracle.input_dim:
        raise ConfigError("data dim %d != oracle dim %d" % (dim, oracle.input_dim))

    n_batches = -(-len(train) // config.batch_size)
    total_updates = config.epochs * n_batches
    alpha_sched = Schedule(config.alpha_kind, config.alpha_start,
                           end=config.alpha_end, horizon=max(total_updates - 1, 0))
    delta_sched = Schedule(config.delta_kind, config.delta_start,
                           ratio=config.delta_ratio,
                           period=config.delta_period or n_batches,
                           horizon=max(total_updates - 1, 0))

    state = OptimizerState(
        variant=config.optimizer, dim=dim, beta1=config.beta1, beta2=config.beta2,
        eta=config.eta, gamma=config.gamma, momentum=config.momentum,
    )
    pert = Perturbation.zeros(dim, config.norm_order, config.eps)
    records = []

    if resume_from is not None:
        header, arrays = load_checkpoint(resume_from)
        if header.get("config_hash") != config.config_hash():
            raise ConfigError("checkpoint was written by a different configuration")
        pert = Perturbation(arrays["values"], config.norm_order, config.eps)
        state.m = arrays["m"]
        state.v = arrays["v"]
        state.velocity = arrays["velocity"]
        state.t = int(header["update_index"])
        records = [tuple(row) for row in arrays["records"]]

    start_update = state.t
    if start_update > total_updates:
        raise ConfigError(
            "checkpoint is at update %d but the run has only %d" % (start_update, total_updates)
        )

    loss_fn = LOSSES[config.loss]
    glo, ghi = data.value_range
    rademacher = not config.optimizer.startswith("rgf")

    probe_batch = None
    probe_clean = None
    probe_oracle = None
    if config.checkpoint_interval:
        probe_batch = data.test.take(slice(0, min(config.probe_size, len(data.test))))
        probe_oracle = oracle.probe_view("decision")
        probe_clean = probe_oracle.query(probe_batch.pixels).argmax(axis=1)

    start_queries = oracle.query_count
    t0 = time.perf_counter()

    def finish():
        return RunTrace(
            records=np.asarray(records, dtype=np.float64).reshape(-1, 6),
            seconds=time.perf_counter() - t0,
            queries=oracle.query_count - start_queries,
        )

    for epoch in range(start_update // n_batches, config.epochs):
        epoch_batches = batches(train, config.batch_size, config.shuffle_seed, epoch)
        first = start_update % n_batches if epoch == start_update // n_batches else 0
        for bi in range(first, n_batches):
            mb = epoch_batches[bi]
            k = epoch * n_batches + bi
            alpha = alpha_sched.value(k)
            delta = delta_sched.value(k)

            rng = direction_rng(config.direction_seed, k)
            if rademacher:
                direction = sample_direction(dim, delta, rng)
            else:
                direction = sample_gaussian_direction(dim, rng)

            p_minus, p_plus = probe_points(config.optimizer, pert, direction,
                                           config.gamma, config.projection)
            if config.clamp_mode == "batch":
                lo, hi = mb.pixels.min(), mb.pixels.max()
            else:
                lo, hi = glo, ghi
            y_minus = oracle.query(clamp_pixels(mb.pixels, p_minus, lo, hi))
            y_plus = oracle.query(clamp_pixels(mb.pixels, p_plus, lo, hi))

            if config.target_class is not None:
                truth = one_hot(np.full(len(mb), config.target_class), oracle.n_classes)
            else:
                truth = one_hot(mb.labels, oracle.n_classes)
            loss_minus = loss_fn(y_minus, truth)
            loss_plus = loss_fn(y_plus, truth)
            if not (np.isfinite(loss_minus) and np.isfinite(loss_plus)):
                records.append((k, loss_minus, loss_plus, alpha, delta, np.nan))
                raise AttackAborted("non-finite loss at update %d" % k, finish())

            pert = step(state, pert, direction, loss_minus, loss_plus, alpha,
                        config.projection)

            probe_asr = np.nan
            on_cadence = config.checkpoint_interval and (k + 1) % config.checkpoint_interval == 0
            if on_cadence:
                adv = probe_oracle.query(
                    clamp_pixels(probe_batch.pixels, pert.values, glo, ghi)
                ).argmax(axis=1)
                probe_asr = 100.0 * float(np.mean(adv != probe_clean))
            records.append((k, loss_minus, loss_plus, alpha, delta, probe_asr))
            if on_cadence and checkpoint_path is not None:
                save_checkpoint(checkpoint_path, config, pert, state, records)

    return pert, finish()
