"""Zeroth-order update rules, probe geometry, and budget projection.

All optimizers consume exactly two loss evaluations per update (one
probe pair) and share the same two-sided pseudo-gradient.  Five
variants are provided:

  spsa      raw simultaneous-perturbation step
  spsa_am   scalar Adam correction of the pseudo-gradient (default)
  spsa_gc   Nesterov momentum on the per-coordinate step
  rgf       random Gaussian direction, forward difference geometry
  rgf_adam  element-wise Adam on the Gaussian gradient estimate
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .rng import ROLE_DIRECTION, keyed_rng

VARIANTS = ("spsa", "spsa_am", "spsa_gc", "rgf", "rgf_adam")
NORM_ORDERS = ("l2", "linf")


def pert_norm(values, norm_order) -> float:
    if norm_order == "l2":
        return float(np.linalg.norm(values))
    if norm_order == "linf":
        return float(np.max(np.abs(values))) if values.size else 0.0
    raise ParameterError("unknown norm order %r" % (norm_order,))


# A rescale rounds the recomputed norm to within a few ulp of eps; the
# relative guard keeps re-projection an exact no-op without ever letting
# the norm drift past the documented eps + 1e-9 bound.
_NORM_SLACK = 64 * np.finfo(np.float64).eps


def project(values, norm_order, eps) -> np.ndarray:
    """Radially rescale values onto the budget ball if it lies outside.

    Points already inside the ball are returned untouched (not rescaled
    toward the surface), so repeated projection is a no-op.
    """
    if eps < 0:
        raise ParameterError("eps must be >= 0, got %g" % eps)
    norm = pert_norm(values, norm_order)
    if norm <= eps * (1.0 + _NORM_SLACK):
        return values
    if eps == 0.0:
        return np.zeros_like(values)
    return values * (eps / norm)


def clamp_project(values, eps) -> np.ndarray:
    """Per-element clamp to [-eps, eps]; only meaningful for linf budgets."""
    if eps < 0:
        raise ParameterError("eps must be >= 0, got %g" % eps)
    return np.clip(values, -eps, eps)


def apply_projection(values, norm_order, eps, projection):
    if projection == "radial":
        return project(values, norm_order, eps)
    if projection == "clamp":
        if norm_order != "linf":
            raise ParameterError("clamp projection requires the linf budget")
        return clamp_project(values, eps)
    raise ParameterError("unknown projection %r" % (projection,))


@dataclass
class Perturbation:
    """A universal perturbation plus the budget it must respect."""

    values: np.ndarray
    norm_order: str = "linf"
    eps: float = 10.0

    def __post_init__(self):
        if self.norm_order not in NORM_ORDERS:
            raise ParameterError("norm_order must be one of %r" % (NORM_ORDERS,))
        if self.eps < 0:
            raise ParameterError("eps must be >= 0, got %g" % self.eps)
        self.values = np.asarray(self.values, dtype=np.float64)

    def norm(self) -> float:
        return pert_norm(self.values, self.norm_order)

    @classmethod
    def zeros(cls, dim, norm_order="linf", eps=10.0):
        return cls(np.zeros(dim), norm_order, eps)


def sample_direction(dim, delta, rng) -> np.ndarray:
    """Rademacher probe direction: each coordinate is +delta or -delta."""
    if delta <= 0:
        raise ParameterError("delta must be positive, got %g" % delta)
    return delta * (2.0 * rng.integers(0, 2, size=dim) - 1.0)


def sample_gaussian_direction(dim, rng) -> np.ndarray:
    """Unit-norm Gaussian probe direction for the rgf variants."""
    q = rng.standard_normal(dim)
    return q / np.linalg.norm(q)


def direction_rng(direction_seed, update_index) -> np.random.Generator:
    """Stream for the probe direction of one update, keyed by its index.

    Keying by update index (not by generator state) means a resumed run
    draws the same directions as an uninterrupted one.
    """
    return keyed_rng(ROLE_DIRECTION, direction_seed, update_index)


def pseudo_gradient(loss_minus, loss_plus, gamma) -> float:
    """Two-sided finite-difference signal: positive when the plus probe wins."""
    if gamma <= 0:
        raise ParameterError("gamma must be positive, got %g" % gamma)
    return (loss_minus - loss_plus) / gamma


@dataclass
class OptimizerState:
    variant: str
    dim: int
    beta1: float = 0.5
    beta2: float = 0.999
    eta: float = 1e-8
    gamma: float = 1e-3
    momentum: float = 0.9
    t: int = 0
    m: np.ndarray = field(default=None)
    v: np.ndarray = field(default=None)
    velocity: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ParameterError("unknown optimizer %r" % (self.variant,))
        # Adam moments are scalars for the spsa family (it corrects the
        # scalar signal) and per-coordinate for rgf_adam.
        width = self.dim if self.variant == "rgf_adam" else 1
        if self.m is None:
            self.m = np.zeros(width)
        if self.v is None:
            self.v = np.zeros(width)
        if self.velocity is None:
            self.velocity = np.zeros(self.dim)


def adam_correct(state: OptimizerState, g):
    """Advance Adam moments with signal g and return the corrected step.

    state.t must already count the current update (first call sees t=1),
    otherwise the bias correction divides by zero.
    """
    if state.t < 1:
        raise ParameterError("adam_correct needs state.t >= 1, got %d" % state.t)
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * g
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = state.m / (1.0 - state.beta1**state.t)
    v_hat = state.v / (1.0 - state.beta2**state.t)
    return m_hat / (np.sqrt(v_hat) + state.eta)


def probe_points(variant, pert: Perturbation, direction, gamma, projection="radial"):
    """The two candidate perturbations whose losses feed one update.

    The spsa family probes p-u and p+u; the rgf family probes p itself
    and a gamma-radius move along the unit direction.  Both probes
    respect the budget, so oracle queries never see an out-of-budget
    perturbation.
    """
    if variant not in VARIANTS:
        raise ParameterError("unknown optimizer %r" % (variant,))
    if direction.shape != pert.values.shape:
        raise ParameterError("direction shape %r != perturbation shape %r"
                             % (direction.shape, pert.values.shape))
    kw = (pert.norm_order, pert.eps, projection)
    if variant.startswith("rgf"):
        return pert.values, apply_projection(pert.values + gamma * direction, *kw)
    return (
        apply_projection(pert.values - direction, *kw),
        apply_projection(pert.values + direction, *kw),
    )


def step(state: OptimizerState, pert: Perturbation, direction,
         loss_minus, loss_plus, alpha, projection="radial") -> Perturbation:
    """One optimizer update; returns the projected new perturbation."""
    state.t += 1
    g = pseudo_gradient(loss_minus, loss_plus, state.gamma)

    if state.variant == "spsa":
        d = g / direction
    elif state.variant == "spsa_am":
        d = adam_correct(state, g) / direction
    elif state.variant == "spsa_gc":
        base = g / direction
        state.velocity = state.momentum * state.velocity + base
        d = base + state.momentum * state.velocity
    elif state.variant == "rgf":
        d = g * direction
    else:  # rgf_adam
        d = adam_correct(state, g * direction)

    new_values = apply_projection(pert.values + alpha * d,
                                  pert.norm_order, pert.eps, projection)
    return Perturbation(new_values, pert.norm_order, pert.eps)


@dataclass
class Schedule:
    """Scalar schedule over update indices 0..horizon (inclusive)."""

    kind: str
    start: float
    end: float = None
    ratio: float = None
    period: int = None
    horizon: int = 1

    def __post_init__(self):
        if self.kind not in ("cosine", "step", "constant"):
            raise ParameterError("unknown schedule kind %r" % (self.kind,))
        if self.kind == "cosine" and self.end is None:
            raise ParameterError("cosine schedule needs an end value")
        if self.kind == "step":
            if self.ratio is None or self.ratio <= 0:
                raise ParameterError("step schedule needs ratio > 0")
            if self.period is None or self.period < 1:
                raise ParameterError("step schedule needs period >= 1")

    def value(self, t) -> float:
        t = min(max(int(t), 0), self.horizon) if self.horizon >= 0 else 0
        if self.kind == "constant":
            return self.start
        if self.kind == "step":
            return self.start * self.ratio ** (t // self.period)
        if self.horizon <= 0:
            return self.start
        frac = t / self.horizon
        return self.start + (self.end - self.start) * (1.0 - np.cos(np.pi * frac)) / 2.0
