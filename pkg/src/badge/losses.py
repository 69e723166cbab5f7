"""Batch agreement losses between oracle outputs and reference labels.

Every loss maps (predicted rows, truth rows) -> scalar, oriented so
that LOWER means the attack is doing better.  Rows are either one-hot
decision vectors or probability rows; truth rows are one-hot labels
(the ground truth, or the target class for targeted runs).
"""

import numpy as np

from .errors import DimensionError

CE_FLOOR = 1e-12
KLD_SMOOTHING = 1e-6


def _check_pair(pred, truth):
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.ndim != 2 or truth.ndim != 2:
        raise DimensionError(
            "expected 2-D rows, got %d-D and %d-D" % (pred.ndim, truth.ndim)
        )
    if pred.shape != truth.shape:
        raise DimensionError("shape mismatch: %r vs %r" % (pred.shape, truth.shape))
    if pred.shape[0] < 1 or pred.shape[1] < 2:
        raise DimensionError("need at least 1 sample and 2 classes, got %r" % (pred.shape,))
    return pred, truth


def acc_loss(pred, truth) -> float:
    """Mean per-sample hinge overlap sum, divided by the class count.

    Per sample: (1/N) * sum_i max(0, pred_i + truth_i - 1).  For one-hot
    pairs this is 1/N when the argmaxes agree and 0 when they differ, so
    N * value is exactly the batch agreement rate.
    """
    pred, truth = _check_pair(pred, truth)
    overlap = np.maximum(0.0, pred + truth - 1.0).sum(axis=1)
    return float(np.mean(overlap) / pred.shape[1])


def target_acc_loss(pred, truth) -> float:
    """Complement of acc_loss, for pulling predictions toward a target.

    Per sample: (1/N) * sum_i (1 - max(0, pred_i + truth_i - 1)).  With
    truth set to the target one-hot, minimizing this rewards agreement
    with the target instead of punishing it.
    """
    pred, truth = _check_pair(pred, truth)
    comp = (1.0 - np.maximum(0.0, pred + truth - 1.0)).sum(axis=1)
    return float(np.mean(comp) / pred.shape[1])


def ce_loss(pred, truth) -> float:
    """Negated cross-entropy: mean log probability of the true class."""
    pred, truth = _check_pair(pred, truth)
    p_true = (pred * truth).sum(axis=1)
    return float(np.mean(np.log(p_true + CE_FLOOR)))


def kld_loss(pred, truth) -> float:
    """Negated KL divergence KL(truth || pred) after smoothing.

    Both rows get 1e-6 added to every entry and are renormalized, so
    one-hot decision rows are handled without infinities.
    """
    pred, truth = _check_pair(pred, truth)
    q = pred + KLD_SMOOTHING
    q /= q.sum(axis=1, keepdims=True)
    t = truth + KLD_SMOOTHING
    t /= t.sum(axis=1, keepdims=True)
    kl = (t * np.log(t / q)).sum(axis=1)
    return float(-np.mean(kl))


def emd_loss(pred, truth) -> float:
    """Negated earth mover's distance under the class-index ground metric.

    The batch-mean prediction row and batch-mean truth row are compared
    as distributions: sum of absolute CDF differences along the class
    axis, negated.  Measuring transport between the aggregate
    distributions makes this loss blind to flips that merely permute
    predictions within the batch, which is why it is a poor signal on
    one-hot decisions.
    """
    pred, truth = _check_pair(pred, truth)
    gap = np.mean(pred, axis=0) - np.mean(truth, axis=0)
    return float(-np.sum(np.abs(np.cumsum(gap))))


LOSSES = {
    "acc": acc_loss,
    "target_acc": target_acc_loss,
    "ce": ce_loss,
    "kld": kld_loss,
    "emd": emd_loss,
}
