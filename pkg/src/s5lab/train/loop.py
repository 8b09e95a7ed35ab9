"""Mini-batch training and evaluation."""

import logging
import math
from dataclasses import dataclass

import numpy as np

from s5lab.errors import NumericalError
from s5lab.rng import STREAM_SHUFFLE, make_rng
from s5lab.train.model import classifier_backward, classifier_forward, cross_entropy
from s5lab.train.optim import AdamW

log = logging.getLogger(__name__)

METRICS_HEADER = "epoch,step,loss,accuracy,lr"


@dataclass
class EpochMetrics:
    epoch: int
    step: int
    loss: float
    accuracy: float
    lr: float

    def csv_row(self):
        return f"{self.epoch},{self.step},{self.loss:.10g},{self.accuracy:.10g},{self.lr:.10g}"


def steps_per_epoch(n_items, batch_size):
    return math.ceil(n_items / batch_size)


def train_epoch(model, opt, dataset, cfg, batch_size, epoch, seed=0, workers=1):
    """One pass over ``dataset`` in a seed-determined shuffled order.

    Updates ``model`` in place and returns :class:`EpochMetrics` with the mean
    training loss and accuracy over the epoch.
    """
    n = len(dataset)
    order = make_rng(seed, STREAM_SHUFFLE, epoch).permutation(n)
    total_loss = 0.0
    correct = 0
    lr = 0.0
    for b, start in enumerate(range(0, n, batch_size)):
        idx = order[start:start + batch_size]
        batch = dataset.subset(idx)
        logits, cache = classifier_forward(model, cfg, batch.inputs, batch.intervals,
                                           workers=workers, return_cache=True)
        loss, dlogits = cross_entropy(logits, batch.labels)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite loss in epoch {epoch}, batch {b}")
        grads = classifier_backward(model, cfg, cache, dlogits, workers=workers)
        lr = opt.step(model, grads)
        total_loss += loss * len(idx)
        correct += int((logits.argmax(axis=1) == batch.labels).sum())
    return EpochMetrics(epoch, opt.step_index, total_loss / n, correct / n, lr)


def evaluate(model, cfg, dataset, batch_size=256, workers=1):
    """Mean loss and accuracy of ``model`` on ``dataset``."""
    n = len(dataset)
    total_loss = 0.0
    correct = 0
    for start in range(0, n, batch_size):
        batch = dataset.subset(np.arange(start, min(start + batch_size, n)))
        logits = classifier_forward(model, cfg, batch.inputs, batch.intervals, workers=workers)
        loss, _ = cross_entropy(logits, batch.labels)
        total_loss += loss * len(batch)
        correct += int((logits.argmax(axis=1) == batch.labels).sum())
    return total_loss / n, correct / n


def fit(model, cfg, opt_config, train_set, batch_size, seed=0, workers=1, callback=None):
    """Train for ``opt_config.epochs`` epochs; returns the list of epoch metrics."""
    total = opt_config.epochs * steps_per_epoch(len(train_set), batch_size)
    opt = AdamW(model, opt_config, total)
    history = []
    for epoch in range(opt_config.epochs):
        m = train_epoch(model, opt, train_set, cfg, batch_size, epoch, seed=seed, workers=workers)
        log.info("epoch %d loss %.4f acc %.4f lr %.2e", epoch, m.loss, m.accuracy, m.lr)
        history.append(m)
        if callback is not None:
            callback(m)
    return history
