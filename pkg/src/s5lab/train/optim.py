"""AdamW with two parameter groups under a cosine-annealed learning rate."""

import math
from dataclasses import dataclass

import numpy as np

from s5lab.train.model import iter_params


@dataclass
class OptimizerConfig:
    lr: float = 0.004
    ssm_lr: float = 0.001
    weight_decay: float = 0.01
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    epochs: int = 10
    warmup: int = 0
    # per-task exceptions: C_tilde trained like the SSM core, B_tilde like the rest
    c_in_ssm_group: bool = False
    b_in_global_group: bool = False


def cosine_factor(step, total_steps, warmup=0):
    """Learning-rate multiplier: linear warmup, then cosine from 1 at the first
    post-warmup step down to 0 at step ``total_steps - 1``."""
    if warmup > 0 and step < warmup:
        return (step + 1) / warmup
    span = total_steps - 1 - warmup
    if span <= 0:
        return 1.0
    t = min(max(step - warmup, 0), span) / span
    return 0.5 * (1.0 + math.cos(math.pi * t))


def _group(name, is_core, config):
    short = name.rsplit(".", 1)[-1]
    if short == "C_tilde" and config.c_in_ssm_group:
        return True
    if short == "B_tilde" and config.b_in_global_group:
        return False
    return is_core


class AdamW:
    """Decoupled-weight-decay Adam.

    Complex parameters are treated as pairs of real parameters: first and
    second moments are kept separately for the real and imaginary parts.
    The SSM core (Lambda, B_tilde, log_delta) uses ``ssm_lr`` and no weight
    decay; everything else uses ``lr`` and ``weight_decay``.
    """

    def __init__(self, model, config, total_steps):
        self.config = config
        self.total_steps = max(int(total_steps), 1)
        self.step_index = 0
        self.m = {}
        self.v = {}
        for name, arr, _ in iter_params(model):
            self.m[name] = np.zeros_like(arr)
            self.v[name] = np.zeros_like(arr)

    def current_factor(self):
        return cosine_factor(self.step_index, self.total_steps, self.config.warmup)

    def step(self, model, grads):
        """Apply one update in place; returns the global learning rate used."""
        cfg = self.config
        b1, b2 = cfg.betas
        t = self.step_index + 1
        factor = self.current_factor()
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        for (name, p, core), (_, g, _) in zip(iter_params(model), iter_params(grads)):
            core = _group(name, core, cfg)
            lr = (cfg.ssm_lr if core else cfg.lr) * factor
            wd = 0.0 if core else cfg.weight_decay
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            if np.iscomplexobj(p):
                v *= b2
                v += (1.0 - b2) * (g.real * g.real + 1j * (g.imag * g.imag))
                upd = (m.real / c1) / (np.sqrt(v.real / c2) + cfg.eps) \
                    + 1j * ((m.imag / c1) / (np.sqrt(v.imag / c2) + cfg.eps))
            else:
                v *= b2
                v += (1.0 - b2) * g * g
                upd = (m / c1) / (np.sqrt(v / c2) + cfg.eps)
            if wd:
                p *= 1.0 - lr * wd
            p -= lr * upd
        self.step_index += 1
        return cfg.lr * factor


def adamw_cosine_step(opt, model, grads):
    """Functional alias for :meth:`AdamW.step`."""
    return opt.step(model, grads)
