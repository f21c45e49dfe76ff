"""AdamW with decoupled weight decay and a warmup-then-linear-decay schedule."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ScheduleExhausted


def warmup_steps(total_steps: int, warmup_ratio: float) -> int:
    return math.ceil(warmup_ratio * total_steps)


def learning_rate(step: int, peak_lr: float, total_steps: int, warmup_ratio: float = 0.06) -> float:
    """Learning rate for the 1-indexed update `step`.

    Rises linearly to peak_lr at ceil(warmup_ratio * total_steps), then
    decays linearly to exactly 0 at total_steps.
    """
    if not 1 <= step <= total_steps:
        raise ValueError(f"step {step} outside [1, {total_steps}]")
    warm = warmup_steps(total_steps, warmup_ratio)
    if step <= warm:
        return peak_lr * step / warm
    if warm == total_steps:
        return peak_lr
    return peak_lr * (total_steps - step) / (total_steps - warm)


def decays(name: str) -> bool:
    """Decoupled weight decay applies to weights only, never biases or
    normalization gains."""
    leaf = name.rsplit(".", 1)[-1]
    return not (leaf.startswith("b") or leaf in ("gain", "bias"))


@dataclass
class OptimizerState:
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    peak_lr: float
    total_steps: int
    warmup_ratio: float = 0.06
    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-8
    weight_decay: float = 0.01
    last_lr: float = field(default=0.0, compare=False)


def init_optimizer(
    params: dict[str, np.ndarray],
    peak_lr: float,
    total_steps: int,
    warmup_ratio: float = 0.06,
    betas: tuple[float, float] = (0.9, 0.98),
    eps: float = 1e-8,
    weight_decay: float = 0.01,
) -> OptimizerState:
    return OptimizerState(
        step=0,
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        peak_lr=peak_lr,
        total_steps=total_steps,
        warmup_ratio=warmup_ratio,
        betas=betas,
        eps=eps,
        weight_decay=weight_decay,
    )


def adamw_update(
    params: dict[str, np.ndarray],
    state: OptimizerState,
    grads: dict[str, np.ndarray],
) -> float:
    """Apply one AdamW update in place; returns the learning rate used."""
    if state.step >= state.total_steps:
        raise ScheduleExhausted(f"all {state.total_steps} steps already taken")
    state.step += 1
    lr = learning_rate(state.step, state.peak_lr, state.total_steps, state.warmup_ratio)
    b1, b2 = state.betas
    bias1 = 1.0 - b1**state.step
    bias2 = 1.0 - b2**state.step
    for name, param in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        if state.weight_decay and decays(name):
            update = update + state.weight_decay * param
        param -= lr * update
    state.last_lr = lr
    return lr
