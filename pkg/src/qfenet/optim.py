"""Initialisers, Adam, and learning-rate / batch-size schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def init_qfe_weights(shape, rng):
    """I.i.d. uniform on [-pi, pi]."""
    return rng.uniform(-np.pi, np.pi, size=shape)


def init_fc_weights(shape, rng, std=1e-3):
    return rng.normal(0.0, std, size=shape)


@dataclass
class AdamState:
    lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update.

    ``params`` and ``grads`` map names to arrays.  Moments in ``state`` are
    created lazily and updated in place; new parameter arrays are returned.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    updated = {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=float)
        if g.shape != np.shape(p):
            raise ValueError(f"gradient shape {g.shape} != parameter shape {np.shape(p)} for {name}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        step = state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
        updated[name] = p - step
    return updated


@dataclass(frozen=True)
class ScheduleRow:
    first: int
    last: int
    lr: float
    batch: int


class Schedule:
    """Piecewise-constant (learning rate, batch size) by 1-based epoch."""

    def __init__(self, rows):
        self.rows = tuple(ScheduleRow(*r) for r in rows)
        expect = 1
        for r in self.rows:
            if r.first != expect or r.last < r.first:
                raise ValueError("schedule rows must be contiguous, ordered and start at epoch 1")
            expect = r.last + 1

    @property
    def epochs(self):
        return self.rows[-1].last

    def __call__(self, epoch):
        for r in self.rows:
            if r.first <= epoch <= r.last:
                return r.lr, r.batch
        raise ValueError(f"epoch {epoch} not covered by schedule (1..{self.epochs})")

    def to_text(self):
        return ";".join(f"{r.first}-{r.last}:{r.lr!r}:{r.batch}" for r in self.rows)

    @classmethod
    def from_text(cls, text):
        """Parse ``"1-1:0.01:32;2-3:0.005:32"``."""
        rows = []
        for part in filter(None, (p.strip() for p in text.split(";"))):
            span, lr, batch = part.split(":")
            first, _, last = span.partition("-")
            rows.append((int(first), int(last or first), float(lr), int(batch)))
        return cls(rows)


STEPPED = Schedule([
    (1, 1, 0.01, 32),
    (2, 3, 0.005, 32),
    (4, 6, 0.001, 32),
    (7, 9, 0.0005, 16),
])


def schedule_for(epoch, schedule=STEPPED):
    return schedule(epoch)


class PlateauHalver:
    """Halve the learning rate once the monitored cost stops improving.

    The rate is halved after ``patience`` consecutive epochs without a new
    best cost, and the counter restarts.
    """

    def __init__(self, lr, patience=2, factor=0.5):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best = np.inf
        self.stale = 0

    def update(self, cost):
        if cost < self.best:
            self.best = cost
            self.stale = 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr *= self.factor
                self.stale = 0
        return self.lr
