"""Random-walk Metropolis-Hastings step-size tuning."""

from __future__ import annotations

import math
from dataclasses import dataclass

STEP_MIN = 1e-6
STEP_MAX = 1e3


@dataclass
class MHTuner:
    """Proposal scale for one random-walk coordinate.

    While not frozen, every ``window`` proposals the log step moves by
    ``(rate - target_rate) / sqrt(batch)`` (Robbins-Monro gains) and is
    clamped to [1e-6, 1e3]. ``freeze()`` is called at the end of burn-in;
    the step is constant afterwards.
    """

    log_step: float = math.log(0.5)
    target_rate: float = 0.44
    window: int = 50
    frozen: bool = False
    proposed: int = 0
    accepted: int = 0
    _batch_prop: int = 0
    _batch_acc: int = 0
    _batches: int = 0

    @property
    def step(self) -> float:
        return math.exp(self.log_step)

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def record(self, accepted: bool) -> None:
        self.proposed += 1
        self.accepted += bool(accepted)
        if self.frozen:
            return
        self._batch_prop += 1
        self._batch_acc += bool(accepted)
        if self._batch_prop >= self.window:
            self._batches += 1
            rate = self._batch_acc / self._batch_prop
            new = self.log_step + (rate - self.target_rate) / math.sqrt(self._batches)
            self.log_step = min(max(new, math.log(STEP_MIN)), math.log(STEP_MAX))
            self._batch_prop = self._batch_acc = 0

    def freeze(self) -> None:
        self.frozen = True

    def reset_counts(self) -> None:
        self.proposed = self.accepted = 0


class AcceptCounter:
    """Acceptance bookkeeping for kernels that have no tunable step."""

    def __init__(self):
        self.proposed = 0
        self.accepted = 0

    def record(self, accepted: bool) -> None:
        self.proposed += 1
        self.accepted += bool(accepted)

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")

    def reset_counts(self) -> None:
        self.proposed = self.accepted = 0
