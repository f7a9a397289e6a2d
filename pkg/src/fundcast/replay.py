"""Whole-trajectory experience replay."""

from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass
class Trajectory:
    """One full episode: everything needed to replay it through the
    current networks. ``fed_dynamic`` holds the feature rows as actually
    fed (self-fed progress slots baked in); ``states`` are the rollout-time
    encoder states h_1..h_T; the per-step arrays cover the T-1 transitions.
    ``split`` is the observed-prefix length (duration minus the forecast
    horizon drawn for this episode)."""

    campaign_id: str
    static_feat: np.ndarray
    fed_dynamic: np.ndarray
    truths: np.ndarray
    states: np.ndarray
    options: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminations: np.ndarray
    split: int

    @property
    def duration(self):
        return len(self.truths)

    @property
    def steps(self):
        return self.duration - 1

    def validate(self):
        T = self.duration
        if len(self.fed_dynamic) != T or len(self.states) != T:
            raise ValueError(f"trajectory {self.campaign_id}: day-array length mismatch")
        for name in ("options", "actions", "rewards", "terminations"):
            if len(getattr(self, name)) != T - 1:
                raise ValueError(f"trajectory {self.campaign_id}: {name} must have length T-1")
        if not 2 <= self.split <= T:
            raise ValueError(f"trajectory {self.campaign_id}: bad split {self.split}")
        # The option may only change at a recorded termination event.
        for t in range(1, T - 1):
            if self.options[t] != self.options[t - 1] and not self.terminations[t]:
                raise ValueError(
                    f"trajectory {self.campaign_id}: option switch without termination at {t}"
                )
        return self


class ReplayBuffer:
    """Bounded FIFO of trajectories with uniform batch sampling."""

    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def push(self, trajectory):
        self._items.append(trajectory)

    def __len__(self):
        return len(self._items)

    def trajectories(self):
        return list(self._items)

    def sample(self, batch_size, rng):
        """Uniform sample without replacement within the batch."""
        if len(self._items) == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        n = min(batch_size, len(self._items))
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[int(i)] for i in idx]
