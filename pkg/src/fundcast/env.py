"""Campaign data model, reward, and the self-feeding episode environment.

A campaign day carries a dynamic feature row whose last column is the
funding progress visible that day. During an episode the environment
rewrites that column for day t+1 with the agent's own estimate (the
default, "self-feeding" mode) or keeps the true value (teacher forcing),
then advances the recurrent encoder one step. States handed out by the
environment are plain numpy vectors; no gradients flow at rollout time.
"""

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

DATASET_FORMAT_VERSION = 1

# Last dynamic-feature column holds the progress visible that day.
PROGRESS_SLOT = -1


@dataclass
class Campaign:
    """One crowdfunding campaign: static features, a per-day dynamic
    feature matrix, and the cumulative funding-progress series."""

    id: str
    static_feat: np.ndarray
    dynamic_feat: np.ndarray
    progress: np.ndarray

    def __post_init__(self):
        self.static_feat = np.asarray(self.static_feat, dtype=np.float64)
        self.dynamic_feat = np.asarray(self.dynamic_feat, dtype=np.float64)
        self.progress = np.asarray(self.progress, dtype=np.float64)
        self.validate()

    @property
    def duration(self):
        return len(self.progress)

    def validate(self):
        if self.dynamic_feat.ndim != 2:
            raise ValueError(f"campaign {self.id}: dynamic features must be 2-D")
        if len(self.dynamic_feat) != len(self.progress):
            raise ValueError(
                f"campaign {self.id}: {len(self.dynamic_feat)} feature rows "
                f"vs {len(self.progress)} progress days"
            )
        if self.duration < 2:
            raise ValueError(f"campaign {self.id}: duration must be >= 2")
        if not np.all(np.isfinite(self.progress)) or not np.all(np.isfinite(self.dynamic_feat)):
            raise ValueError(f"campaign {self.id}: non-finite values")
        if self.progress[0] < 0 or np.any(np.diff(self.progress) < 0):
            raise ValueError(f"campaign {self.id}: progress must be non-negative, non-decreasing")


@dataclass
class EnvStep:
    """Environment emission: encoder state, reward, done flag, day index."""

    state: np.ndarray
    reward: float
    done: bool
    t: int


def reward_kernel(action, truth, sigma=0.1):
    """Gaussian kernel of the prediction error.

    Lies in (0, 1], hits 1 exactly when action == truth, is symmetric in
    the error sign, and strictly decreases as |action - truth| grows.
    """
    if truth < 0:
        raise ValueError(f"truth must be >= 0, got {truth}")
    err = float(action) - float(truth)
    return math.exp(-(err * err) / (2.0 * sigma * sigma))


class CrowdfundingEnv:
    """Episode driver over one campaign at a time.

    reset() encodes day 1 with true features; each step() scores the
    action against the next day's true progress, substitutes the action
    into the next day's progress slot (unless teacher forcing), and
    advances the encoder. An episode has exactly duration-1 transitions.
    """

    def __init__(self, encoder, reward_sigma=0.1, reward_ma_window=1):
        if reward_ma_window < 1:
            raise ValueError(f"moving-average window must be >= 1, got {reward_ma_window}")
        self.encoder = encoder
        self.reward_sigma = reward_sigma
        self.reward_ma_window = reward_ma_window
        self.campaign = None
        self.t = 0
        self.done = True
        self._hidden = None
        self._static_proj = None
        self._fed = None
        self._recent = None

    def reset(self, campaign):
        campaign.validate()
        self.campaign = campaign
        self.t = 1
        self.done = False
        self._fed = campaign.dynamic_feat.copy()
        self._recent = deque(maxlen=self.reward_ma_window)
        self._hidden = None  # day 1 always starts from the zero state
        with ad.no_grad():
            self._static_proj = self.encoder.project_static(
                Tensor(campaign.static_feat.reshape(1, -1))
            )
            self._hidden = self._encode_day(0)
        return EnvStep(state=self._state(), reward=0.0, done=False, t=1)

    def _encode_day(self, row_index):
        x = ad.concat([self._static_proj, Tensor(self._fed[row_index].reshape(1, -1))], axis=1)
        prev = self._hidden if self._hidden is not None else self.encoder.initial_state()
        return self.encoder.step(prev, x)

    def _state(self):
        return self._hidden.data[0].copy()

    def fed_features(self):
        """Dynamic rows as actually fed so far (self-fed slots included)."""
        return self._fed.copy()

    def step(self, action, teacher_forcing=False):
        if self.done:
            raise RuntimeError("step() called on a finished episode")
        action = float(action)
        next_row = self.t  # 0-based row of day t+1
        truth_next = float(self.campaign.progress[next_row])
        raw = reward_kernel(action, truth_next, self.reward_sigma)
        self._recent.append(raw)
        reward = sum(self._recent) / len(self._recent)
        if not teacher_forcing:
            self._fed[next_row, PROGRESS_SLOT] = action
        with ad.no_grad():
            self._hidden = self._encode_day(next_row)
        self.t += 1
        self.done = self.t == self.campaign.duration
        return EnvStep(state=self._state(), reward=reward, done=self.done, t=self.t)


# -- dataset serialization ----------------------------------------------


def save_dataset(path, campaigns):
    """Write campaigns as JSON lines behind a single header record."""
    campaigns = list(campaigns)
    if not campaigns:
        raise ValueError("cannot save an empty dataset")
    header = {
        "format_version": DATASET_FORMAT_VERSION,
        "campaign_count": len(campaigns),
        "d_static": len(campaigns[0].static_feat),
        "d_dynamic": campaigns[0].dynamic_feat.shape[1],
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for c in campaigns:
            record = {
                "id": c.id,
                "static_feat": c.static_feat.tolist(),
                "dynamic_feat": c.dynamic_feat.tolist(),
                "progress": c.progress.tolist(),
            }
            fh.write(json.dumps(record) + "\n")


def load_dataset(path):
    """Read a JSON-lines dataset; returns (campaigns, header dict)."""
    with open(path) as fh:
        header_line = fh.readline()
        if not header_line:
            raise ValueError(f"{path}: empty dataset file")
        header = json.loads(header_line)
        version = header.get("format_version")
        if version != DATASET_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported dataset format version {version!r}")
        campaigns = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            campaigns.append(
                Campaign(
                    id=rec["id"],
                    static_feat=rec["static_feat"],
                    dynamic_feat=rec["dynamic_feat"],
                    progress=rec["progress"],
                )
            )
    if len(campaigns) != header["campaign_count"]:
        raise ValueError(
            f"{path}: header says {header['campaign_count']} campaigns, found {len(campaigns)}"
        )
    return campaigns, header


def write_progress_csv(path, campaigns):
    """Plot-ready progress table: one row per (campaign, day)."""
    with open(path, "w") as fh:
        fh.write("id,day,progress\n")
        for c in campaigns:
            for day, p in enumerate(c.progress, start=1):
                fh.write(f"{c.id},{day},{p!r}\n")
