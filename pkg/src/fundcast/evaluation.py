"""Forecasting, error metrics, and the funding-cycle bucket analysis.

Forecasts encode the observed prefix with true features, then roll the
remaining days feeding each prediction back into the next day's progress
slot. Option dynamics at evaluation time are fully deterministic: the
greedy option is kept while its continuation probability is at least
one half and re-selected greedily otherwise.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .env import PROGRESS_SLOT

N_BUCKETS = 8


def _greedy_option(nets, state):
    return nets.select_option(state, 0.0)


def _maybe_switch(nets, state, option):
    if nets.K == 1:
        return 0, False
    beta = nets.termination_prob_np(state, option)
    if beta < 0.5:
        return _greedy_option(nets, state), True
    return option, False


def forecast(campaign, nets, horizon):
    """Predict the final ``horizon`` days of progress, self-feeding."""
    T = campaign.duration
    if not 1 <= horizon < T:
        raise ValueError(f"horizon must be in [1, {T - 1}], got {horizon}")
    prefix = T - horizon
    fed = campaign.dynamic_feat.copy()
    with ad.no_grad():
        static_proj = nets.encoder.project_static(Tensor(campaign.static_feat.reshape(1, -1)))
        hidden = nets.encoder.initial_state()

        def advance(row):
            nonlocal hidden
            x = ad.concat([static_proj, Tensor(row.reshape(1, -1))], axis=1)
            hidden = nets.encoder.step(hidden, x)
            return hidden.data[0]

        state = advance(fed[0])
        option = _greedy_option(nets, state)
        for row in range(1, prefix):
            state = advance(fed[row])
            option, _ = _maybe_switch(nets, state, option)
        preds = np.empty(horizon)
        for k in range(horizon):
            action = nets.act_np(state, option)
            preds[k] = action
            row = prefix + k
            if row < T:
                fed[row, PROGRESS_SLOT] = action
                state = advance(fed[row])
                option, _ = _maybe_switch(nets, state, option)
    return preds


def last_value_baseline(campaign, horizon):
    """Carry the last observed progress forward over the whole window."""
    T = campaign.duration
    if not 1 <= horizon < T:
        raise ValueError(f"horizon must be in [1, {T - 1}], got {horizon}")
    return np.full(horizon, campaign.progress[T - horizon - 1])


def compute_metrics(truth_series, pred_series):
    """Pooled MAE, RMSE, and MAPE (as a percentage) over all campaigns
    and forecast days. Raises on any zero truth value, naming it."""
    if len(truth_series) != len(pred_series) or not truth_series:
        raise ValueError("need equally many non-empty truth and prediction series")
    abs_sum = 0.0
    sq_sum = 0.0
    pct_sum = 0.0
    count = 0
    for i, (truth, pred) in enumerate(zip(truth_series, pred_series)):
        truth = np.asarray(truth, dtype=np.float64)
        pred = np.asarray(pred, dtype=np.float64)
        if truth.shape != pred.shape:
            raise ValueError(f"series {i}: shapes {truth.shape} vs {pred.shape}")
        for k in range(len(truth)):
            if truth[k] == 0.0:
                raise ValueError(f"zero truth value at campaign index {i}, day offset {k + 1}")
            err = truth[k] - pred[k]
            abs_sum += abs(err)
            sq_sum += err * err
            pct_sum += abs(err) / truth[k]
            count += 1
    mae = abs_sum / count
    rmse = (sq_sum / count) ** 0.5
    mape = 100.0 * pct_sum / count
    return mae, rmse, mape


def per_day_errors(truth_series, pred_series):
    """MAE and MAPE per forecast-day offset; series must share a length."""
    if not truth_series:
        raise ValueError("need at least one series")
    horizon = len(truth_series[0])
    mae = np.zeros(horizon)
    mape = np.zeros(horizon)
    for i, (truth, pred) in enumerate(zip(truth_series, pred_series)):
        truth = np.asarray(truth, dtype=np.float64)
        pred = np.asarray(pred, dtype=np.float64)
        if len(truth) != horizon or len(pred) != horizon:
            raise ValueError(f"series {i}: length differs from horizon {horizon}")
        for k in range(horizon):
            if truth[k] == 0.0:
                raise ValueError(f"zero truth value at campaign index {i}, day offset {k + 1}")
            mae[k] += abs(truth[k] - pred[k])
            mape[k] += abs(truth[k] - pred[k]) / truth[k]
    n = len(truth_series)
    return mae / n, 100.0 * mape / n


@dataclass
class EvalReport:
    horizon: int
    campaign_count: int
    excluded: int
    mae: float
    rmse: float
    mape: float
    per_day_mae: list = field(default_factory=list)
    per_day_mape: list = field(default_factory=list)

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "campaign_count": self.campaign_count,
            "excluded": self.excluded,
            "mae": self.mae,
            "rmse": self.rmse,
            "mape": self.mape,
            "per_day_mae": list(self.per_day_mae),
            "per_day_mape": list(self.per_day_mape),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("day,mae,mape\n")
            for k in range(len(self.per_day_mae)):
                fh.write(f"{k + 1},{self.per_day_mae[k]!r},{self.per_day_mape[k]!r}\n")


def evaluate(campaigns, nets, horizon, forecaster=None):
    """Forecast every campaign and pool the errors into an EvalReport.

    Campaigns with a zero truth anywhere in the window are excluded from
    the averages (division by zero in the percentage error) and counted.
    """
    forecaster = forecaster or forecast
    truths, preds = [], []
    excluded = 0
    for campaign in campaigns:
        if campaign.duration <= horizon:
            excluded += 1
            continue
        window = campaign.progress[campaign.duration - horizon :]
        if np.any(window == 0.0):
            excluded += 1
            continue
        truths.append(window)
        preds.append(forecaster(campaign, nets, horizon))
    if not truths:
        raise ValueError(f"no usable campaigns for horizon {horizon}")
    mae, rmse, mape = compute_metrics(truths, preds)
    day_mae, day_mape = per_day_errors(truths, preds)
    return EvalReport(
        horizon=horizon,
        campaign_count=len(truths),
        excluded=excluded,
        mae=mae,
        rmse=rmse,
        mape=mape,
        per_day_mae=day_mae.tolist(),
        per_day_mape=day_mape.tolist(),
    )


# -- funding-cycle bucket analysis ----------------------------------------


def bucket_index(day, duration):
    """Bucket of a 1-based day under an even 8-way split of the cycle."""
    return min(N_BUCKETS - 1, (N_BUCKETS * (day - 1)) // duration)


def increment_shares(campaigns):
    """Share of total contributed progress landing in each bucket."""
    totals = np.zeros(N_BUCKETS)
    for c in campaigns:
        increments = np.diff(np.concatenate([[0.0], c.progress]))
        for t in range(c.duration):
            totals[bucket_index(t + 1, c.duration)] += increments[t]
    grand = totals.sum()
    if grand <= 0:
        raise ValueError("campaigns carry no positive increments")
    return totals / grand


@dataclass
class UShapeReport:
    beta_means: np.ndarray  # (buckets, options)
    output_diff: np.ndarray  # (buckets,)
    shares: np.ndarray  # (buckets,)
    day_counts: np.ndarray  # (buckets,)

    @property
    def num_options(self):
        return self.beta_means.shape[1]

    def to_dict(self):
        return {
            "buckets": N_BUCKETS,
            "beta_means": self.beta_means.tolist(),
            "output_diff_mean": self.output_diff.tolist(),
            "increment_share": self.shares.tolist(),
            "day_counts": self.day_counts.tolist(),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    def write_csv(self, path):
        cols = ["bucket"]
        cols += [f"beta_mean_option{k}" for k in range(self.num_options)]
        cols += ["output_diff_mean", "increment_share"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for b in range(N_BUCKETS):
                row = [str(b + 1)]
                row += [repr(self.beta_means[b, k]) for k in range(self.num_options)]
                row += [repr(self.output_diff[b]), repr(self.shares[b])]
                fh.write(",".join(row) + "\n")


def ushape_analysis(campaigns, nets):
    """Per-bucket continuation values, actor-output gaps, and increment
    shares over greedy self-feeding rollouts of every campaign."""
    if nets.K < 2:
        raise ValueError(f"bucket analysis needs at least 2 options, got K={nets.K}")
    beta_sums = np.zeros((N_BUCKETS, nets.K))
    diff_sums = np.zeros(N_BUCKETS)
    counts = np.zeros(N_BUCKETS)
    for campaign in campaigns:
        T = campaign.duration
        fed = campaign.dynamic_feat.copy()
        with ad.no_grad():
            static_proj = nets.encoder.project_static(
                Tensor(campaign.static_feat.reshape(1, -1))
            )
            hidden = nets.encoder.initial_state()
            option = None
            for t in range(1, T + 1):
                x = ad.concat([static_proj, Tensor(fed[t - 1].reshape(1, -1))], axis=1)
                hidden = nets.encoder.step(hidden, x)
                state = hidden.data[0]
                option = (
                    _greedy_option(nets, state)
                    if option is None
                    else _maybe_switch(nets, state, option)[0]
                )
                b = bucket_index(t, T)
                counts[b] += 1
                row = Tensor(state.reshape(1, -1))
                for k in range(nets.K):
                    beta_sums[b, k] += float(nets.termination_prob(row, k).data[0, 0])
                out0 = float(nets.act(row, 0).data[0, 0])
                out1 = float(nets.act(row, 1).data[0, 0])
                diff_sums[b] += out0 - out1
                if t < T:
                    action = nets.act_np(state, option)
                    fed[t, PROGRESS_SLOT] = action
    if np.any(counts == 0):
        raise ValueError("some buckets received no days; campaigns too short")
    return UShapeReport(
        beta_means=beta_sums / counts[:, None],
        output_diff=diff_sums / counts,
        shares=increment_shares(campaigns),
        day_counts=counts,
    )
