"""Loss functions for the critic, the option actors, and the termination
heads, plus their weighted combination.

Gradient-flow contracts, enforced by construction and asserted in tests:

* critic losses backpropagate into the critic and the encoder only; the
  one-step bootstrap values come from the target networks and are plain
  constants.
* actor "future" losses backpropagate into the actor heads and the
  encoder; the critic is applied with frozen weights so its parameters
  receive nothing while the action input still does.
* the termination loss touches termination parameters only: it reads
  the trajectory's stored (rollout-time) states as constants and uses a
  detached advantage coefficient.
"""

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class LossWeights:
    """Blend weights for the combined actor objective and the discount."""

    past_error: float = 100.0
    monotonic: float = 1.0
    termination: float = 1.0
    gamma: float = 0.95

    def validate(self):
        for name in ("past_error", "monotonic", "termination"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        return self


def encode_batch(nets, batch):
    """Graph-connected states for every trajectory in the batch."""
    return [nets.encode_trajectory(traj) for traj in batch]


def _stacked_states(states, lo, hi):
    return ad.stack_rows(states[lo:hi])


# -- critic -------------------------------------------------------------


def option_backup_u(next_state, option, nets):
    """One-step backup value at the next state under the current option.

    Stays on the current option's value with the continuation probability
    and otherwise takes the greedy maximum over options; everything is
    evaluated with the target networks. A single option collapses the
    backup to that option's value exactly.
    """
    state = np.asarray(next_state, dtype=np.float64).reshape(1, -1)
    nets._check_option(option)
    values = nets.option_values_np(state, target=True)[0]
    if nets.K == 1:
        return float(values[0])
    beta = nets.termination_prob_np(state[0], option, target=True)
    return float((1.0 - beta) * values[option] + beta * values.max())


def _bootstrap_values_tc3(nets, states, gamma, rewards):
    """TD targets r_t + gamma * Q_target(s_{t+1}, mu_target(s_{t+1}));
    the final transition keeps the reward alone."""
    T = len(states)
    targets = np.asarray(rewards, dtype=np.float64).copy()
    if T > 2:
        next_rows = np.stack([s.data[0] for s in states[1 : T - 1]])
        with ad.no_grad():
            rows = Tensor(next_rows)
            acts = nets.act(rows, 0, target=True)
            q_next = nets.critic_value(rows, 0, acts, target=True).data[:, 0]
        targets[: T - 2] += gamma * q_next
    return targets


def _bootstrap_values_options(nets, states, options, gamma, rewards):
    """TD targets with the option-aware backup in place of plain Q."""
    T = len(states)
    targets = np.asarray(rewards, dtype=np.float64).copy()
    if T > 2:
        next_rows = np.stack([s.data[0] for s in states[1 : T - 1]])
        values = nets.option_values_np(next_rows, target=True)
        opts = np.asarray(options[: T - 2], dtype=int)
        if nets.K == 1:
            u = values[:, 0]
        else:
            with ad.no_grad():
                beta = (
                    nets.termination_prob(Tensor(next_rows), opts, target=True).data[:, 0]
                )
            own = values[np.arange(len(opts)), opts]
            u = (1.0 - beta) * own + beta * values.max(axis=1)
        targets[: T - 2] += gamma * u
    return targets


def _critic_loss(batch, nets, gamma, bootstrap_fn, states_batch=None):
    if not batch:
        raise ValueError("critic loss needs a non-empty batch")
    if states_batch is None:
        states_batch = encode_batch(nets, batch)
    sq_sums = []
    total_steps = 0
    for traj, states in zip(batch, states_batch):
        T = traj.duration
        targets = bootstrap_fn(nets, states, traj)
        state_rows = _stacked_states(states, 0, T - 1)
        q = nets.critic_value(state_rows, traj.options, traj.actions)
        delta = Tensor(targets.reshape(-1, 1)) - q
        sq_sums.append(ad.total_sum(ad.square(delta)))
        total_steps += T - 1
    total = sq_sums[0]
    for s in sq_sums[1:]:
        total = total + s
    return ad.scalar_mul(total, 1.0 / total_steps)


def critic_loss_tc3(batch, nets, gamma, states_batch=None):
    """Mean squared one-step temporal difference, single-option form."""
    if nets.K != 1:
        raise ValueError(f"tc3 critic loss requires a single option, got K={nets.K}")

    def bootstrap(nets_, states, traj):
        return _bootstrap_values_tc3(nets_, states, gamma, traj.rewards)

    return _critic_loss(batch, nets, gamma, bootstrap, states_batch)


def critic_loss_options(batch, nets, gamma, states_batch=None):
    """Mean squared temporal difference with the option-aware backup."""

    def bootstrap(nets_, states, traj):
        return _bootstrap_values_options(nets_, states, traj.options, gamma, traj.rewards)

    return _critic_loss(batch, nets, gamma, bootstrap, states_batch)


# -- actor --------------------------------------------------------------


def actor_future_loss(batch, nets, states_batch=None):
    """Negative mean critic score of the actor's own actions.

    The critic is applied frozen, so minimizing pushes each taken
    option's actor (and the encoder) toward higher-valued actions while
    leaving critic parameters untouched.
    """
    if not batch:
        raise ValueError("actor future loss needs a non-empty batch")
    if states_batch is None:
        states_batch = encode_batch(nets, batch)
    q_sums = []
    total_steps = 0
    for traj, states in zip(batch, states_batch):
        T = traj.duration
        state_rows = _stacked_states(states, 0, T - 1)
        actions = nets.act(state_rows, traj.options)
        q = nets.critic_value(state_rows, traj.options, actions, frozen=True)
        q_sums.append(ad.total_sum(q))
        total_steps += T - 1
    total = q_sums[0]
    for s in q_sums[1:]:
        total = total + s
    return ad.scalar_mul(total, -1.0 / total_steps)


def actor_future_loss_tc3(batch, nets, states_batch=None):
    if nets.K != 1:
        raise ValueError(f"tc3 actor loss requires a single option, got K={nets.K}")
    return actor_future_loss(batch, nets, states_batch)


def actor_future_loss_options(batch, nets, states_batch=None):
    return actor_future_loss(batch, nets, states_batch)


def predicted_series(traj, nets, states=None):
    """Recompute the action series a_1..a_{T-1} through the current actor
    heads, respecting the option taken at each step."""
    if states is None:
        states = nets.encode_trajectory(traj)
    state_rows = _stacked_states(states, 0, traj.duration - 1)
    return nets.act(state_rows, traj.options)


def actor_past_loss(traj, nets, states=None):
    """Mean squared error of recomputed predictions against the true
    progress over the observed prefix (days 2..split)."""
    t = traj.split
    if t < 2:
        raise ValueError(f"past loss needs a prefix of at least 2 days, got {t}")
    if states is None:
        states = nets.encode_trajectory(traj)
    state_rows = _stacked_states(states, 0, t - 1)
    actions = nets.act(state_rows, traj.options[: t - 1])
    truths = Tensor(traj.truths[1:t].reshape(-1, 1))
    return ad.mean(ad.square(actions - truths))


def monotonicity_loss(series):
    """Penalty on decreases in a predicted progress series: the squared
    drop wherever a value falls below its predecessor, zero otherwise."""
    if not isinstance(series, Tensor):
        series = Tensor(np.asarray(series, dtype=np.float64))
    n = series.data.shape[0]
    if n < 2:
        raise ValueError(f"monotonicity loss needs at least 2 values, got {n}")
    diffs = ad.slice_axis(series, 1, n, axis=0) - ad.slice_axis(series, 0, n - 1, axis=0)
    mask = Tensor((diffs.data < 0).astype(np.float64))
    return ad.total_sum(ad.mul(ad.square(diffs), mask))


def termination_loss(batch, nets):
    """Continuation-weighted disadvantage of staying on the taken option.

    The advantage (own value minus best value at the next state) is a
    detached coefficient and is never positive; states are the stored
    rollout-time ones, so only termination heads receive gradients.
    A single option makes the loss identically zero.
    """
    if nets.K == 1:
        return Tensor(0.0)
    beta_terms = []
    total_rows = 0
    for traj in batch:
        T = traj.duration
        if T < 3:
            continue
        next_states = traj.states[1 : T - 1]
        opts = np.asarray(traj.options[: T - 2], dtype=int)
        values = nets.option_values_np(next_states)
        own = values[np.arange(len(opts)), opts]
        advantage = own - values.max(axis=1)
        beta = nets.termination_prob(Tensor(next_states), opts)
        weighted = ad.mul(beta, Tensor(advantage.reshape(-1, 1)))
        beta_terms.append(ad.total_sum(weighted))
        total_rows += len(opts)
    if not beta_terms:
        return Tensor(0.0)
    total = beta_terms[0]
    for term in beta_terms[1:]:
        total = total + term
    return ad.scalar_mul(total, 1.0 / total_rows)


def actor_total_loss(batch, nets, weights, mode):
    """Weighted actor objective; returns (loss, per-component floats)."""
    if mode not in ("tc3", "options"):
        raise ValueError(f"mode must be 'tc3' or 'options', got {mode!r}")
    if mode == "tc3" and nets.K != 1:
        raise ValueError(f"tc3 mode requires a single option, got K={nets.K}")
    weights.validate()
    states_batch = encode_batch(nets, batch)
    l_fu = actor_future_loss(batch, nets, states_batch)
    pa_terms = [
        actor_past_loss(traj, nets, states)
        for traj, states in zip(batch, states_batch)
    ]
    l_pa = pa_terms[0]
    for term in pa_terms[1:]:
        l_pa = l_pa + term
    l_pa = ad.scalar_mul(l_pa, 1.0 / len(batch))
    reg_terms = [
        monotonicity_loss(predicted_series(traj, nets, states))
        for traj, states in zip(batch, states_batch)
    ]
    l_reg = reg_terms[0]
    for term in reg_terms[1:]:
        l_reg = l_reg + term
    l_reg = ad.scalar_mul(l_reg, 1.0 / len(batch))
    total = l_fu + ad.scalar_mul(l_pa, weights.past_error)
    total = total + ad.scalar_mul(l_reg, weights.monotonic)
    components = {
        "future": l_fu.item(),
        "past": l_pa.item(),
        "monotonic": l_reg.item(),
        "termination": 0.0,
    }
    if mode == "options":
        l_term = termination_loss(batch, nets)
        total = total + ad.scalar_mul(l_term, weights.termination)
        components["termination"] = l_term.item()
    return total, components
