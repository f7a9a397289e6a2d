"""Rollout collection and the replay-driven training loop.

Each epoch rolls out a shuffled slice of the training campaigns under
the current exploration rate, pushes the full trajectories into replay,
then alternates critic and actor update steps on sampled batches with a
soft target update after each pair. The shared encoder belongs to both
optimizer groups: temporal-difference errors and the supervised
past-prediction error both shape the recurrent state.

All randomness flows from one root seed, split into independent streams
for initialization, rollouts, replay sampling, and the train/test split,
so runs are exactly reproducible.
"""

import numpy as np

from . import losses
from .env import CrowdfundingEnv
from .networks import EpsilonSchedule, PolicyNets
from .optim import clip_grad_norm, make_optimizer, soft_update
from .replay import ReplayBuffer, Trajectory


class DivergenceError(RuntimeError):
    """A loss became non-finite; carries the offending loss name."""

    def __init__(self, loss_name, value):
        super().__init__(f"non-finite {loss_name} loss: {value}")
        self.loss_name = loss_name


LOG_COLUMNS = [
    "epoch",
    "critic_loss",
    "actor_loss",
    "future_loss",
    "past_loss",
    "monotonic_loss",
    "termination_loss",
    "epsilon",
    "eval_mae",
    "eval_rmse",
    "eval_mape",
]


def rollout(campaign, nets, env, epsilon, rng, horizon, teacher_forcing=False):
    """Run one episode and package it as a trajectory.

    The first day's option comes from the epsilon-greedy selector; on
    later days the previous option is kept with its continuation
    probability and re-selected otherwise. With a single option no
    randomness is consumed at all, so single- and multi-option runs
    sharing one generator stay aligned.
    """
    if not 1 <= horizon < campaign.duration:
        raise ValueError(f"horizon {horizon} invalid for duration {campaign.duration}")
    step = env.reset(campaign)
    T = campaign.duration
    states = [step.state]
    options, actions, rewards, terminations = [], [], [], []
    option = nets.select_option(step.state, epsilon if nets.K > 1 else 0.0, rng)
    terminated = False  # whether the option entering this step is fresh
    for t in range(1, T):
        action = nets.act_np(step.state, option)
        step = env.step(action, teacher_forcing=teacher_forcing)
        options.append(option)
        actions.append(action)
        rewards.append(step.reward)
        terminations.append(terminated)
        states.append(step.state)
        terminated = False
        if not step.done and nets.K > 1:
            beta = nets.termination_prob_np(step.state, option)
            if rng.random() < 1.0 - beta:
                option = nets.select_option(step.state, epsilon, rng)
                terminated = True
    return Trajectory(
        campaign_id=campaign.id,
        static_feat=campaign.static_feat.copy(),
        fed_dynamic=env.fed_features(),
        truths=campaign.progress.copy(),
        states=np.stack(states),
        options=np.asarray(options, dtype=np.int64),
        actions=np.asarray(actions, dtype=np.float64),
        rewards=np.asarray(rewards, dtype=np.float64),
        terminations=np.asarray(terminations, dtype=bool),
        split=T - horizon,
    )


def split_train_test(campaigns, test_fraction, rng):
    """Seeded held-out split; at least one campaign lands in each side."""
    n = len(campaigns)
    if n < 2:
        return list(campaigns), []
    order = rng.permutation(n)
    n_test = max(1, int(round(test_fraction * n)))
    n_test = min(n_test, n - 1)
    test_idx = set(int(i) for i in order[:n_test])
    train = [campaigns[i] for i in range(n) if i not in test_idx]
    test = [campaigns[i] for i in range(n) if i in test_idx]
    return train, test


def _check_finite(name, value):
    if not np.isfinite(value):
        raise DivergenceError(name, value)
    return value


class Trainer:
    """Owns networks, optimizers, replay, and the epoch loop."""

    def __init__(self, campaigns, config, resume_state=None):
        self.cfg = config
        root = np.random.SeedSequence(config.seed)
        init_ss, rollout_ss, replay_ss, split_ss = root.spawn(4)
        self.rng_rollout = np.random.default_rng(rollout_ss)
        self.rng_replay = np.random.default_rng(replay_ss)
        self.train_set, self.test_set = split_train_test(
            campaigns, config.test_fraction, np.random.default_rng(split_ss)
        )
        if not self.train_set:
            raise ValueError("training set is empty")
        d_static = len(campaigns[0].static_feat)
        d_dynamic = campaigns[0].dynamic_feat.shape[1]
        self.mode = config.mode
        self.nets = PolicyNets(
            d_static=d_static,
            d_dynamic=d_dynamic,
            num_options=config.options,
            hidden_dim=config.network.hidden_dim,
            head_hidden=config.network.head_hidden,
            static_proj=config.network.static_proj,
            rng=np.random.default_rng(init_ss),
        )
        self.env = CrowdfundingEnv(
            self.nets.encoder,
            reward_sigma=config.reward_sigma,
            reward_ma_window=config.reward_ma_window,
        )
        self.replay = ReplayBuffer(config.replay_capacity)
        self.schedule = EpsilonSchedule(
            start=config.epsilon.start, floor=config.epsilon.floor, decay=config.epsilon.decay
        )
        self.weights = losses.LossWeights(
            past_error=config.weights.past_error,
            monotonic=config.weights.monotonic,
            termination=config.weights.termination,
            gamma=config.weights.gamma,
        ).validate()
        opt = config.optimizer
        critic_group = self.nets.critic_params() + self.nets.encoder_params()
        actor_group = (
            self.nets.actor_params()
            + self.nets.termination_params()
            + self.nets.encoder_params()
        )
        self.opt_critic = make_optimizer(
            critic_group, kind=opt.kind, lr=opt.lr, beta1=opt.beta1, beta2=opt.beta2, eps=opt.eps
        )
        self.opt_actor = make_optimizer(
            actor_group, kind=opt.kind, lr=opt.lr, beta1=opt.beta1, beta2=opt.beta2, eps=opt.eps
        )
        self.start_epoch = 0
        self.log_rows = []
        if resume_state is not None:
            self._load_training_state(resume_state)

    # -- state (de)hydration for resume ----------------------------------

    def training_state(self):
        return {
            "epoch": self.start_epoch,
            "rng_rollout": self.rng_rollout.bit_generator.state,
            "rng_replay": self.rng_replay.bit_generator.state,
            "opt_critic": self.opt_critic.state_dict(),
            "opt_actor": self.opt_actor.state_dict(),
        }

    def _load_training_state(self, state):
        self.start_epoch = int(state["epoch"])
        self.rng_rollout.bit_generator.state = state["rng_rollout"]
        self.rng_replay.bit_generator.state = state["rng_replay"]
        self.opt_critic.load_state_dict(state["opt_critic"])
        self.opt_actor.load_state_dict(state["opt_actor"])

    # -- loop -------------------------------------------------------------

    def _collect(self, epsilon):
        n = min(self.cfg.rollouts_per_epoch, len(self.train_set))
        picks = self.rng_rollout.permutation(len(self.train_set))[:n]
        horizons = self.cfg.horizons
        for i in picks:
            campaign = self.train_set[int(i)]
            usable = [h for h in horizons if h < campaign.duration]
            horizon = usable[int(self.rng_rollout.integers(len(usable)))]
            traj = rollout(campaign, self.nets, self.env, epsilon, self.rng_rollout, horizon)
            self.replay.push(traj)

    def _critic_step(self, batch):
        if self.mode == "tc3":
            loss = losses.critic_loss_tc3(batch, self.nets, self.weights.gamma)
        else:
            loss = losses.critic_loss_options(batch, self.nets, self.weights.gamma)
        value = _check_finite("critic", loss.item())
        self.nets.parameters().zero_grads()
        loss.backward()
        clip_grad_norm(self.opt_critic.params, self.cfg.grad_clip)
        self.opt_critic.step()
        return value

    def _actor_step(self, batch):
        total, components = losses.actor_total_loss(batch, self.nets, self.weights, self.mode)
        for name, value in components.items():
            _check_finite(f"actor.{name}", value)
        value = _check_finite("actor", total.item())
        self.nets.parameters().zero_grads()
        total.backward()
        clip_grad_norm(self.opt_actor.params, self.cfg.grad_clip)
        self.opt_actor.step()
        return value, components

    def run(self, epochs=None, progress=None):
        from .evaluation import evaluate

        epochs = self.cfg.epochs if epochs is None else epochs
        for epoch in range(self.start_epoch, epochs):
            epsilon = self.schedule.value(epoch)
            self._collect(epsilon)
            critic_vals, actor_vals = [], []
            comp_sums = {"future": 0.0, "past": 0.0, "monotonic": 0.0, "termination": 0.0}
            updates = 0
            for _ in range(self.cfg.updates_per_epoch):
                if len(self.replay) < 1:
                    break
                batch = self.replay.sample(self.cfg.batch_size, self.rng_replay)
                critic_vals.append(self._critic_step(batch))
                actor_value, components = self._actor_step(batch)
                actor_vals.append(actor_value)
                for name in comp_sums:
                    comp_sums[name] += components[name]
                self.nets.soft_update_targets(self.cfg.target_mix)
                updates += 1
            if self.test_set:
                report = evaluate(self.test_set, self.nets, self.cfg.eval_horizon)
                eval_mae, eval_rmse, eval_mape = report.mae, report.rmse, report.mape
            else:
                eval_mae = eval_rmse = eval_mape = float("nan")
            row = {
                "epoch": epoch,
                "critic_loss": float(np.mean(critic_vals)) if critic_vals else float("nan"),
                "actor_loss": float(np.mean(actor_vals)) if actor_vals else float("nan"),
                "future_loss": comp_sums["future"] / max(1, updates),
                "past_loss": comp_sums["past"] / max(1, updates),
                "monotonic_loss": comp_sums["monotonic"] / max(1, updates),
                "termination_loss": comp_sums["termination"] / max(1, updates),
                "epsilon": epsilon,
                "eval_mae": eval_mae,
                "eval_rmse": eval_rmse,
                "eval_mape": eval_mape,
            }
            self.log_rows.append(row)
            self.start_epoch = epoch + 1
            if progress is not None:
                progress(row)
        return self.log_rows


def train(campaigns, config, resume_state=None, progress=None):
    """Train on a campaign list; returns (trainer, log rows)."""
    trainer = Trainer(campaigns, config, resume_state=resume_state)
    rows = trainer.run(progress=progress)
    return trainer, rows


def write_log_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) if c != "epoch" else str(row[c]) for c in LOG_COLUMNS))
            fh.write("\n")
