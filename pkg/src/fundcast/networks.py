"""Parametric pieces of the agent.

A GRU encoder turns each campaign day into a hidden state, a set of K
deterministic actor heads maps states to next-day progress estimates, K
sigmoid heads give per-option continuation probabilities, and a single
critic scores (state, option, action) triples with the option supplied
as a one-hot input block. The high-level option choice is derived from
the critic by epsilon-greedy argmax rather than learned separately.

Row-vector convention throughout: activations are (n, d) matrices, one
row per step, so heads can score a whole trajectory in one call.
"""

import math

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor


class ParameterStore:
    """Ordered name -> Tensor map with unique names."""

    def __init__(self, named):
        self._names = []
        self._by_name = {}
        for name, tensor in named:
            if name in self._by_name:
                raise ValueError(f"duplicate parameter name: {name}")
            self._names.append(name)
            self._by_name[name] = tensor

    def names(self):
        return list(self._names)

    def tensors(self):
        return [self._by_name[n] for n in self._names]

    def items(self):
        return [(n, self._by_name[n]) for n in self._names]

    def __getitem__(self, name):
        return self._by_name[name]

    def __len__(self):
        return len(self._names)

    def zero_grads(self):
        for t in self._by_name.values():
            t.grad = None

    def load_arrays(self, records):
        """Set parameter data from (name, shape, flat values) records."""
        names = set(self._names)
        seen = set()
        for name, shape, flat in records:
            if name not in names:
                raise ShapeError(f"checkpoint has unknown parameter {name!r}")
            tensor = self._by_name[name]
            arr = np.asarray(flat, dtype=np.float64)
            if tuple(shape) != tensor.data.shape or arr.size != tensor.data.size:
                raise ShapeError(
                    f"checkpoint shape {tuple(shape)} != expected {tensor.data.shape} for {name!r}"
                )
            tensor.data = arr.reshape(tensor.data.shape)
            seen.add(name)
        missing = names - seen
        if missing:
            raise ShapeError(f"checkpoint missing parameters: {sorted(missing)}")


def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(max(1, fan_in))
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _one_minus(t):
    return ad.scalar_mul(t, -1.0) + Tensor(1.0)


class GRUEncoder:
    """Recurrent state encoder over daily features.

    Static campaign features pass through a learned projection and are
    concatenated with the day's dynamic features at every step, so the
    hidden state can condition on campaign identity throughout.
    """

    def __init__(self, d_static, d_dynamic, proj_dim, hidden_dim, rng):
        self.d_static = d_static
        self.d_dynamic = d_dynamic
        self.proj_dim = proj_dim
        self.hidden_dim = hidden_dim
        d_in = proj_dim + d_dynamic
        h = hidden_dim
        self.w_proj = _uniform(rng, (d_static, proj_dim), d_static)
        self.b_proj = _uniform(rng, (proj_dim,), d_static)
        self.w_ih = _uniform(rng, (d_in, 3 * h), d_in)
        self.w_hh = _uniform(rng, (h, 3 * h), h)
        self.b_ih = _uniform(rng, (3 * h,), h)
        self.b_hh = _uniform(rng, (3 * h,), h)

    def named_params(self, prefix="encoder"):
        return [
            (f"{prefix}.w_proj", self.w_proj),
            (f"{prefix}.b_proj", self.b_proj),
            (f"{prefix}.w_ih", self.w_ih),
            (f"{prefix}.w_hh", self.w_hh),
            (f"{prefix}.b_ih", self.b_ih),
            (f"{prefix}.b_hh", self.b_hh),
        ]

    def initial_state(self):
        return Tensor(np.zeros((1, self.hidden_dim)))

    def project_static(self, static_row):
        if static_row.shape != (1, self.d_static):
            raise ShapeError(
                f"project_static: expected (1, {self.d_static}), got {static_row.shape}"
            )
        return ad.matmul(static_row, self.w_proj) + self.b_proj

    def step(self, hidden, x):
        """One recurrence step; x is the (1, proj+dynamic) input row."""
        h = self.hidden_dim
        if x.shape != (1, self.proj_dim + self.d_dynamic):
            raise ShapeError(
                f"step: expected input (1, {self.proj_dim + self.d_dynamic}), got {x.shape}"
            )
        gi = ad.matmul(x, self.w_ih) + self.b_ih
        gh = ad.matmul(hidden, self.w_hh) + self.b_hh
        reset = ad.sigmoid(ad.slice_axis(gi, 0, h, axis=1) + ad.slice_axis(gh, 0, h, axis=1))
        update = ad.sigmoid(
            ad.slice_axis(gi, h, 2 * h, axis=1) + ad.slice_axis(gh, h, 2 * h, axis=1)
        )
        cand = ad.tanh(
            ad.slice_axis(gi, 2 * h, 3 * h, axis=1)
            + ad.mul(reset, ad.slice_axis(gh, 2 * h, 3 * h, axis=1))
        )
        return ad.mul(_one_minus(update), cand) + ad.mul(update, hidden)

    def encode_step(self, hidden, static_feat, dynamic_feat):
        """Advance the state with one day of raw features."""
        static_row = static_feat if isinstance(static_feat, Tensor) else Tensor(static_feat)
        dyn_row = dynamic_feat if isinstance(dynamic_feat, Tensor) else Tensor(dynamic_feat)
        if static_row.data.ndim == 1:
            static_row = Tensor(static_row.data.reshape(1, -1))
        if dyn_row.data.ndim == 1:
            dyn_row = Tensor(dyn_row.data.reshape(1, -1))
        if dyn_row.shape != (1, self.d_dynamic):
            raise ShapeError(
                f"encode_step: expected dynamic (1, {self.d_dynamic}), got {dyn_row.shape}"
            )
        x = ad.concat([self.project_static(static_row), dyn_row], axis=1)
        return self.step(hidden, x)

    def run(self, static_feat, dynamic_rows):
        """Encode a full day sequence; returns the list [h_1 .. h_T]."""
        static_proj = self.project_static(Tensor(np.asarray(static_feat).reshape(1, -1)))
        hidden = self.initial_state()
        states = []
        for row in np.asarray(dynamic_rows, dtype=np.float64):
            x = ad.concat([static_proj, Tensor(row.reshape(1, -1))], axis=1)
            hidden = self.step(hidden, x)
            states.append(hidden)
        return states


class MLPHead:
    """Two-layer relu head with a configurable output transform."""

    def __init__(self, d_in, hidden_dim, out_transform, rng):
        if out_transform not in ("linear", "softplus", "sigmoid"):
            raise ValueError(f"unknown output transform: {out_transform!r}")
        self.d_in = d_in
        self.out_transform = out_transform
        self.w1 = _uniform(rng, (d_in, hidden_dim), d_in)
        self.b1 = _uniform(rng, (hidden_dim,), d_in)
        self.w2 = _uniform(rng, (hidden_dim, 1), hidden_dim)
        self.b2 = _uniform(rng, (1,), hidden_dim)

    def named_params(self, prefix):
        return [
            (f"{prefix}.w1", self.w1),
            (f"{prefix}.b1", self.b1),
            (f"{prefix}.w2", self.w2),
            (f"{prefix}.b2", self.b2),
        ]

    def apply(self, x, frozen=False):
        """Score (n, d_in) rows; frozen=True detaches the weights so the
        head's parameters receive no gradient while inputs still do."""
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"head: expected input width {self.d_in}, got {x.shape}")
        w1, b1, w2, b2 = self.w1, self.b1, self.w2, self.b2
        if frozen:
            w1, b1, w2, b2 = w1.detach(), b1.detach(), w2.detach(), b2.detach()
        hidden = ad.relu(ad.matmul(x, w1) + b1)
        out = ad.matmul(hidden, w2) + b2
        if self.out_transform == "softplus":
            return ad.softplus(out)
        if self.out_transform == "sigmoid":
            return ad.sigmoid(out)
        return out

    def apply_np(self, x):
        with ad.no_grad():
            return self.apply(Tensor(np.asarray(x, dtype=np.float64))).data

    def copy_from(self, other):
        self.w1.data = other.w1.data.copy()
        self.b1.data = other.b1.data.copy()
        self.w2.data = other.w2.data.copy()
        self.b2.data = other.b2.data.copy()


class EpsilonSchedule:
    """Exponentially decaying exploration rate with a floor."""

    def __init__(self, start=0.5, floor=0.05, decay=0.995):
        if not 0.0 <= floor <= start <= 1.0:
            raise ValueError(f"invalid epsilon schedule: start={start}, floor={floor}")
        if not 0.0 < decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {decay}")
        self.start = start
        self.floor = floor
        self.decay = decay

    def value(self, episode):
        return max(self.floor, self.start * self.decay**episode)


class PolicyNets:
    """Encoder, K option actors, K continuation heads, critic, and the
    target copies of everything except the encoder."""

    def __init__(
        self,
        d_static,
        d_dynamic,
        num_options,
        hidden_dim=64,
        head_hidden=64,
        static_proj=16,
        rng=None,
    ):
        if num_options < 1:
            raise ValueError(f"option count must be >= 1, got {num_options}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.K = num_options
        self.d_static = d_static
        self.d_dynamic = d_dynamic
        self.hidden_dim = hidden_dim
        self.head_hidden = head_hidden
        self.static_proj = static_proj
        self.encoder = GRUEncoder(d_static, d_dynamic, static_proj, hidden_dim, rng)
        self.actors = [MLPHead(hidden_dim, head_hidden, "softplus", rng) for _ in range(self.K)]
        self.terminations = [
            MLPHead(hidden_dim, head_hidden, "sigmoid", rng) for _ in range(self.K)
        ]
        self.critic = MLPHead(hidden_dim + self.K + 1, head_hidden, "linear", rng)
        self.target_actors = [
            MLPHead(hidden_dim, head_hidden, "softplus", rng) for _ in range(self.K)
        ]
        self.target_terminations = [
            MLPHead(hidden_dim, head_hidden, "sigmoid", rng) for _ in range(self.K)
        ]
        self.target_critic = MLPHead(hidden_dim + self.K + 1, head_hidden, "linear", rng)
        self.sync_targets()

    # -- parameter bookkeeping ------------------------------------------

    def parameters(self):
        named = self.encoder.named_params("encoder")
        for k, head in enumerate(self.actors):
            named += head.named_params(f"actor.{k}")
        for k, head in enumerate(self.terminations):
            named += head.named_params(f"termination.{k}")
        named += self.critic.named_params("critic")
        return ParameterStore(named)

    def target_parameters(self):
        named = []
        for k, head in enumerate(self.target_actors):
            named += head.named_params(f"actor.{k}")
        for k, head in enumerate(self.target_terminations):
            named += head.named_params(f"termination.{k}")
        named += self.target_critic.named_params("critic")
        return ParameterStore(named)

    def online_head_parameters(self):
        """Online counterparts of the target store, in matching order."""
        named = []
        for k, head in enumerate(self.actors):
            named += head.named_params(f"actor.{k}")
        for k, head in enumerate(self.terminations):
            named += head.named_params(f"termination.{k}")
        named += self.critic.named_params("critic")
        return ParameterStore(named)

    def encoder_params(self):
        return [t for _, t in self.encoder.named_params()]

    def actor_params(self):
        return [t for head in self.actors for _, t in head.named_params("a")]

    def termination_params(self):
        return [t for head in self.terminations for _, t in head.named_params("t")]

    def critic_params(self):
        return [t for _, t in self.critic.named_params("c")]

    def sync_targets(self):
        for tgt, src in zip(self.target_actors, self.actors):
            tgt.copy_from(src)
        for tgt, src in zip(self.target_terminations, self.terminations):
            tgt.copy_from(src)
        self.target_critic.copy_from(self.critic)

    # -- head application -----------------------------------------------

    def _check_option(self, option):
        arr = np.atleast_1d(np.asarray(option))
        if arr.min() < 0 or arr.max() >= self.K:
            raise ValueError(f"option id out of range [0, {self.K}): {option}")

    def _one_hot(self, options, n):
        onehot = np.zeros((n, self.K))
        onehot[np.arange(n), np.asarray(options, dtype=int)] = 1.0
        return onehot

    def _per_option(self, heads, states, options, frozen=False):
        """Masked sum over per-option head outputs; rows taken under
        option k receive exactly head k's output and gradients."""
        self._check_option(options)
        n = states.shape[0]
        options = np.broadcast_to(np.asarray(options, dtype=int), (n,))
        if self.K == 1:
            return heads[0].apply(states, frozen=frozen)
        out = None
        for k in range(self.K):
            mask = Tensor((options == k).astype(np.float64).reshape(n, 1))
            piece = ad.mul(heads[k].apply(states, frozen=frozen), mask)
            out = piece if out is None else out + piece
        return out

    def act(self, states, option, target=False, frozen=False):
        """Deterministic next-day progress estimate(s), always >= 0."""
        heads = self.target_actors if target else self.actors
        return self._per_option(heads, states, option, frozen=frozen)

    def termination_prob(self, states, option, target=False, frozen=False):
        """Continuation probability in (0, 1) for the given option."""
        heads = self.target_terminations if target else self.terminations
        return self._per_option(heads, states, option, frozen=frozen)

    def critic_value(self, states, option, actions, target=False, frozen=False):
        """Q score of (state, option, action) rows; option enters one-hot."""
        self._check_option(option)
        n = states.shape[0]
        options = np.broadcast_to(np.asarray(option, dtype=int), (n,))
        if isinstance(actions, Tensor):
            act_col = actions
        else:
            act_col = Tensor(np.asarray(actions, dtype=np.float64).reshape(n, 1))
        head = self.target_critic if target else self.critic
        x = ad.concat([states, Tensor(self._one_hot(options, n)), act_col], axis=1)
        return head.apply(x, frozen=frozen)

    # -- numpy fast paths (no graph) --------------------------------------

    def act_np(self, state, option, target=False):
        with ad.no_grad():
            row = Tensor(np.asarray(state, dtype=np.float64).reshape(1, -1))
            return float(self.act(row, option, target=target).data[0, 0])

    def termination_prob_np(self, state, option, target=False):
        with ad.no_grad():
            row = Tensor(np.asarray(state, dtype=np.float64).reshape(1, -1))
            return float(self.termination_prob(row, option, target=target).data[0, 0])

    def option_values_np(self, states, target=False):
        """Q(s, k, mu_k(s)) for every option k; returns (n, K)."""
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states.reshape(1, -1)
        n = states.shape[0]
        out = np.empty((n, self.K))
        with ad.no_grad():
            rows = Tensor(states)
            for k in range(self.K):
                acts = self.act(rows, k, target=target)
                out[:, k] = self.critic_value(rows, k, acts, target=target).data[:, 0]
        return out

    def select_option(self, state, epsilon, rng=None):
        """Epsilon-greedy argmax of Q(s, k, mu_k(s)); ties go to the lowest
        option id. K == 1 returns 0 without consuming randomness."""
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        if self.K == 1:
            return 0
        if epsilon > 0.0:
            if rng is None:
                raise ValueError("select_option: rng required when epsilon > 0")
            if rng.random() < epsilon:
                return int(rng.integers(self.K))
        values = self.option_values_np(np.asarray(state).reshape(1, -1))[0]
        return int(np.argmax(values))

    def encode_trajectory(self, traj):
        """Graph-connected states h_1..h_T from a stored trajectory's
        static features and as-fed dynamic rows."""
        return self.encoder.run(traj.static_feat, traj.fed_dynamic)

    def soft_update_targets(self, mix):
        from .optim import soft_update

        soft_update(
            self.target_parameters().tensors(),
            self.online_head_parameters().tensors(),
            mix,
        )
