import numpy as np
import pytest

from fundcast.env import CrowdfundingEnv
from fundcast.generator import GeneratorConfig, generate_campaigns
from fundcast.networks import PolicyNets
from fundcast.training import rollout

# Small geometry keeps finite-difference sweeps fast.
TINY = dict(d_static=6, d_dynamic=5, hidden_dim=6, head_hidden=8, static_proj=3)


def tiny_nets(num_options=2, seed=0, uniform_half=False):
    nets = PolicyNets(
        d_static=TINY["d_static"],
        d_dynamic=TINY["d_dynamic"],
        num_options=num_options,
        hidden_dim=TINY["hidden_dim"],
        head_hidden=TINY["head_hidden"],
        static_proj=TINY["static_proj"],
        rng=np.random.default_rng(seed),
    )
    if uniform_half:
        rng = np.random.default_rng(seed + 10_000)
        for _, p in nets.parameters().items():
            p.data = rng.uniform(-0.5, 0.5, size=p.data.shape)
        nets.sync_targets()
    return nets


def tiny_campaigns(n=3, seed=0, duration_min=15, duration_max=18, noise=0.2):
    cfg = GeneratorConfig(
        campaigns=n,
        duration_min=duration_min,
        duration_max=duration_max,
        noise=noise,
        d_static=TINY["d_static"],
        d_dynamic=TINY["d_dynamic"],
        seed=seed,
    )
    return generate_campaigns(cfg)


def make_batch(nets, campaigns=None, seed=0, epsilon=0.4, horizon=6):
    campaigns = campaigns if campaigns is not None else tiny_campaigns(seed=seed)
    env = CrowdfundingEnv(nets.encoder)
    rng = np.random.default_rng(seed)
    return [rollout(c, nets, env, epsilon, rng, horizon=horizon) for c in campaigns]


def fd_gradcheck(loss_fn, named_params, rng, h=1e-5, rel_tol=1e-4, max_elems=4):
    """Central-difference check of backward() against re-evaluated losses.

    ``loss_fn`` must rebuild its graph from scratch on every call so that
    parameter perturbations flow into the value. Samples up to
    ``max_elems`` coordinates per tensor.
    """
    named_params = list(named_params)
    for _, p in named_params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in named_params
    }
    checked = 0
    for name, p in named_params:
        size = p.data.size
        picks = rng.choice(size, size=min(max_elems, size), replace=False)
        for i in picks:
            i = int(i)
            orig = p.data.flat[i]
            p.data.flat[i] = orig + h
            plus = loss_fn().item()
            p.data.flat[i] = orig - h
            minus = loss_fn().item()
            p.data.flat[i] = orig
            fd = (plus - minus) / (2.0 * h)
            a = analytic[name].flat[i]
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-6)
            assert rel < rel_tol, f"{name}[{i}]: analytic={a!r} fd={fd!r} rel={rel:.2e}"
            checked += 1
    return checked


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
