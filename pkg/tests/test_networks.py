import numpy as np
import pytest

from conftest import TINY, fd_gradcheck, tiny_campaigns, tiny_nets

from fundcast import autodiff as ad
from fundcast.autodiff import ShapeError, Tensor
from fundcast.networks import EpsilonSchedule, GRUEncoder, ParameterStore, PolicyNets
from fundcast.optim import Adam


def zeroed(nets):
    for _, p in nets.parameters().items():
        p.data[:] = 0.0
    nets.sync_targets()
    return nets


def test_zero_weight_encoder_keeps_zero_state(rng):
    nets = zeroed(tiny_nets())
    h = nets.encoder.initial_state()
    for _ in range(5):
        h = nets.encoder.encode_step(h, rng.normal(size=TINY["d_static"]),
                                     rng.normal(size=TINY["d_dynamic"]))
    assert np.array_equal(h.data, np.zeros((1, TINY["hidden_dim"])))


def test_encoder_golden_hidden_vector():
    # pinned from a seeded run of this implementation
    enc = GRUEncoder(d_static=6, d_dynamic=5, proj_dim=3, hidden_dim=4,
                     rng=np.random.default_rng(77))
    static = np.linspace(-0.5, 0.5, 6)
    dyn = np.stack([np.linspace(0.1, 0.5, 5), np.linspace(-0.2, 0.2, 5), np.full(5, 0.3)])
    h = enc.run(static, dyn)[-1].data[0]
    golden = np.array([
        0.17197011650452043,
        0.5647011369900348,
        -0.1246379365281531,
        -0.03971066087684949,
    ])
    assert np.allclose(h, golden, rtol=0, atol=1e-15)


def test_identical_campaigns_give_identical_states():
    camp = tiny_campaigns(n=1, seed=5)[0]
    nets = tiny_nets(seed=2)
    s1 = [h.data.copy() for h in nets.encoder.run(camp.static_feat, camp.dynamic_feat)]
    s2 = [h.data.copy() for h in nets.encoder.run(camp.static_feat, camp.dynamic_feat)]
    for a, b in zip(s1, s2):
        assert np.array_equal(a, b)


def test_hidden_state_stays_in_open_unit_interval():
    camp = tiny_campaigns(n=1, seed=9)[0]
    nets = tiny_nets(seed=3)
    for h in nets.encoder.run(camp.static_feat, camp.dynamic_feat):
        assert np.all(np.abs(h.data) < 1.0)


def test_encoder_causality_by_truncation():
    camp = tiny_campaigns(n=1, seed=4)[0]
    nets = tiny_nets(seed=1)
    full = nets.encoder.run(camp.static_feat, camp.dynamic_feat)
    for t in (1, 3, 7):
        trunc = nets.encoder.run(camp.static_feat, camp.dynamic_feat[:t])
        assert np.array_equal(full[t - 1].data, trunc[-1].data)


def test_encode_step_width_mismatch():
    nets = tiny_nets()
    with pytest.raises(ShapeError):
        nets.encoder.encode_step(
            nets.encoder.initial_state(),
            np.zeros(TINY["d_static"]),
            np.zeros(TINY["d_dynamic"] + 1),
        )


def test_zero_weight_actor_outputs_softplus_of_zero():
    nets = zeroed(tiny_nets())
    action = nets.act_np(np.zeros(TINY["hidden_dim"]), 0)
    assert action == pytest.approx(np.log(2.0), abs=1e-12)


def test_action_non_negative_and_deterministic(rng):
    nets = tiny_nets(seed=8)
    state = rng.normal(size=TINY["hidden_dim"])
    a1 = nets.act_np(state, 1)
    a2 = nets.act_np(state, 1)
    assert a1 >= 0.0
    assert a1 == a2


def test_single_option_act_ignores_option_argument(rng):
    nets = tiny_nets(num_options=1)
    state = rng.normal(size=TINY["hidden_dim"])
    assert nets.act_np(state, 0) == nets.act_np(state, 0)
    with pytest.raises(ValueError):
        nets.act_np(state, 1)


def test_invalid_option_ids_rejected(rng):
    nets = tiny_nets(num_options=2)
    state = rng.normal(size=TINY["hidden_dim"])
    for bad in (-1, 2, 7):
        with pytest.raises(ValueError):
            nets.act_np(state, bad)
        with pytest.raises(ValueError):
            nets.termination_prob_np(state, bad)


def test_zero_weight_critic_is_zero(rng):
    nets = zeroed(tiny_nets())
    row = Tensor(rng.normal(size=(1, TINY["hidden_dim"])))
    q = nets.critic_value(row, 1, np.array([0.7]))
    assert q.data[0, 0] == 0.0


def test_critic_action_gradient_matches_finite_difference(rng):
    nets = tiny_nets(seed=6, uniform_half=True)
    state = rng.normal(size=(1, TINY["hidden_dim"]))
    a0 = 0.4
    h = 1e-5

    def q_of(a):
        with ad.no_grad():
            return nets.critic_value(Tensor(state), 0, np.array([a])).item()

    action = Tensor(np.array([[a0]]), requires_grad=True)
    q = nets.critic_value(Tensor(state), 0, action)
    q.backward()
    fd = (q_of(a0 + h) - q_of(a0 - h)) / (2 * h)
    rel = abs(action.grad[0, 0] - fd) / max(abs(fd), 1e-6)
    assert rel < 1e-4


def test_termination_zero_weights_is_half(rng):
    nets = zeroed(tiny_nets())
    assert nets.termination_prob_np(rng.normal(size=TINY["hidden_dim"]), 0) == 0.5


def test_termination_strictly_inside_unit_interval(rng):
    nets = tiny_nets(seed=11)
    for _ in range(20):
        beta = nets.termination_prob_np(rng.normal(size=TINY["hidden_dim"]) * 5, 1)
        assert 0.0 < beta < 1.0


def test_select_option_greedy_argmax(monkeypatch, rng):
    nets = tiny_nets(num_options=2)
    monkeypatch.setattr(
        nets, "option_values_np", lambda s, target=False: np.array([[0.2, 0.7]])
    )
    assert nets.select_option(rng.normal(size=TINY["hidden_dim"]), 0.0) == 1


def test_select_option_tie_breaks_to_lowest_id(monkeypatch, rng):
    nets = tiny_nets(num_options=3)
    monkeypatch.setattr(
        nets, "option_values_np", lambda s, target=False: np.array([[0.5, 0.5, 0.1]])
    )
    assert nets.select_option(rng.normal(size=TINY["hidden_dim"]), 0.0) == 0


def test_select_option_epsilon_one_is_uniform(rng):
    nets = tiny_nets(num_options=4)
    state = rng.normal(size=TINY["hidden_dim"])
    draws = np.array([nets.select_option(state, 1.0, rng) for _ in range(10_000)])
    counts = np.bincount(draws, minlength=4)
    expected = 2500.0
    chi2 = ((counts - expected) ** 2 / expected).sum()
    # chi-square critical value, 3 dof, alpha = 0.001
    assert chi2 < 16.266


def test_select_option_single_option_is_zero_without_rng():
    nets = tiny_nets(num_options=1)
    assert nets.select_option(np.zeros(TINY["hidden_dim"]), 0.7, rng=None) == 0


def test_critic_output_scaling_preserves_argmax(rng):
    nets = tiny_nets(seed=13)
    state = rng.normal(size=(1, TINY["hidden_dim"]))
    q_before = nets.option_values_np(state)
    c = 3.7
    nets.critic.w2.data *= c
    nets.critic.b2.data *= c
    q_after = nets.option_values_np(state)
    assert np.allclose(q_after, c * q_before, rtol=1e-12)
    assert np.argmax(q_after[0]) == np.argmax(q_before[0])


def test_target_outputs_fixed_until_soft_update(rng):
    nets = tiny_nets(seed=21)
    state = rng.normal(size=(1, TINY["hidden_dim"]))
    before = nets.option_values_np(state, target=True).copy()
    opt = Adam(nets.online_head_parameters().tensors(), lr=0.05)
    for p in opt.params:
        p.grad = rng.normal(size=p.data.shape)
    opt.step()
    assert np.array_equal(nets.option_values_np(state, target=True), before)
    nets.soft_update_targets(0.5)
    assert not np.array_equal(nets.option_values_np(state, target=True), before)


def test_parameter_store_rejects_duplicates():
    t = Tensor([0.0])
    with pytest.raises(ValueError):
        ParameterStore([("a", t), ("a", t)])


def test_online_and_target_stores_are_shape_isomorphic():
    nets = tiny_nets(num_options=3)
    online = nets.online_head_parameters()
    target = nets.target_parameters()
    assert online.names() == target.names()
    for (_, a), (_, b) in zip(online.items(), target.items()):
        assert a.data.shape == b.data.shape


def test_epsilon_schedule_monotone_and_floored():
    sched = EpsilonSchedule(start=0.5, floor=0.05, decay=0.995)
    values = [sched.value(e) for e in range(2000)]
    assert values[0] == 0.5
    for a, b in zip(values[:-1], values[1:]):
        assert b <= a
    assert min(values) == 0.05


def test_encoder_gradients_flow_through_time():
    camp = tiny_campaigns(n=1, seed=14)[0]
    nets = tiny_nets(seed=15)
    states = nets.encoder.run(camp.static_feat, camp.dynamic_feat)
    ad.mean(ad.square(states[-1])).backward()
    assert nets.encoder.w_ih.grad is not None
    assert np.abs(nets.encoder.w_hh.grad).sum() > 0


def test_encode_step_matches_run(rng):
    nets = tiny_nets(seed=16)
    camp = tiny_campaigns(n=1, seed=16)[0]
    via_run = nets.encoder.run(camp.static_feat, camp.dynamic_feat[:3])
    h = nets.encoder.initial_state()
    for t in range(3):
        h = nets.encoder.encode_step(h, camp.static_feat, camp.dynamic_feat[t])
    assert np.array_equal(h.data, via_run[-1].data)
