import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TINY, tiny_campaigns, tiny_nets

from fundcast.env import (
    Campaign,
    CrowdfundingEnv,
    PROGRESS_SLOT,
    load_dataset,
    reward_kernel,
    save_dataset,
)


def test_reward_exact_prediction_is_one():
    assert reward_kernel(0.37, 0.37) == 1.0


def test_reward_one_sigma_closed_form():
    assert reward_kernel(0.2, 0.3, sigma=0.1) == pytest.approx(math.exp(-0.5), abs=1e-15)


def test_reward_strictly_decreasing_on_grid():
    errors = np.linspace(0.0, 1.0, 10_001)
    values = [reward_kernel(e, 0.0) for e in errors]
    for a, b in zip(values[:-1], values[1:]):
        assert b < a
    assert values[0] == 1.0


@given(
    action_millis=st.integers(0, 1500),
    truth_millis=st.integers(1, 1500),
)
@settings(max_examples=200, deadline=None)
def test_reward_bounds_and_symmetry(action_millis, truth_millis):
    # grid of 1e-3 steps keeps the kernel away from fp rounding at 1.0
    action = action_millis / 1000.0
    truth = truth_millis / 1000.0
    r = reward_kernel(action, truth)
    assert 0.0 < r <= 1.0
    assert (r == 1.0) == (action == truth)
    mirrored = reward_kernel(2 * truth - action, truth)
    assert r == pytest.approx(mirrored, rel=1e-12)


def test_reward_rejects_negative_truth():
    with pytest.raises(ValueError):
        reward_kernel(0.1, -0.5)


def make_env(seed=0):
    nets = tiny_nets(seed=seed)
    return CrowdfundingEnv(nets.encoder), nets


def test_reset_starts_at_day_one():
    env, _ = make_env()
    camp = tiny_campaigns(n=1)[0]
    step = env.reset(camp)
    assert step.t == 1
    assert step.reward == 0.0
    assert not step.done


def test_reset_is_idempotent():
    env, _ = make_env()
    camp = tiny_campaigns(n=1)[0]
    s1 = env.reset(camp).state
    env.step(0.3)
    env.step(0.4)
    s2 = env.reset(camp).state
    assert np.array_equal(s1, s2)


def test_reset_clears_state_across_campaigns():
    env, nets = make_env()
    a, b = tiny_campaigns(n=2, seed=3)
    env.reset(a)
    for _ in range(4):
        env.step(0.2)
    after_other = env.reset(b).state
    fresh = CrowdfundingEnv(nets.encoder).reset(b).state
    assert np.array_equal(after_other, fresh)


def test_episode_emits_exactly_duration_minus_one_rewards():
    env, _ = make_env()
    camp = tiny_campaigns(n=1)[0]
    env.reset(camp)
    rewards = []
    done = False
    while not done:
        step = env.step(0.1)
        rewards.append(step.reward)
        done = step.done
    assert len(rewards) == camp.duration - 1
    assert step.t == camp.duration


def test_step_after_done_raises():
    env, _ = make_env()
    camp = tiny_campaigns(n=1)[0]
    env.reset(camp)
    for _ in range(camp.duration - 1):
        env.step(0.1)
    with pytest.raises(RuntimeError):
        env.step(0.1)


def test_perfect_action_earns_max_reward():
    env, _ = make_env()
    camp = tiny_campaigns(n=1)[0]
    env.reset(camp)
    step = env.step(float(camp.progress[1]))
    assert step.reward == 1.0


def test_teacher_forcing_differs_only_in_progress_slot():
    camp = tiny_campaigns(n=1, seed=8)[0]
    env_self, nets = make_env(seed=4)
    env_forced = CrowdfundingEnv(nets.encoder)
    env_self.reset(camp)
    env_forced.reset(camp)
    action = float(camp.progress[1]) + 0.25
    env_self.step(action, teacher_forcing=False)
    env_forced.step(action, teacher_forcing=True)
    fed_self = env_self.fed_features()
    fed_forced = env_forced.fed_features()
    diff = fed_self[1] != fed_forced[1]
    assert diff.sum() == 1
    assert diff[PROGRESS_SLOT]
    assert fed_self[1, PROGRESS_SLOT] == action
    assert fed_forced[1, PROGRESS_SLOT] == camp.progress[1]


def test_teacher_forced_states_match_direct_encoding():
    # with self-feeding off the env must reproduce a plain encode of the data
    camp = tiny_campaigns(n=1, seed=12)[0]
    env, nets = make_env(seed=5)
    step = env.reset(camp)
    env_states = [step.state]
    while not step.done:
        step = env.step(0.9, teacher_forcing=True)
        env_states.append(step.state)
    direct = nets.encoder.run(camp.static_feat, camp.dynamic_feat)
    assert len(env_states) == len(direct)
    for got, want in zip(env_states, direct):
        assert np.array_equal(got, want.data[0])


def test_moving_average_reward_window():
    camp = tiny_campaigns(n=1, seed=2)[0]
    nets = tiny_nets(seed=2)
    env = CrowdfundingEnv(nets.encoder, reward_ma_window=2)
    env.reset(camp)
    r1 = env.step(float(camp.progress[1])).reward
    raw2 = reward_kernel(0.0, float(camp.progress[2]))
    r2 = env.step(0.0).reward
    assert r1 == 1.0
    assert r2 == pytest.approx((1.0 + raw2) / 2)


def test_campaign_validation_rejects_decreasing_progress():
    with pytest.raises(ValueError, match="non-decreasing"):
        Campaign(
            id="bad",
            static_feat=np.zeros(3),
            dynamic_feat=np.zeros((3, 4)),
            progress=np.array([0.2, 0.1, 0.3]),
        )


def test_campaign_validation_rejects_length_mismatch():
    with pytest.raises(ValueError, match="rows"):
        Campaign(
            id="bad",
            static_feat=np.zeros(3),
            dynamic_feat=np.zeros((2, 4)),
            progress=np.array([0.1, 0.2, 0.3]),
        )


def test_dataset_round_trip(tmp_path):
    camps = tiny_campaigns(n=4, seed=6)
    path = tmp_path / "data.jsonl"
    save_dataset(path, camps)
    loaded, header = load_dataset(path)
    assert header["format_version"] == 1
    assert header["campaign_count"] == 4
    assert header["d_static"] == TINY["d_static"]
    assert len(loaded) == 4
    for a, b in zip(camps, loaded):
        assert a.id == b.id
        assert np.array_equal(a.static_feat, b.static_feat)
        assert np.array_equal(a.dynamic_feat, b.dynamic_feat)
        assert np.array_equal(a.progress, b.progress)


def test_dataset_rejects_bad_version(tmp_path):
    path = tmp_path / "data.jsonl"
    path.write_text('{"format_version": 99, "campaign_count": 0}\n')
    with pytest.raises(ValueError, match="version"):
        load_dataset(path)
