import numpy as np
import pytest

from fundcast.evaluation import bucket_index, increment_shares
from fundcast.generator import GeneratorConfig, generate_campaigns


def bucket_mean_increments(campaigns):
    """Mean daily increment per funding-cycle eighth, pooled over days."""
    sums = np.zeros(8)
    counts = np.zeros(8)
    for c in campaigns:
        increments = np.diff(np.concatenate([[0.0], c.progress]))
        for t in range(c.duration):
            b = bucket_index(t + 1, c.duration)
            sums[b] += increments[t]
            counts[b] += 1
    return sums / counts


def test_noise_free_profile_is_u_shaped():
    cfg = GeneratorConfig(
        campaigns=60,
        noise=0.0,
        early_scale=2.0,
        mid_scale=0.2,
        late_scale=2.0,
        d_static=8,
        d_dynamic=6,
        seed=11,
    )
    means = bucket_mean_increments(generate_campaigns(cfg))
    assert means[0] > 2.0 * means[3]
    assert means[0] > 2.0 * means[4]
    assert means[7] > 2.0 * means[3]
    assert means[7] > 2.0 * means[4]


def test_edge_buckets_dominate_increment_share():
    cfg = GeneratorConfig(
        campaigns=100, early_scale=2.0, mid_scale=0.2, late_scale=2.0,
        d_static=8, d_dynamic=6, seed=3,
    )
    shares = increment_shares(generate_campaigns(cfg))
    assert shares[0] + shares[7] > 0.4
    assert shares.sum() == pytest.approx(1.0, abs=1e-9)


def test_progress_non_negative_and_non_decreasing():
    cfg = GeneratorConfig(campaigns=30, noise=0.8, d_static=8, d_dynamic=6, seed=7)
    for c in generate_campaigns(cfg):
        assert c.progress[0] >= 0.0
        assert np.all(np.diff(c.progress) >= 0.0)
        assert np.all(np.isfinite(c.progress))


def test_seed_determinism():
    cfg = GeneratorConfig(campaigns=10, d_static=8, d_dynamic=6, seed=21)
    a = generate_campaigns(cfg)
    b = generate_campaigns(GeneratorConfig(campaigns=10, d_static=8, d_dynamic=6, seed=21))
    for x, y in zip(a, b):
        assert x.id == y.id
        assert np.array_equal(x.static_feat, y.static_feat)
        assert np.array_equal(x.dynamic_feat, y.dynamic_feat)
        assert np.array_equal(x.progress, y.progress)


def test_different_seeds_differ():
    base = dict(campaigns=5, d_static=8, d_dynamic=6)
    a = generate_campaigns(GeneratorConfig(seed=1, **base))
    b = generate_campaigns(GeneratorConfig(seed=2, **base))
    assert not np.array_equal(a[0].progress, b[0].progress)


def test_durations_respect_bounds():
    cfg = GeneratorConfig(campaigns=50, duration_min=15, duration_max=22,
                          d_static=8, d_dynamic=6, seed=5)
    durations = [c.duration for c in generate_campaigns(cfg)]
    assert min(durations) >= 15
    assert max(durations) <= 22


def test_day_info_columns_consistent():
    cfg = GeneratorConfig(campaigns=3, d_static=8, d_dynamic=6, seed=9)
    for c in generate_campaigns(cfg):
        comment_dim = 6 - 3
        started = c.dynamic_feat[:, comment_dim]
        left = c.dynamic_feat[:, comment_dim + 1]
        assert np.allclose(started + left, 1.0)
        assert np.all(np.diff(started) > 0)
        # progress slot mirrors the true series
        assert np.array_equal(c.dynamic_feat[:, -1], c.progress)


@pytest.mark.parametrize(
    "field,value,match",
    [
        ("campaigns", 0, "campaigns"),
        ("duration_min", 10, "duration_min"),
        ("duration_max", 12, "duration_max"),
        ("mid_scale", -0.1, "mid_scale"),
        ("goal_trigger", 0.0, "goal_trigger"),
        ("goal_trigger", 1.5, "goal_trigger"),
        ("noise", -1.0, "noise"),
        ("d_dynamic", 3, "d_dynamic"),
    ],
)
def test_invalid_config_rejected(field, value, match):
    cfg = GeneratorConfig(d_static=8, d_dynamic=6)
    setattr(cfg, field, value)
    with pytest.raises(ValueError, match=match):
        cfg.validate()
