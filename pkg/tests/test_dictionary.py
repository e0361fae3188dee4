import math

import numpy as np
import pytest

from bandit_lab.dictionary import (
    Dictionary,
    KorsParams,
    kors_step,
    leverage_score,
    projection_error,
    rebuild_dictionary,
)
from bandit_lab.kernels import KernelSpec, StatePoint, evaluate, gram

GAUSS = KernelSpec("gaussian", bandwidth=0.4)


def random_state(rng, ctx_dim=2):
    return StatePoint(rng.uniform(size=ctx_dim), rng.uniform(size=1))


def dense_score_oracle(d, s, params, spec):
    """Augmented-dictionary estimator computed the slow, literal way:
    append s at weight one, scale by inclusion probabilities, solve densely."""
    zs = d.anchors + [s]
    k = gram(spec, zs, zs)
    scale = np.diag(1.0 / np.sqrt(np.array(list(d.probs) + [1.0])))
    v = scale @ gram(spec, zs, [s])[:, 0]
    inner = scale @ k @ scale + params.mu * np.eye(len(zs))
    q = float(v @ np.linalg.solve(inner, v))
    return (1.0 + params.epsilon) / params.mu * (evaluate(spec, s, s) - q)


def grown_dictionary(seed, n, mu=1.0, gamma=3.0):
    rng = np.random.default_rng(seed)
    d = Dictionary(mu=mu, rng=np.random.default_rng(seed + 1000))
    params = KorsParams(mu=mu, gamma=gamma)
    history = []
    for t in range(n):
        s = random_state(rng)
        history.append(s)
        kors_step(d, t, s, params, GAUSS)
    return d, history, params


def test_empty_dictionary_score_hand_value():
    # gaussian k(s,s)=1, mu=1, eps=0.5: 1.5 * 1 / (1 + 1) = 0.75
    d = Dictionary(mu=1.0, rng=np.random.default_rng(0))
    params = KorsParams(mu=1.0)
    s = random_state(np.random.default_rng(1))
    assert leverage_score(d, s, params, GAUSS) == pytest.approx(0.75, abs=1e-12)


def test_leverage_score_matches_dense_oracle():
    rng = np.random.default_rng(2)
    d, _, params = grown_dictionary(3, 8)
    for _ in range(20):
        s = random_state(rng)
        mine = leverage_score(d, s, params, GAUSS)
        assert mine == pytest.approx(dense_score_oracle(d, s, params, GAUSS), abs=1e-8)


def test_score_of_duplicate_anchor_vanishes_at_large_mu():
    rng = np.random.default_rng(3)
    s = random_state(rng)
    for mu in (1.0, 10.0, 100.0):
        d = Dictionary(mu=mu, rng=np.random.default_rng(4))
        d.seed(GAUSS, s)
        score = leverage_score(d, s, KorsParams(mu=mu), GAUSS)
        # an exactly represented point: tau = 1.5 k / (2k + mu) -> 0 as mu grows
        assert score == pytest.approx(1.5 / (2.0 + mu), abs=1e-10)
    assert leverage_score(
        d, s, KorsParams(mu=100.0), GAUSS
    ) < 0.02


def test_forced_inclusion_admits_everything():
    rng = np.random.default_rng(5)
    d = Dictionary(mu=1.0, rng=np.random.default_rng(6))
    params = KorsParams(mu=1.0, gamma=math.inf)
    for t in range(30):
        assert kors_step(d, t, random_state(rng), params, GAUSS)
    assert d.size == 30
    assert d.steps == list(range(30))
    assert all(p == 1.0 for p in d.probs)


def test_duplicate_candidate_rejected_not_added():
    d = Dictionary(mu=1.0, rng=np.random.default_rng(7))
    params = KorsParams(mu=1.0, gamma=math.inf)
    s = random_state(np.random.default_rng(8))
    assert kors_step(d, 0, s, params, GAUSS)
    assert not kors_step(d, 1, s, params, GAUSS)
    assert d.size == 1
    assert d.rejected_duplicates == 1


def test_same_seed_same_dictionary():
    a, _, _ = grown_dictionary(11, 60)
    b, _, _ = grown_dictionary(11, 60)
    assert a.size == b.size
    assert a.steps == b.steps
    assert np.allclose(a.probs, b.probs)
    assert np.allclose(a.packed, b.packed)


def test_one_coin_flip_per_step_keeps_streams_aligned():
    # two dictionaries sharing an rng seed but scoring different points must
    # consume the uniform stream at the same rate
    rng_pts = np.random.default_rng(12)
    a = Dictionary(mu=1.0, rng=np.random.default_rng(13))
    b = Dictionary(mu=1.0, rng=np.random.default_rng(13))
    slow = KorsParams(mu=1.0, gamma=0.05)  # mostly rejects
    fast = KorsParams(mu=1.0, gamma=math.inf)  # always admits
    for t in range(25):
        kors_step(a, t, random_state(rng_pts), slow, GAUSS)
        kors_step(b, t, random_state(rng_pts), fast, GAUSS)
    assert float(a.rng.uniform()) == pytest.approx(float(b.rng.uniform()), abs=0.0)


def test_anchors_grow_monotonically():
    rng = np.random.default_rng(14)
    d = Dictionary(mu=1.0, rng=np.random.default_rng(15))
    params = KorsParams(mu=1.0, gamma=2.0)
    seen = []
    for t in range(50):
        kors_step(d, t, random_state(rng), params, GAUSS)
        assert d.size >= len(seen)
        assert d.anchors[: len(seen)] == seen  # prefix preserved, never reordered
        seen = list(d.anchors)


def test_leverage_score_invariant_to_anchor_order():
    d, _, params = grown_dictionary(16, 25, gamma=5.0)
    order = np.random.default_rng(17).permutation(d.size)
    shuffled = rebuild_dictionary(
        [d.anchors[i] for i in order],
        np.array(d.probs)[order],
        [d.steps[i] for i in order],
        d.mu,
        GAUSS,
        np.random.default_rng(18),
    )
    assert shuffled.size == d.size
    rng = np.random.default_rng(19)
    for _ in range(10):
        s = random_state(rng)
        assert leverage_score(d, s, params, GAUSS) == pytest.approx(
            leverage_score(shuffled, s, params, GAUSS), abs=1e-9
        )


def test_dictionary_size_shrinks_with_mu():
    # moderate budget so probabilities are not saturated at 1
    sizes = {}
    for mu in (0.1, 1.0, 10.0):
        acc = []
        for seed in range(20):
            rng = np.random.default_rng(200 + seed)
            d = Dictionary(mu=mu, rng=np.random.default_rng(300 + seed))
            params = KorsParams(mu=mu, gamma=5.0)
            for t in range(120):
                kors_step(d, t, random_state(rng), params, GAUSS)
            acc.append(d.size)
        sizes[mu] = float(np.mean(acc))
    assert sizes[1.0] <= sizes[0.1]
    assert sizes[10.0] <= sizes[1.0]


def test_projection_error_full_dictionary_is_zero():
    d, history, _ = grown_dictionary(20, 25, gamma=math.inf)
    assert d.size == len(history)
    assert projection_error(d, history, GAUSS) <= 1e-8


def test_projection_error_empty_dictionary_is_gram_top_eigenvalue():
    rng = np.random.default_rng(21)
    history = [random_state(rng) for _ in range(12)]
    d = Dictionary(mu=1.0, rng=np.random.default_rng(22))
    k = gram(GAUSS, history, history)
    want = float(np.linalg.eigvalsh(k)[-1])
    assert projection_error(d, history, GAUSS) == pytest.approx(want, rel=1e-10)
    assert projection_error(d, [], GAUSS) == 0.0


def test_projection_error_stays_below_mu_with_theory_budget():
    # the sampler's whole guarantee, checked in the small
    horizon = 80
    failures = 0
    for seed in range(20):
        rng = np.random.default_rng(400 + seed)
        d = Dictionary(mu=1.0, rng=np.random.default_rng(500 + seed))
        params = KorsParams.theory_default(horizon, mu=1.0)
        history = []
        for t in range(horizon):
            s = random_state(rng)
            history.append(s)
            kors_step(d, t, s, params, GAUSS)
        if projection_error(d, history, GAUSS) > 1.0:
            failures += 1
    assert failures <= 1


def test_mu_mismatch_rejected():
    d = Dictionary(mu=1.0, rng=np.random.default_rng(23))
    s = random_state(np.random.default_rng(24))
    with pytest.raises(ValueError):
        leverage_score(d, s, KorsParams(mu=2.0), GAUSS)


def test_params_validation():
    with pytest.raises(ValueError):
        KorsParams(mu=0.0)
    with pytest.raises(ValueError):
        KorsParams(mu=1.0, epsilon=0.0)
    with pytest.raises(ValueError):
        KorsParams(mu=1.0, gamma=0.0)
    defaults = KorsParams.theory_default(100, mu=2.0)
    assert defaults.delta == pytest.approx(1e-4)
    assert defaults.gamma == pytest.approx(12.0 * math.log(100 / 1e-4))


def test_maintained_inverses_match_dense():
    d, _, params = grown_dictionary(25, 40, gamma=4.0)
    kzz = gram(GAUSS, d.anchors, d.anchors)
    assert np.linalg.norm(d.kzz_inverse.matrix @ kzz - np.eye(d.size)) < 1e-7
    weights = np.diag(1.0 / np.sqrt(np.array(d.probs)))
    scaled = weights @ kzz @ weights + d.mu * np.eye(d.size)
    assert np.linalg.norm(d.score_inverse.matrix @ scaled - np.eye(d.size)) < 1e-7
