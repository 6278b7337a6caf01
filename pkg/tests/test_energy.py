import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from divfuzz.energy import (GAMMA, Corpus, EnergyWeights, Seed, failure_delta, init_child_energy, init_energy,
                            load_corpus, save_corpus, select_seed, selection_probabilities, update_parent_energy,
                            violation_delta)


def seed(scenario, o=10.0, e=1.0, **kw):
    return Seed(scenario, np.array([1, 2, 3]), o, e, **kw)


@pytest.fixture
def sc(s1_seeds):
    return s1_seeds[0]


def test_first_failing_child(sc):
    p = seed(sc)
    assert update_parent_energy(p, True, 10.0, 0.0) == pytest.approx(1.45)
    assert (p.fail_count, p.nonfail_count) == (1, 0)


def test_first_benign_child(sc):
    p = seed(sc)
    assert update_parent_energy(p, False, 10.0, 0.0) == pytest.approx(0.90)
    assert (p.fail_count, p.nonfail_count) == (0, 1)


def test_violation_delta_example():
    assert violation_delta(1.5, 1.0, 0.5) == pytest.approx(0.5 / (0.5 + 1e-5), rel=1e-12)
    assert violation_delta(1.5, 1.0, 0.5) == pytest.approx(0.99998, abs=1e-5)


def test_child_energy_examples():
    assert init_child_energy(3.0, 3.0, 0.2) == 1.0
    assert init_child_energy(3.0, 2.0, 0.0) == pytest.approx(1.5, abs=1e-4)
    assert init_child_energy(2.0, 3.0, 0.0) == pytest.approx(0.5, abs=1e-4)


def test_verdict_object_accepted(sc):
    class V:
        failed = True
    p = seed(sc)
    assert update_parent_energy(p, V(), 10.0, 0.0) == pytest.approx(1.45)


def test_update_matches_recomputation(rng, sc):
    for _ in range(500):
        w = EnergyWeights(*rng.uniform(0, 2, 3))
        f, nf = (int(v) for v in rng.integers(0, 20, 2))
        e0, o_p, o_c, dist = rng.uniform(-3, 3), rng.uniform(0, 70), rng.uniform(0, 70), rng.uniform(0, 1)
        failed = bool(rng.random() < 0.5)
        p = seed(sc, o_p, e0, fail_count=f, nonfail_count=nf)
        got = update_parent_energy(p, failed, o_c, dist, w)
        f2, nf2 = f + failed, nf + (not failed)
        d_f = f2 / (f2 + nf2) if failed else -0.1 * nf2 / (f2 + nf2)
        d_v = (o_p - o_c) / (1 - dist + 1e-5)
        assert got == pytest.approx(e0 + w.failure * d_f + w.violation * d_v + w.decay * -0.05, rel=1e-12, abs=1e-12)
        assert p.energy == got


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000), st.booleans())
def test_failure_delta_bounds(f, nf, failed):
    f += failed
    nf += not failed
    d = failure_delta(f, nf, failed)
    if failed:
        assert 0 < d <= 1
    else:
        # reaches -0.1 exactly only when the parent has never produced a failure
        assert -0.1 <= d < 0
        assert (d == -0.1) == (f == 0)


def test_failure_delta_requires_counts():
    with pytest.raises(ValueError):
        failure_delta(0, 0, True)


def test_init_energy_resets(sc):
    c = Corpus([seed(sc, e=3.0, fail_count=2, nonfail_count=1, selection_count=4)])
    init_energy(c)
    s = c.seeds[0]
    assert (s.energy, s.fail_count, s.nonfail_count, s.selection_count) == (1.0, 0, 0, 0)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=30))
def test_probabilities_valid(energies):
    p = selection_probabilities(energies)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0)
    if max(energies) <= 0:
        assert np.allclose(p, 1 / len(energies))
    else:
        assert np.all(p[np.asarray(energies) <= 0] == 0)


def draw(sc, energies, n, rng):
    c = Corpus([seed(sc, e=e) for e in energies])
    counts = np.bincount([select_seed(c, rng) for _ in range(n)], minlength=len(energies))
    assert [s.selection_count for s in c.seeds] == counts.tolist()
    return counts


def test_only_positive_mass_selected(sc, rng):
    assert draw(sc, [2.0, 0.0, 0.0], 500, rng).tolist() == [500, 0, 0]


def test_equal_energies_half(sc, rng):
    counts = draw(sc, [1.0, 1.0], 10_000, rng)
    assert abs(counts[0] / 10_000 - 0.5) <= 0.03


def test_selection_ratio(sc, rng):
    counts = draw(sc, [2.0, 1.0], 10_000, rng)
    assert counts[0] / counts[1] == pytest.approx(2.0, rel=0.10)


def test_non_positive_energies_uniform(sc, rng):
    counts = draw(sc, [-1.0, 0.0, -5.0, 0.0], 8000, rng)
    assert stats.chisquare(counts).pvalue > 0.01


def test_scale_invariance(sc, rng):
    base = np.array([0.5, 1.0, 2.0, 0.0, -1.0, 3.5])
    for scale in (0.01, 7.0, 1e4):
        counts = draw(sc, base * scale, 10_000, rng)
        expected = selection_probabilities(base) * 10_000
        keep = expected > 0
        assert counts[~keep].sum() == 0
        assert stats.chisquare(counts[keep], expected[keep]).pvalue > 0.01


def test_uniform_mode_ignores_energy(sc, rng):
    counts = np.zeros(3, int)
    c = Corpus([seed(sc, e=e) for e in (100.0, 0.0, -3.0)])
    for _ in range(6000):
        counts[select_seed(c, rng, uniform=True)] += 1
    assert stats.chisquare(counts).pvalue > 0.01


def test_empty_corpus(rng):
    with pytest.raises(ValueError):
        select_seed(Corpus(), rng)


def test_checkpoint_roundtrip(tmp_path, s1_seeds):
    c = Corpus([Seed(s, np.arange(5) % 3, 12.5 + i, 0.3 * i, i, 2 * i, 3 * i,
                     np.full((5, 24), float(i)) if i != 1 else None, i > 0)
                for i, s in enumerate(s1_seeds)])
    save_corpus(c, tmp_path)
    again = load_corpus(tmp_path)
    assert len(again) == len(c)
    for a, b in zip(again.seeds, c.seeds):
        assert a.scenario == b.scenario
        assert np.array_equal(a.abstract_trace, b.abstract_trace)
        assert (a.violation_degree, a.energy, a.fail_count, a.nonfail_count, a.selection_count, a.in_behaviors) == \
            (b.violation_degree, b.energy, b.fail_count, b.nonfail_count, b.selection_count, b.in_behaviors)
        assert (a.merged_states is None) == (b.merged_states is None)
        if a.merged_states is not None:
            assert np.array_equal(a.merged_states, b.merged_states)
    assert len(again.behaviors) == 2


def test_negative_violation_degree_rejected(sc):
    with pytest.raises(ValueError):
        seed(sc, o=-1.0)


def test_gamma_value():
    assert GAMMA == 1e-5
