import numpy as np
import pytest

from arborwalk.disorder import (DensityTable, DisorderField, UniformFull,
                                UniformInterval)
from arborwalk.tree import ROOT, Alphabet, concat, enumerate_ball


def test_reproducible_and_seed_sensitive():
    f1 = DisorderField(42)
    f2 = DisorderField(42)
    f3 = DisorderField(43)
    key = ((0, 1, 0), 2)
    assert f1.phase(*key) == f2.phase(*key)
    assert f1.phase(*key) != f3.phase(*key)


def test_independent_of_evaluation_order():
    """Counter-based generation: values depend only on (word, letter)."""
    f = DisorderField(7)
    a = Alphabet(3)
    ball = enumerate_ball(ROOT, 3, a)
    keys = [(w, l) for w in ball.words for l in range(3)]
    forward = [f.phase(w, l) for (w, l) in keys]
    backward = [f.phase(w, l) for (w, l) in reversed(keys)]
    assert forward == backward[::-1]


def test_marginal_looks_uniform():
    f = DisorderField(0)
    a = Alphabet(3)
    ball = enumerate_ball(ROOT, 7, a)
    vals = np.array([f.phase(w, l) for w in ball.words for l in range(3)])
    assert len(vals) > 1000
    assert vals.min() >= 0 and vals.max() < 2 * np.pi
    # Kolmogorov-Smirnov style bound, generous
    ecdf = np.sort(vals) / (2 * np.pi)
    grid = np.arange(1, len(vals) + 1) / len(vals)
    assert np.abs(ecdf - grid).max() < 0.05


def test_interval_distribution_support():
    f = DisorderField(5, distribution=UniformInterval(1.0, 1.5))
    a = Alphabet(4)
    ball = enumerate_ball(ROOT, 3, a)
    vals = [f.phase(w, l) for w in ball.words for l in range(4)]
    assert all(1.0 <= v <= 1.5 for v in vals)


def test_interval_rejects_empty():
    with pytest.raises(ValueError):
        UniformInterval(2.0, 1.0)


def test_density_table_quantile():
    # all mass on the second half of the circle
    d = DensityTable((0.0, 1.0))
    assert d.quantile(0.0) == pytest.approx(np.pi)
    assert d.quantile(0.5) == pytest.approx(1.5 * np.pi)
    f = DisorderField(9, distribution=d)
    vals = [f.phase((j,), 0) for j in range(3)]
    assert all(v >= np.pi for v in vals)


def test_translated_field_matches_shifted_lookup():
    a = Alphabet(3)
    f = DisorderField(11)
    shift = (0, 1)
    g = f.translated(shift, a)
    for word in [ROOT, (2,), (1, 0), (0, 1, 2)]:
        for letter in range(3):
            assert g.phase(word, letter) == \
                f.phase(concat(shift, word, a), letter)


def test_translation_composes():
    a = Alphabet(3)
    f = DisorderField(11)
    g = f.translated((0, 1), a).translated((1, 2), a)
    h = f.translated(concat((0, 1), (1, 2), a), a)
    assert g.phase((2,), 1) == pytest.approx(h.phase((2,), 1))
