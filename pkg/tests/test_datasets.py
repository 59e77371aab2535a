import math

import numpy as np
import pytest

from ilap.datasets import (
    RatingsCompleter,
    balanced_factors,
    complete_and_scale,
    ingest_ratings,
    max_abs_scale,
    sample_constraints,
    synth_instance,
)
from ilap.exceptions import RatingsFormatError
from ilap.rng import INSTANCE, stream


def test_synth_entries_bounded_and_low_rank():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        N, M, R = (int(x) for x in rng.integers(1, 8, 3))
        truth = synth_instance(N, M, R, rng)
        assert np.abs(truth.values).max() <= 1.0
        assert np.linalg.norm(truth.user_features, axis=1).max() <= 1.0 + 1e-12
        assert np.linalg.norm(truth.item_features, axis=1).max() <= 1.0 + 1e-12
    truth = synth_instance(30, 20, 4, rng)
    s = np.linalg.svd(truth.values, compute_uv=False)
    assert s[4] <= 1e-10


def test_synth_rows_uniform_in_ball():
    # radius of a uniform point in the R-ball has CDF r^R, so P(r <= 0.5) = 2^-R
    rng = np.random.default_rng(1)
    F = synth_instance(40_000, 1, 3, rng).user_features
    assert np.mean(np.linalg.norm(F, axis=1) <= 0.5) == pytest.approx(0.125, abs=0.01)


def test_synth_deterministic():
    a = synth_instance(6, 4, 2, stream(3, INSTANCE))
    b = synth_instance(6, 4, 2, stream(3, INSTANCE))
    assert a.values.tobytes() == b.values.tobytes()


def write(tmp_path, text, name="r.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_ingest_three_lines(tmp_path):
    table = ingest_ratings(write(tmp_path, "1,1,4.0\n1,2,3.0\n2,1,5.0\n"))
    assert table.shape == (2, 2)
    assert len(table.ratings) == 3
    assert table.fill == 0.75
    m = table.to_matrix()
    assert m[0, 0] == 4.0 and m[0, 1] == 3.0 and m[1, 0] == 5.0 and np.isnan(m[1, 1])
    assert "fill 0.7500" in table.summary()


def test_ingest_duplicates_and_header(tmp_path):
    table = ingest_ratings(write(tmp_path, "user,item,rating\n1,1,4.0\n1,1,2.0\n"))
    assert table.duplicates == 1
    assert table.ratings.tolist() == [2.0]


def test_ingest_errors(tmp_path):
    with pytest.raises(RatingsFormatError, match=":3:"):
        ingest_ratings(write(tmp_path, "1,1,4.0\n1,2,3.0\n2,1\n"))
    with pytest.raises(RatingsFormatError, match=":2:"):
        ingest_ratings(write(tmp_path, "1,1,4.0\n1,2,abc\n"))
    with pytest.raises(RatingsFormatError):
        ingest_ratings(write(tmp_path, ""))
    with pytest.raises(RatingsFormatError):
        ingest_ratings(write(tmp_path, "user,item,rating\n"))


def test_completion_recovers_full_rank_one(tmp_path):
    truth = np.outer([1.0, 2.0, 3.0], [4.0, 5.0])
    lines = "".join(f"{u},{i},{truth[u, i]}\n" for u in range(3) for i in range(2))
    table = ingest_ratings(write(tmp_path, lines))
    model = RatingsCompleter(rank=1, reg=1e-6, random_state=0).fit(table.to_matrix())
    assert np.abs(model.predict() - truth).max() <= 1e-4
    assert np.all(np.diff(model.objective_trace_) <= 1e-12)


def test_completion_trace_nonincreasing_with_missing():
    rng = np.random.default_rng(2)
    for k in range(20):
        X = rng.normal(size=(8, 6))
        X[rng.uniform(size=X.shape) < 0.4] = np.nan
        X[0, 0] = 1.0
        trace = RatingsCompleter(rank=2, random_state=k).fit(X).objective_trace_
        assert np.all(np.diff(trace) <= 1e-10 * np.maximum(1.0, trace[:-1]))


def test_complete_and_scale_max_abs_one(tmp_path):
    table = ingest_ratings(write(tmp_path, "a,x,4\na,y,1\nb,x,5\nc,y,2\n"))
    truth = complete_and_scale(table, 1, rng=np.random.default_rng(0))
    assert np.abs(truth.values).max() == 1.0
    assert max_abs_scale(np.zeros((2, 2))).tolist() == [[0, 0], [0, 0]]


def test_completion_of_empty_matrix():
    with pytest.raises(RatingsFormatError):
        RatingsCompleter().fit(np.full((2, 2), np.nan))


def test_balanced_factors_reproduce_low_rank():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 2)) @ rng.normal(size=(2, 5))
    F, Phi = balanced_factors(A, 2)
    assert F @ Phi.T == pytest.approx(A)
    assert np.linalg.norm(F, axis=1).max() == pytest.approx(np.linalg.norm(Phi, axis=1).max())


def test_static_constraints():
    c = sample_constraints("static", 250, 200, np.random.default_rng(4))
    assert np.all(c.demands == 1)
    assert math.ceil(250 / 200) == 2
    assert set(c.capacities.tolist()) <= {1, 2}
    assert set(c.capacities.tolist()) == {1, 2}


def test_dynamic_constraints_no_demand():
    class NoDemand:
        def uniform(self, size):
            return np.ones(size)

        def integers(self, *a, **k):
            raise AssertionError("capacities must not be drawn when nobody demands")

    c = sample_constraints("dynamic", 5, 3, NoDemand(), t=4)
    assert c.demands.sum() == 0 and c.capacities.tolist() == [0, 0, 0]
    assert c.admits(np.zeros((5, 3)))


def test_dynamic_constraints_mean_active_users():
    rng = np.random.default_rng(5)
    rounds = 100_000
    active = 0
    for t in range(rounds):
        c = sample_constraints("dynamic", 100, 10, rng, t)
        active += int(c.demands.sum())
        cmax = math.ceil(c.demands.sum() / 10)
        assert c.capacities.max(initial=0) <= cmax
    assert abs(active / rounds - 20) <= 0.5


def test_unknown_setting():
    with pytest.raises(ValueError):
        sample_constraints("weekly", 2, 2, np.random.default_rng(0))
