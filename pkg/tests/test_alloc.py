import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ilap.alloc import dual_value, max_surplus, solve_allocation, verify_stability
from ilap.exceptions import DimensionError, NonFiniteError
from ilap.market import Allocation, ConstraintProfile

from .oracles import brute_force_max_surplus, brute_force_welfare, lp_dual_value, lp_welfare

THETA = np.array([[0.9, 0.3], [0.8, 0.1]])


def random_instance(rng, max_n=12, max_m=12, max_cap=3):
    N, M = rng.integers(1, max_n + 1), rng.integers(1, max_m + 1)
    theta = rng.uniform(-1, 1, (N, M))
    return theta, ConstraintProfile(rng.integers(0, max_cap + 1, N), rng.integers(0, max_cap + 1, M))


def test_identity_instance():
    out = solve_allocation(np.eye(2), ConstraintProfile([1, 1], [1, 1]))
    assert out.allocation.matrix.tolist() == [[1, 0], [0, 1]]
    assert out.welfare == 2.0
    assert out.prices.tolist() == [0.0, 0.0]


def test_capacity_bound_instance_prices():
    out = solve_allocation(THETA, ConstraintProfile([1, 1], [1, 2]))
    assert out.allocation.pairs == [(0, 1), (1, 0)]
    assert out.welfare == pytest.approx(1.1)
    assert out.prices == pytest.approx([0.6, 0.0], abs=1e-12)


def test_capacity_bound_instance_against_price_sweep():
    # all optimal prices on a 1e-3 grid: dual value equals the primal optimum
    c = ConstraintProfile([1, 1], [1, 2])
    primal = brute_force_welfare(THETA, c.demands, c.capacities)
    grid = np.round(np.arange(0, 1.001, 0.001), 3)
    optimal = [p1 for p1 in grid if abs(dual_value([p1, 0.0], THETA, c) - primal) <= 1e-9]
    # p2 > 0 would violate complementary slackness on the slack item
    assert min(optimal) == pytest.approx(0.6)
    assert solve_allocation(THETA, c).prices[0] == pytest.approx(min(optimal))


def test_all_zero_rewards_allocate_nothing():
    out = solve_allocation(np.zeros((3, 2)), ConstraintProfile([1, 1, 1], [2, 2]))
    assert len(out.allocation) == 0
    assert out.welfare == 0
    assert out.prices.tolist() == [0, 0]


def test_errors():
    with pytest.raises(DimensionError):
        solve_allocation(np.eye(2), ConstraintProfile([1, 1, 1], [1, 1]))
    with pytest.raises(NonFiniteError):
        solve_allocation(np.array([[np.inf]]), ConstraintProfile([1], [1]))


def test_matches_brute_force_on_small_instances():
    rng = np.random.default_rng(0)
    checked = 0
    while checked < 300:
        theta, c = random_instance(rng, 4, 4)
        if theta.size > 16:
            continue
        out = solve_allocation(theta, c)
        assert out.welfare == pytest.approx(brute_force_welfare(theta, c.demands, c.capacities), abs=1e-12)
        assert c.admits(out.allocation.matrix)
        checked += 1


def test_matches_lp_relaxation_on_larger_instances():
    rng = np.random.default_rng(1)
    for _ in range(40):
        theta, c = random_instance(rng)
        out = solve_allocation(theta, c)
        assert out.welfare == pytest.approx(lp_welfare(theta, c.demands, c.capacities), abs=1e-8)


def test_dual_value_matches_lp_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        theta, c = random_instance(rng, 5, 5)
        p = rng.uniform(0, 1, theta.shape[1])
        assert dual_value(p, theta, c) == pytest.approx(lp_dual_value(p, theta, c.demands, c.capacities), abs=1e-9)


def test_certificates_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(300):
        theta, c = random_instance(rng)
        out = solve_allocation(theta, c)
        X = out.allocation.matrix
        assert abs(out.duality_gap) <= 1e-8
        slack = c.capacities - X.sum(axis=0)
        assert np.abs(out.prices * slack).max(initial=0) <= 1e-8
        assert (out.prices >= 0).all() and (out.demand_duals >= 0).all()
        assert (X[theta <= 0] == 0).all()
        _, total = verify_stability(out.allocation, out.prices, theta, c)
        assert total <= 1e-8


def test_prices_are_minimal():
    rng = np.random.default_rng(4)
    for _ in range(200):
        theta, c = random_instance(rng, 6, 6)
        out = solve_allocation(theta, c)
        for i in np.flatnonzero(out.prices > 1e-6):
            lowered = out.prices.copy()
            lowered[i] -= 1e-6
            assert dual_value(lowered, theta, c) > out.welfare + 1e-12


def test_strong_duality_sum():
    rng = np.random.default_rng(5)
    for _ in range(100):
        theta, c = random_instance(rng)
        out = solve_allocation(theta, c)
        users = sum(max_surplus(theta[u], out.prices, d) for u, d in enumerate(c.demands))
        assert users + out.prices @ c.capacities == pytest.approx(out.welfare, abs=1e-8)


@pytest.mark.parametrize("lam", [0.5, 2.0, 3.7, 10.0])
def test_scaling_equivariance(lam):
    rng = np.random.default_rng(6)
    for _ in range(50):
        theta, c = random_instance(rng)
        a, b = solve_allocation(theta, c), solve_allocation(lam * theta, c)
        assert a.allocation == b.allocation
        assert b.welfare == pytest.approx(lam * a.welfare, rel=1e-12, abs=1e-12)
        assert b.prices == pytest.approx(lam * a.prices, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize(
    "theta, p, d, expected",
    [([0.9, 0.3], [0.5, 0.1], 1, 0.4), ([0.9, 0.3], [0.5, 0.1], 2, 0.6), ([0.2, 0.3], [0.5, 0.3], 2, 0.0)],
)
def test_max_surplus_examples(theta, p, d, expected):
    assert max_surplus(theta, p, d) == pytest.approx(expected)
    assert brute_force_max_surplus(theta, p, d) == pytest.approx(expected)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-1, 1), min_size=1, max_size=6).flatmap(
        lambda th: st.tuples(
            st.just(th),
            st.lists(st.floats(0, 1.5), min_size=len(th), max_size=len(th)),
            st.integers(0, 4),
            st.booleans(),
        )
    )
)
def test_max_surplus_matches_enumeration(args):
    theta, p, d, ar = args
    assert max_surplus(theta, p, d, ar) == pytest.approx(brute_force_max_surplus(theta, p, d, ar), abs=1e-12)


def test_verify_stability_examples():
    c = ConstraintProfile([1, 1], [1, 2])
    per_user, total = verify_stability(Allocation(np.eye(2, dtype=int)), [0, 0], THETA, c)
    assert per_user == pytest.approx([0.0, 0.7])
    assert total == pytest.approx(0.7)
    per_user, _ = verify_stability(Allocation.empty((2, 2)), [0, 0], THETA, c)
    assert per_user == pytest.approx(THETA.max(axis=1))


def test_verify_stability_accept_reject_high_prices():
    c = ConstraintProfile([1, 1], [1, 2])
    _, total = verify_stability(Allocation.empty((2, 2)), [2.0, 2.0], THETA, c, accept_reject=True)
    assert total == 0.0
