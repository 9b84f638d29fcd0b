import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from roughmle.errors import IncompatiblePathsError, InvalidArgumentError
from roughmle.gridpath import (
    Path,
    TimeGrid,
    holder_seminorm,
    left_riemann,
    make_uniform_grid,
    multiscale_lags,
    pair_lags,
    path_from_csv,
    path_to_csv,
    quadratic_variation,
    read_path,
    sup_distance,
    write_path,
)
from roughmle.stochsim import RngConfig, brownian_path

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def walk(n, d, seed):
    rng = np.random.default_rng(seed)
    g = make_uniform_grid(1.0, n)
    return Path(g, np.cumsum(rng.standard_normal((n + 1, d)), axis=0))


# -- grids ----------------------------------------------------------------


def test_uniform_grid_examples():
    assert np.array_equal(make_uniform_grid(1.0, 4).times, [0, 0.25, 0.5, 0.75, 1.0])
    assert np.array_equal(make_uniform_grid(2.0, 1).times, [0, 2.0])
    g = make_uniform_grid(1.0, 2**16)
    assert g.times.size == 65537 and g.uniform
    assert np.allclose(g.dt, 2.0**-16, rtol=1e-12, atol=0)


@pytest.mark.parametrize("horizon,steps", [(0.0, 4), (-1.0, 4), (1.0, 0), (1.0, 2.5)])
def test_uniform_grid_rejects(horizon, steps):
    with pytest.raises(InvalidArgumentError):
        make_uniform_grid(horizon, steps)


def test_long_horizon_grid_is_uniform():
    g = make_uniform_grid(100.0, 10000)
    assert g.uniform
    assert TimeGrid.from_times(g.times).uniform


@pytest.mark.parametrize(
    "times",
    [[0.0], [0.5, 1.0], [0.0, 1.0, 1.0], [0.0, 2.0, 1.0]],
)
def test_grid_invariants(times):
    with pytest.raises(InvalidArgumentError):
        TimeGrid(np.array(times))


def test_flagged_uniform_must_be_uniform():
    with pytest.raises(InvalidArgumentError):
        TimeGrid(np.array([0.0, 0.1, 0.3]), uniform=True)
    assert not TimeGrid.from_times([0.0, 0.1, 0.3]).uniform


def test_path_shape_checks():
    g = make_uniform_grid(1.0, 2)
    assert Path(g, [0.0, 1.0, 2.0]).dim == 1
    with pytest.raises(IncompatiblePathsError):
        Path(g, np.zeros((4, 2)))


def test_grid_index_lookup():
    g = make_uniform_grid(1.0, 4)
    assert g.index_of(0.75) == 3
    with pytest.raises(InvalidArgumentError):
        g.index_of(0.3)


# -- sup distance ---------------------------------------------------------


def test_sup_distance_examples():
    g = make_uniform_grid(1.0, 2)
    P = Path(g, [0.0, 1.0, 0.0])
    Z = Path(g, [0.0, 0.0, 0.0])
    assert sup_distance(P, P) == 0.0
    assert sup_distance(P, Z) == 1.0


def test_sup_distance_tiny_difference_is_positive():
    g = make_uniform_grid(1.0, 2)
    P = Path(g, [[1e-225, 0.0], [0.0, 0.0], [0.0, 0.0]])
    Z = Path(g, np.zeros((3, 2)))
    assert sup_distance(P, Z) == 1e-225
    assert holder_seminorm(P, 0.5) > 0


def test_sup_distance_grid_mismatch():
    with pytest.raises(IncompatiblePathsError):
        sup_distance(walk(4, 1, 0), walk(5, 1, 0))
    with pytest.raises(IncompatiblePathsError):
        sup_distance(walk(4, 1, 0), walk(4, 2, 0))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (3, 9, 2), elements=finite))
def test_sup_distance_is_a_metric(vals):
    g = make_uniform_grid(1.0, 8)
    P, Q, R = (Path(g, v) for v in vals)
    assert sup_distance(P, Q) == sup_distance(Q, P)
    assert sup_distance(P, P) == 0.0
    if not np.array_equal(P.values, Q.values):
        assert sup_distance(P, Q) > 0
    assert sup_distance(P, R) <= sup_distance(P, Q) + sup_distance(Q, R) + 1e-12


# -- Holder seminorm ------------------------------------------------------


def test_holder_examples():
    g = make_uniform_grid(1.0, 16)
    assert holder_seminorm(Path(g, np.ones(17)), 0.5) == 0.0
    line = Path(g, g.times)
    assert holder_seminorm(line, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert holder_seminorm(line, 0.5) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_holder_rejects_alpha(alpha):
    with pytest.raises(InvalidArgumentError):
        holder_seminorm(walk(4, 1, 0), alpha)


@settings(max_examples=40, deadline=None)
@given(
    arrays(float, (12, 2), elements=finite),
    st.floats(0.1, 0.9),
    st.floats(0.05, 0.5),
    st.floats(0.5, 4.0),
)
def test_holder_monotone_in_exponent(vals, alpha, gap, horizon):
    beta = min(alpha + gap, 1.0)
    P = Path(make_uniform_grid(horizon, 11), vals)
    lhs = holder_seminorm(P, alpha)
    rhs = holder_seminorm(P, beta) * horizon ** (beta - alpha)
    assert lhs <= rhs * (1 + 1e-12) + 1e-12


def test_restricted_lags_give_lower_bound():
    P = walk(300, 2, 3)
    full = holder_seminorm(P, 0.4)
    part = holder_seminorm(P, 0.4, lags=multiscale_lags(301, dense=8))
    assert part <= full


def test_lag_sets():
    assert list(pair_lags(5)) == [1, 2, 3, 4]
    assert list(pair_lags(5, [0, 2, 2, 7, 3])) == [2, 3]
    lags = multiscale_lags(10_000)
    assert lags[0] == 1 and lags[-1] == 9999
    assert set(range(1, 129)) <= set(lags.tolist())
    assert np.all(np.diff(lags) > 0) and lags.size < 200


# -- Riemann sums and quadratic variation ---------------------------------


def test_left_riemann_examples():
    g = make_uniform_grid(3.0, 7)
    assert left_riemann(np.ones(8), g) == pytest.approx(3.0)
    assert left_riemann(np.zeros(8), g) == 0.0
    n = 64
    u = make_uniform_grid(1.0, n)
    assert left_riemann(u.times, u) == pytest.approx(0.5 - 1 / (2 * n), abs=1e-14)


def test_left_riemann_alignment():
    g = make_uniform_grid(1.0, 4)
    assert left_riemann(np.arange(4.0), g) == left_riemann(np.arange(5.0), g)
    with pytest.raises(IncompatiblePathsError):
        left_riemann(np.ones(3), g)


def test_left_riemann_tensor_samples():
    g = make_uniform_grid(2.0, 4)
    samples = np.broadcast_to(np.arange(6.0).reshape(2, 3), (5, 2, 3))
    assert np.allclose(left_riemann(samples, g), 2.0 * np.arange(6.0).reshape(2, 3))


@settings(max_examples=60, deadline=None)
@given(arrays(float, (2, 10), elements=finite), finite)
def test_left_riemann_is_linear(samples, c):
    g = TimeGrid.from_times(np.cumsum(np.r_[0.0, np.linspace(0.1, 1.0, 9)]))
    f, h = samples
    assert left_riemann(f + h, g) == pytest.approx(
        left_riemann(f, g) + left_riemann(h, g), abs=1e-10
    )
    assert left_riemann(c * f, g) == pytest.approx(c * left_riemann(f, g), abs=1e-10)


def test_quadratic_variation_examples():
    g = make_uniform_grid(1.0, 2)
    assert np.array_equal(quadratic_variation(Path(g, np.ones((3, 2)))), np.zeros((2, 2)))
    assert quadratic_variation(Path(g, [0.0, 1.0, 0.0]))[0, 0] == 2.0
    W = brownian_path(make_uniform_grid(1.0, 2**16), 1, RngConfig(2024))
    assert abs(quadratic_variation(W)[0, 0] - 1.0) < 0.05


@settings(max_examples=60, deadline=None)
@given(arrays(float, 20, elements=finite))
def test_discrete_ito_telescoping(x):
    P = Path(make_uniform_grid(1.0, 19), x)
    lhs = 2 * np.sum(x[:-1] * np.diff(x))
    rhs = x[-1] ** 2 - x[0] ** 2 - quadratic_variation(P)[0, 0]
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, np.sum(x**2)))


# -- CSV ------------------------------------------------------------------


def test_csv_roundtrip_exact(tmp_path):
    P = walk(50, 3, 11)
    text = path_to_csv(P)
    assert text.splitlines()[0] == "t,x1,x2,x3"
    assert "\r" not in text
    Q = path_from_csv(text)
    assert np.array_equal(P.values, Q.values) and np.array_equal(P.times, Q.times)
    assert Q.grid.uniform
    write_path(P, tmp_path / "p.csv")
    R = read_path(tmp_path / "p.csv")
    assert np.array_equal(R.values, P.values)


def test_csv_rejects_bad_header():
    with pytest.raises(InvalidArgumentError):
        path_from_csv("time,x1\n0,1\n1,2\n")
