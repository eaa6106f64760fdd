import numpy as np
import pytest

from wavelab.sbp_core import build_sbp_d2
from wavelab.sat_semidisc import (
    BoundaryConditionSpec,
    DIRICHLET,
    NEUMANN,
    SemiDiscretization2D,
    assemble_2d,
    assemble_dirichlet_1d,
    assemble_dirichlet_1d_unchecked,
    assemble_neumann_1d,
    compute_iota0,
    _banded_split,
)

ORDERS = (2, 4, 6)


def op_for(order, n=41):
    return build_sbp_d2(order, n, 1.0 / (n - 1))


@pytest.mark.parametrize("order", ORDERS)
def test_neumann_assumption1(order):
    sd = assemble_neumann_1d(op_for(order))
    rep = sd.assumption1_report()
    assert rep["sym_error"] <= 1e-10 * rep["max_abs"]
    assert rep["eigmin_neg"] >= -1e-10 * rep["norm2"]


@pytest.mark.parametrize("order", ORDERS)
def test_dirichlet_assumption1_above_threshold(order):
    op = op_for(order)
    sd = assemble_dirichlet_1d(op, 1.2 * compute_iota0(op))
    rep = sd.assumption1_report()
    assert rep["passed"]


@pytest.mark.parametrize("order", ORDERS)
def test_dirichlet_below_threshold_fails(order):
    op = op_for(order)
    sd = assemble_dirichlet_1d_unchecked(op, 0.5 * compute_iota0(op))
    rep = sd.assumption1_report()
    assert rep["eigmin_neg"] < -1e-10 * rep["norm2"]


@pytest.mark.parametrize("order", ORDERS)
def test_iota0_positive_and_monotone(order):
    op = op_for(order)
    i0 = compute_iota0(op)
    assert i0 > 0
    ok = assemble_dirichlet_1d_unchecked(op, 2.0 * i0).assumption1_report()
    assert ok["eigmin_neg"] >= -1e-10 * ok["norm2"]


def test_dirichlet_assembly_rejects_low_iota():
    op = op_for(4)
    with pytest.raises(ValueError, match="below stability threshold"):
        assemble_dirichlet_1d(op, 0.9 * compute_iota0(op))


def test_neumann_equals_minus_hinv_m():
    # both SAT terms cancel BS exactly, leaving Q = -H^{-1} M h^2
    for order in ORDERS:
        op = op_for(order)
        sd = assemble_neumann_1d(op)
        expected = -op.M * op.h**2 / op.H[:, None]
        assert np.abs(sd.Q - expected).max() <= 1e-12 * np.abs(sd.Q).max()


def test_order2_neumann_first_row():
    sd = assemble_neumann_1d(op_for(2, 21))
    assert np.allclose(sd.Q[0, :3], [-2.0, 2.0, 0.0], atol=1e-13)


@pytest.mark.parametrize("kind", (DIRICHLET, NEUMANN))
@pytest.mark.parametrize("order", ORDERS)
def test_steady_quadratic_exact(order, kind):
    """U = x(1-x) with matching data and constant forcing is reproduced to
    round-off: all closure rows are exact through degree p+1 >= 2."""
    op = op_for(order)
    x = op.grid().points
    U = x * (1 - x)
    if kind == DIRICHLET:
        bc = BoundaryConditionSpec(DIRICHLET, g_low=lambda t: 0.0, g_high=lambda t: 0.0)
        sd = assemble_dirichlet_1d(op, 1.2 * compute_iota0(op), bc)
    else:
        # outward normal derivatives: -U'(0) = -1, +U'(1) = -1
        bc = BoundaryConditionSpec(NEUMANN, g_low=lambda t: -1.0, g_high=lambda t: -1.0)
        sd = assemble_neumann_1d(op, bc)
    resid = sd.action(U, 0.0) + 2.0  # forcing F = U_tt - U_xx = 2
    assert np.abs(resid).max() <= 1e-12 / op.h**2


def test_zero_data_zero_state():
    sd = assemble_neumann_1d(op_for(4))
    out = sd.action(np.zeros(41), 0.3)
    assert np.abs(out).max() == 0.0


@pytest.mark.parametrize("kind", (DIRICHLET, NEUMANN))
@pytest.mark.parametrize("order", ORDERS)
def test_2d_matches_dense_kronecker(order, kind):
    n = 17
    op = build_sbp_d2(order, n, 1.0 / (n - 1))
    iota = 1.2 * compute_iota0(op) if kind == DIRICHLET else None
    sd = assemble_2d(op, op, BoundaryConditionSpec(kind), BoundaryConditionSpec(kind), iota)
    rng = np.random.default_rng(7)
    X = rng.standard_normal((n, n))
    dense = sd.dense_matrix() @ X.ravel(order="F")
    fast = sd.homogeneous_action(X).ravel(order="F")
    scale = np.abs(dense).max()
    assert np.abs(dense - fast).max() <= 1e-12 * scale


def test_2d_separable_action_identity():
    n = 21
    op = build_sbp_d2(2, n, 1.0 / (n - 1))
    sd = assemble_2d(op, op, BoundaryConditionSpec(NEUMANN), BoundaryConditionSpec(NEUMANN))
    rng = np.random.default_rng(3)
    v = rng.standard_normal(n)
    w = rng.standard_normal(n)
    X = np.outer(w, v)  # w(y) v(x)
    expected = np.outer(w, sd.sdx.homogeneous_action(v)) + np.outer(
        sd.sdy.homogeneous_action(w), v
    )
    got = sd.homogeneous_action(X)
    assert np.abs(got - expected).max() <= 1e-10 * np.abs(expected).max()


def test_2d_zero_field():
    n = 17
    op = build_sbp_d2(4, n, 1.0 / (n - 1))
    sd = assemble_2d(op, op, BoundaryConditionSpec(NEUMANN), BoundaryConditionSpec(NEUMANN))
    assert np.abs(sd.action(np.zeros((n, n)), 1.0)).max() == 0.0


def test_2d_rejects_mismatched_spacing():
    a = build_sbp_d2(2, 21, 1.0 / 20)
    b = build_sbp_d2(2, 41, 1.0 / 40)
    with pytest.raises(ValueError, match="same spacing"):
        assemble_2d(a, b, BoundaryConditionSpec(NEUMANN), BoundaryConditionSpec(NEUMANN))


def test_banded_split_detects_closures():
    op = op_for(2)
    sdD = assemble_dirichlet_1d(op, 1.2 * compute_iota0(op))
    c, Bl, Br = _banded_split(sdD.Q)
    assert Bl.shape[0] == 3  # Dirichlet SAT spreads over the S-row support
    sdN = assemble_neumann_1d(op)
    c, Bl, Br = _banded_split(sdN.Q)
    assert Bl.shape[0] == 1
    assert np.allclose(c, [1.0, -2.0, 1.0])


def test_bad_bc_kind_rejected():
    with pytest.raises(ValueError, match="unknown boundary kind"):
        BoundaryConditionSpec("robin")
    op = op_for(2)
    with pytest.raises(ValueError, match="must be neumann"):
        assemble_neumann_1d(op, BoundaryConditionSpec(DIRICHLET))
