import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from svdrestart.bound import (
    MonitorState,
    NablaOperator,
    delta_tr2,
    loss_update_delta,
    loss_update_rows,
    lower_bound,
    nabla_topk,
)
from svdrestart.lanczos import ALGEBRAIC
from svdrestart.spectral import (
    DeltaMatrix,
    SpectralFactors,
    SymSparseMatrix,
    dense_eigs_oracle,
    dense_min_loss,
    reconstruction_loss,
    topk_eigs,
)
from svdrestart.stream import make_rng

from conftest import k3, random_sym

SQRT17 = math.sqrt(17.0)


def k3_delta():
    d = DeltaMatrix(3)
    d.set(0, 1, 1.0)
    return d


def state_for(s, k):
    values, _ = topk_eigs(s, k)
    return MonitorState.at_restart(s, values, 0)


# --- delta_tr2 -------------------------------------------------------------------------

def test_delta_tr2_empty():
    assert delta_tr2(k3(), DeltaMatrix(3)) == 0.0


def test_delta_tr2_from_zero(rng):
    d = random_sym(rng, 10, cls=DeltaMatrix, diag=True)
    assert delta_tr2(SymSparseMatrix(10), d) == pytest.approx(d.frob_sq, rel=1e-14)


def test_delta_tr2_k3():
    # full-matrix Frobenius difference: ||S + dS||^2 - ||S||^2 = (4 + 4 + 4) - 6
    full = np.linalg.norm(k3().to_dense() + k3_delta().to_dense()) ** 2 - 6.0
    assert full == pytest.approx(6.0)
    assert delta_tr2(k3(), k3_delta()) == pytest.approx(6.0, abs=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_delta_tr2_is_frobenius_difference(seed):
    rng = make_rng(seed)
    s = random_sym(rng, 25, diag=True)
    d = random_sym(rng, 25, density=0.1, cls=DeltaMatrix, diag=True)
    after = s.copy()
    after.apply(d)
    assert delta_tr2(s, d) == pytest.approx(after.recompute_frob_sq() - s.recompute_frob_sq(),
                                             abs=1e-10 * (1 + s.frob_sq))


# --- operator ----------------------------------------------------------------------------

def test_k3_operator_dense_form():
    op = NablaOperator(k3(), k3_delta())
    np.testing.assert_allclose(op.to_dense(), [[3, 0, 1], [0, 3, 1], [1, 1, 0]], atol=1e-15)


def test_k3_nabla_eigenvalues():
    op = NablaOperator(k3(), k3_delta())
    assert nabla_topk(op, 1)[0] == pytest.approx((3 + SQRT17) / 2, abs=1e-12)
    np.testing.assert_allclose(nabla_topk(op, 3), [(3 + SQRT17) / 2, 3.0, (3 - SQRT17) / 2],
                               atol=1e-12)


def test_nabla_zero_delta():
    op = NablaOperator(k3(), DeltaMatrix(3))
    np.testing.assert_array_equal(nabla_topk(op, 2), [0.0, 0.0])


@given(st.integers(0, 2**32 - 1))
def test_operator_matches_explicit_product(seed):
    rng = make_rng(seed)
    n = 30
    s = random_sym(rng, n, density=0.15, diag=True)
    d = random_sym(rng, n, density=0.03, cls=DeltaMatrix, diag=True)
    S, D = s.to_dense(), d.to_dense()
    np.testing.assert_allclose(NablaOperator(s, d).to_dense(), S @ D + D @ S + D @ D, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_operator_symmetric(seed):
    rng = make_rng(seed)
    n = 40
    op = NablaOperator(random_sym(rng, n, diag=True), random_sym(rng, n, 0.05, cls=DeltaMatrix))
    u, v = rng.normal(size=n), rng.normal(size=n)
    lhs, rhs = op.matvec(u) @ v, u @ op.matvec(v)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_operator_locality(seed):
    rng = make_rng(seed)
    n = 60
    s = random_sym(rng, n, density=0.05)
    d = DeltaMatrix(n)
    for _ in range(3):
        i, j = rng.choice(n, size=2, replace=False)
        d.set(int(i), int(j), 1.0)
    op = NablaOperator(s, d)
    touched = set(d.support_rows())
    hop = touched | {j for i in touched for j in s.row(i)}
    # only delta rows are read from S
    assert op.rows_read == touched
    assert set(op.support.tolist()) == hop
    y = op.matvec(rng.normal(size=n))
    outside = [i for i in range(n) if i not in hop]
    assert np.all(y[outside] == 0.0)


@given(st.integers(0, 2**32 - 1))
def test_nabla_topk_matches_dense(seed):
    rng = make_rng(seed)
    n = int(rng.integers(5, 80))
    s = random_sym(rng, n, density=0.1, diag=True)
    d = random_sym(rng, n, density=0.03, cls=DeltaMatrix, diag=True)
    k = int(rng.integers(1, n + 1))
    op = NablaOperator(s, d)
    got = nabla_topk(op, k)
    ref, _ = dense_eigs_oracle(op.to_dense(), ALGEBRAIC)
    scale = max(np.abs(ref).max(), 1e-300)
    np.testing.assert_allclose(got, ref[:k], atol=1e-7 * scale)


# --- lower bound ----------------------------------------------------------------------

def test_bound_empty_delta_is_anchor_loss(rng):
    s = random_sym(rng, 20)
    st_ = state_for(s, 3)
    assert lower_bound(st_, 3) == st_.anchor_loss


def test_k3_worked_bound():
    st_ = state_for(k3(), 1)
    assert st_.anchor_loss == pytest.approx(2.0, abs=1e-12)
    st_.absorb(k3_delta())
    b = lower_bound(st_, 1)
    assert b == pytest.approx(8 - (3 + SQRT17) / 2, abs=1e-10)
    after = k3()
    after.apply(k3_delta())
    truth = dense_min_loss(after, 1)
    assert truth == pytest.approx(12 - (1 + math.sqrt(3)) ** 2, abs=1e-10)
    assert b <= truth


def test_restart_state_invariants(rng):
    s = random_sym(rng, 20)
    st_ = state_for(s, 4)
    assert st_.cum_delta.is_empty()
    assert st_.current_loss == st_.anchor_loss == st_.current_bound
    assert st_.anchor_frob_sq == s.frob_sq


@given(st.integers(0, 2**32 - 1))
def test_bound_below_min_loss(seed):
    rng = make_rng(seed)
    n = int(rng.integers(10, 60))
    s = random_sym(rng, n, density=float(rng.uniform(0.02, 0.2)), diag=True)
    d = random_sym(rng, n, density=float(rng.uniform(0.005, 0.1)), cls=DeltaMatrix, diag=True)
    if s.is_empty():
        s.set(0, 1, 1.0)
    k = int(rng.integers(1, n))
    st_ = state_for(s, k)
    st_.absorb(d)
    b = lower_bound(st_, k)
    after = s.copy()
    after.apply(d)
    assert b <= dense_min_loss(after, k) + 1e-9 * after.frob_sq


def test_cum_delta_coalesces():
    st_ = state_for(k3(), 1)
    st_.absorb(k3_delta())
    undo = DeltaMatrix(3)
    undo.set(0, 1, -1.0)
    st_.absorb(undo)
    assert st_.cum_delta.is_empty()
    assert lower_bound(st_, 1) == st_.anchor_loss


@given(st.integers(0, 2**32 - 1))
def test_lambda_k_subadditive(seed):
    rng = make_rng(seed)
    n = int(rng.integers(2, 60))
    p = rng.normal(size=(n, n))
    q = rng.normal(size=(n, n)) * 10.0 ** rng.integers(-2, 3)
    p, q = p + p.T, q + q.T
    slack = 1e-9 * (np.linalg.norm(p) + np.linalg.norm(q)) ** 2
    for k in sorted({1, min(5, n), max(n // 2, 1)}):
        top = lambda m: math.fsum(dense_eigs_oracle(m, ALGEBRAIC)[0][:k])  # noqa: E731
        assert top(p + q) <= top(p) + top(q) + slack


# --- incremental loss -----------------------------------------------------------------

def random_factors(rng, n, k):
    u = rng.normal(size=(n, k))
    v = u * np.where(rng.random(k) < 0.5, -1.0, 1.0)
    return SpectralFactors(u, np.sort(np.abs(rng.normal(size=k)))[::-1], v)


def test_delta_path_zero_factors(rng):
    s = random_sym(rng, 15)
    d = random_sym(rng, 15, 0.1, cls=DeltaMatrix)
    f = SpectralFactors.zeros(15, 3)
    st_ = MonitorState.at_restart(s, np.zeros(3), 0)
    st_.current_loss = s.frob_sq
    j = loss_update_delta(st_, f, s, d)
    s.apply(d)
    assert j == pytest.approx(s.frob_sq, rel=1e-12)


def test_delta_path_empty_delta(rng):
    s = random_sym(rng, 15)
    st_ = state_for(s, 2)
    before = st_.current_loss
    assert loss_update_delta(st_, random_factors(rng, 15, 2), s, DeltaMatrix(15)) == before


def test_delta_path_dimension_mismatch(rng):
    s = random_sym(rng, 15)
    with pytest.raises(ValueError):
        loss_update_delta(state_for(s, 2), random_factors(rng, 14, 2), s, DeltaMatrix(15))


@given(st.integers(0, 2**32 - 1))
def test_delta_path_matches_recompute(seed):
    rng = make_rng(seed)
    n = 30
    s = random_sym(rng, n, diag=True)
    f = random_factors(rng, n, int(rng.integers(1, 6)))
    st_ = MonitorState.at_restart(s, np.zeros(1), 0)
    st_.current_loss = reconstruction_loss(s, f)
    for _ in range(3):
        d = random_sym(rng, n, 0.05, cls=DeltaMatrix, diag=True)
        loss_update_delta(st_, f, s, d)
        s.apply(d)
    truth = reconstruction_loss(s, f)
    assert st_.current_loss == pytest.approx(truth, rel=1e-8, abs=1e-10 * s.frob_sq)


@given(st.integers(0, 2**32 - 1))
def test_row_path_matches_recompute(seed):
    rng = make_rng(seed)
    n = 30
    s = random_sym(rng, n, diag=True)
    f_old = random_factors(rng, n, 4)
    st_ = MonitorState.at_restart(s, np.zeros(1), 0)
    st_.current_loss = reconstruction_loss(s, f_old)
    f = f_old
    for _ in range(3):
        changed = rng.choice(n, size=int(rng.integers(1, 4)), replace=False)
        g = f.copy()
        g.u[changed] += rng.normal(size=(changed.size, f.k))
        g.v[changed] = g.u[changed] * np.sign(np.einsum("ij,ij->j", f.u, f.v))
        loss_update_rows(st_, f, g, set(changed.tolist()), s)
        f = g
    assert st_.current_loss == pytest.approx(reconstruction_loss(s, f), rel=1e-8)


def test_row_path_empty_and_full(rng):
    s = random_sym(rng, 12)
    f = random_factors(rng, 12, 3)
    st_ = MonitorState.at_restart(s, np.zeros(1), 0)
    st_.current_loss = reconstruction_loss(s, f)
    assert loss_update_rows(st_, f, f, set(), s) == st_.current_loss
    g = random_factors(rng, 12, 3)
    assert loss_update_rows(st_, f, g, set(range(12)), s) == pytest.approx(reconstruction_loss(s, g))


def test_row_path_rejects_unlisted_change(rng):
    s = random_sym(rng, 12)
    f = random_factors(rng, 12, 3)
    g = f.copy()
    g.u[5] += 1.0
    st_ = MonitorState.at_restart(s, np.zeros(1), 0)
    with pytest.raises(ValueError):
        loss_update_rows(st_, f, g, {4}, s)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_path_independence(seed, pieces):
    rng = make_rng(seed)
    n = 25
    s = random_sym(rng, n, signed=False)
    f = random_factors(rng, n, 3)
    total = DeltaMatrix(n)
    for i in range(n):
        for j in range(i + 1, n):
            if s.get(i, j) == 0 and rng.random() < 0.05:
                total.set(i, j, 1.0)
    entries = list(total.entries())
    cuts = np.array_split(np.arange(len(entries)), pieces)

    one = MonitorState.at_restart(s, np.zeros(1), 0)
    one.current_loss = reconstruction_loss(s, f)
    loss_update_delta(one, f, s, total)

    many = MonitorState.at_restart(s, np.zeros(1), 0)
    many.current_loss = reconstruction_loss(s, f)
    s2 = s.copy()
    for idx in cuts:
        part = DeltaMatrix.from_entries(n, [entries[i] for i in idx])
        loss_update_delta(many, f, s2, part)
        s2.apply(part)
    assert many.current_loss == pytest.approx(one.current_loss, rel=1e-10)
