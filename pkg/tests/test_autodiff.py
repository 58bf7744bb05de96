import numpy as np
import pytest

from myodyn import autodiff as ad
from myodyn.errors import ContractError, DimensionError


def test_mul_value_and_partials():
    tape = ad.Tape()
    a = tape.leaf(2.0)
    b = tape.leaf(3.0)
    out = ad.mul(a, b)
    assert float(out.value) == 6.0
    grads = ad.backward(out)
    assert float(grads.wrt(a)) == 3.0
    assert float(grads.wrt(b)) == 2.0


def test_sigmoid_at_zero():
    tape = ad.Tape()
    x = tape.leaf(0.0)
    y = ad.sigmoid(x)
    assert float(y.value) == 0.5
    grads = ad.backward(y)
    assert float(grads.wrt(x)) == pytest.approx(0.25, abs=1e-15)


def test_matmul_against_naive_loops():
    rng = np.random.default_rng(5)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((3, 2))
    tape = ad.Tape()
    out = ad.matmul(tape.leaf(a), tape.leaf(b))
    naive = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            for k in range(3):
                naive[i, j] += a[i, k] * b[k, j]
    assert np.allclose(out.value, naive, rtol=0, atol=1e-14)


def test_matmul_shape_mismatch_reports_both_shapes():
    tape = ad.Tape()
    a = tape.leaf(np.zeros((2, 3)))
    b = tape.leaf(np.zeros((2, 3)))
    with pytest.raises(DimensionError) as err:
        ad.matmul(a, b)
    assert "(2, 3)" in str(err.value)


def test_elementwise_shape_mismatch():
    tape = ad.Tape()
    a = tape.leaf(np.zeros((2, 3)))
    b = tape.leaf(np.zeros((4, 5)))
    with pytest.raises(DimensionError):
        ad.add(a, b)


def test_backward_square():
    tape = ad.Tape()
    x = tape.leaf(3.0)
    y = ad.square(x)
    grads = ad.backward(y)
    assert float(grads.wrt(x)) == 6.0


def test_backward_requires_scalar_root():
    tape = ad.Tape()
    x = tape.leaf(np.ones((2, 2)))
    with pytest.raises(ContractError):
        ad.backward(ad.square(x))


def test_backward_sigmoid_chain_matches_finite_differences():
    rng = np.random.default_rng(11)
    w = rng.standard_normal((4, 3))
    x = rng.standard_normal((3, 2))

    def fn(tape, leaves):
        return ad.sum_(ad.sigmoid(ad.matmul(leaves[0], leaves[1])))

    report = ad.grad_check(fn, [w, x], h=1e-6, tol=1e-6)
    assert report.ok, report


def test_unreachable_leaf_gets_exact_zero():
    tape = ad.Tape()
    x = tape.leaf(2.0)
    unused = tape.leaf(np.ones((3,)))
    grads = ad.backward(ad.square(x))
    assert np.array_equal(grads.wrt(unused), np.zeros(3))


def test_grad_check_quadratic_is_near_exact():
    rng = np.random.default_rng(3)
    q = rng.standard_normal((4, 4))
    q = q + q.T

    def fn(tape, leaves):
        x = leaves[0]
        return ad.sum_(ad.mul(x, ad.matmul(x, tape.constant(q))))

    report = ad.grad_check(fn, [rng.standard_normal((1, 4))], h=1e-6)
    assert report.max_rel_err < 1e-9


def test_grad_check_flags_corrupted_partial():
    def fn(tape, leaves):
        x = leaves[0]
        # a square op with a deliberately wrong local derivative
        def bad_vjp(g):
            return (g * (3.0 * x.value),)
        wrong = tape._append(x.value * x.value, (x.node_id,), bad_vjp)
        return ad.sum_(wrong)

    report = ad.grad_check(fn, [np.array([1.0, 2.0])], tol=1e-4)
    assert not report.ok
    assert report.worst_leaf == 0
    assert report.worst_coord in ((0,), (1,))


def test_grad_check_reports_non_finite():
    def fn(tape, leaves):
        return ad.sum_(ad.div(leaves[0], tape.constant(0.0)))

    report = ad.grad_check(fn, [np.array([1.0])])
    assert not report.ok
    assert report.message


def test_adjoint_linearity():
    rng = np.random.default_rng(9)
    x0 = rng.standard_normal((3, 3))
    alpha, beta = 2.5, -1.25

    def parts(x):
        f = ad.sum_(ad.square(x))
        g = ad.sum_(ad.sin(x))
        return f, g

    tape = ad.Tape()
    x = tape.leaf(x0)
    f, g = parts(x)
    gf = ad.backward(f).wrt(x)
    gg = ad.backward(g).wrt(x)

    tape2 = ad.Tape()
    x2 = tape2.leaf(x0)
    f2, g2 = parts(x2)
    combined = ad.add(ad.mul(alpha, f2), ad.mul(beta, g2))
    gc = ad.backward(combined).wrt(x2)
    assert np.allclose(gc, alpha * gf + beta * gg, rtol=0, atol=1e-12)


def test_tape_replay_is_bit_identical():
    rng = np.random.default_rng(21)
    w = rng.standard_normal((5, 5))
    x = rng.standard_normal((5, 2))

    def run():
        tape = ad.Tape()
        lw = tape.leaf(w)
        lx = tape.leaf(x)
        root = ad.mean(ad.square(ad.tanh(ad.matmul(lw, lx))))
        grads = ad.backward(root)
        return grads.wrt(lw), grads.wrt(lx)

    g1 = run()
    g2 = run()
    assert np.array_equal(g1[0], g2[0])
    assert np.array_equal(g1[1], g2[1])


def test_asin_clamps_at_domain_edge():
    tape = ad.Tape()
    x = tape.leaf(np.array([1.0 + 1e-9, -1.0 - 1e-9, 0.5]))
    y = ad.asin(x)
    assert np.isfinite(y.value).all()
    grads = ad.backward(ad.sum_(y))
    assert np.isfinite(grads.wrt(x)).all()


def test_concat_and_slice_roundtrip_gradients():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((2, 3))
    b = rng.standard_normal((4, 3))

    def fn(tape, leaves):
        joined = ad.concat([leaves[0], leaves[1]], axis=0)
        top = ad.slice_axis(joined, 0, 0, 2)
        return ad.sum_(ad.square(top))

    report = ad.grad_check(fn, [a, b], tol=1e-6)
    assert report.ok
    # gradient of the bottom part is exactly zero
    tape = ad.Tape()
    la, lb = tape.leaf(a), tape.leaf(b)
    joined = ad.concat([la, lb], axis=0)
    root = ad.sum_(ad.square(ad.slice_axis(joined, 0, 0, 2)))
    assert np.array_equal(ad.backward(root).wrt(lb), np.zeros_like(b))


def test_operator_sugar_matches_functions():
    tape = ad.Tape()
    x = tape.leaf(np.array([1.0, 2.0]))
    y = tape.leaf(np.array([3.0, 4.0]))
    assert np.array_equal((x + y).value, ad.add(x, y).value)
    assert np.array_equal((x - y).value, ad.sub(x, y).value)
    assert np.array_equal((x * y).value, ad.mul(x, y).value)
    assert np.array_equal((x / y).value, ad.div(x, y).value)
    assert np.array_equal((1.0 - x).value, np.array([0.0, -1.0]))
    assert np.array_equal((-x).value, np.array([-1.0, -2.0]))


def test_vars_on_different_tapes_rejected():
    t1, t2 = ad.Tape(), ad.Tape()
    with pytest.raises(ContractError):
        ad.add(t1.leaf(1.0), t2.leaf(2.0))


def test_broadcast_gradient_shapes():
    rng = np.random.default_rng(4)
    m = rng.standard_normal((3, 4))
    bias = rng.standard_normal((4,))

    def fn(tape, leaves):
        return ad.sum_(ad.square(ad.add(leaves[0], leaves[1])))

    report = ad.grad_check(fn, [m, bias], tol=1e-6)
    assert report.ok
