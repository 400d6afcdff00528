import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dmace.errors import ContractError, ShapeError
from dmace.numerics import AdamState, Tape, adam_step, adjoint, cmatmul, complex_soft_threshold, lambda_max
from oracles import crandn, fd_gradient, hermitian_eigvals, matmul_loops, max_rel_err

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
cvec = arrays(np.complex128, st.integers(1, 12), elements=st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))


# ----- cmatmul / adjoint -----


def test_matmul_identity_and_zero():
    rng = np.random.default_rng(0)
    b = crandn(rng, 3, 4)
    np.testing.assert_array_equal(cmatmul(np.eye(3), b), b)
    assert not np.any(cmatmul(crandn(rng, 2, 3), np.zeros((3, 5))))


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a, b = crandn(rng, 4, 3), crandn(rng, 3, 2)
    np.testing.assert_allclose(cmatmul(a, b), matmul_loops(a, b), rtol=0, atol=1e-12)


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        cmatmul(np.ones((2, 3)), np.ones((2, 3)))


def test_adjoint_examples():
    assert adjoint(np.array([[1j]]))[0, 0] == -1j
    s = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_array_equal(adjoint(s), s)
    a = crandn(np.random.default_rng(2), 3, 2)
    ah = adjoint(a)
    for i in range(2):
        for j in range(3):
            assert ah[i, j] == np.conj(a[j, i])


@given(arrays(np.complex128, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=st.complex_numbers(max_magnitude=1e6, allow_nan=False)))
def test_adjoint_involution(a):
    np.testing.assert_array_equal(adjoint(adjoint(a)), a)


# ----- soft threshold -----


def test_soft_threshold_examples():
    assert complex_soft_threshold(np.array([0j]), 0.7)[0] == 0
    x = crandn(np.random.default_rng(3), 6)
    np.testing.assert_array_equal(complex_soft_threshold(x, 0.0), x)
    out = complex_soft_threshold(np.array([3 * np.exp(1j * np.pi / 4)]), 1.0)
    np.testing.assert_allclose(out, [2 * np.exp(1j * np.pi / 4)], atol=1e-15)


def test_soft_threshold_rejects_negative():
    with pytest.raises(ValueError):
        complex_soft_threshold(np.ones(2), -1.0)


@given(cvec, st.floats(0, 1e3))
def test_soft_threshold_magnitude_and_phase(x, eta):
    out = complex_soft_threshold(x, eta)
    np.testing.assert_allclose(np.abs(out), np.maximum(np.abs(x) - eta, 0), atol=1e-12 * max(1.0, np.abs(x).max()))
    nz = np.abs(out) > 0
    np.testing.assert_allclose(out[nz] / np.abs(out[nz]), x[nz] / np.abs(x[nz]), atol=1e-12)


# ----- lambda_max -----


def test_lambda_max_examples():
    assert abs(lambda_max(np.eye(5)).value - 1) < 1e-12
    assert abs(lambda_max(np.diag([1.0, 2.0, 3.0])).value - 3) < 1e-8


def test_lambda_max_matches_jacobi_oracle():
    rng = np.random.default_rng(4)
    for _ in range(5):
        b = crandn(rng, 6, 6)
        m = b.conj().T @ b
        r = lambda_max(m)
        assert r.converged
        assert abs(r.value - hermitian_eigvals(m).max()) < 1e-8 * max(1.0, r.value)


def test_lambda_max_is_squared_spectral_norm():
    rng = np.random.default_rng(5)
    psi = crandn(rng, 4, 9)
    lam = lambda_max(psi.conj().T @ psi).value
    assert lam >= 0
    assert abs(lam - np.linalg.norm(psi, 2) ** 2) < 1e-8 * lam


def test_lambda_max_errors_and_cap():
    with pytest.raises(ShapeError):
        lambda_max(np.ones((2, 3)))
    # two eigenvalues of equal size and opposite sign never settle under power iteration
    r = lambda_max(np.diag([1.0, 0.999999]), tol=1e-16, max_iter=3)
    assert not r.converged and r.iterations == 3


# ----- tape -----


def test_backward_real_part_and_modulus():
    t = Tape()
    w = t.param(np.array(1.5 - 0.5j), "w")
    g = t.backward(t.real(w))
    assert g["w"] == 1.0
    t = Tape()
    w0 = np.array([[0.3 + 0.8j]])
    w = t.param(w0, "w")
    loss = t.sum(t.mul(t.colnorm(w), t.colnorm(w)))
    np.testing.assert_allclose(t.backward(loss)["w"], 2 * w0, atol=1e-14)


def test_backward_rejects_non_scalar():
    t = Tape()
    w = t.param(np.ones((2, 1)), "w")
    with pytest.raises(ContractError):
        t.backward(w)
    t = Tape()
    w = t.param(np.array(1j), "w")
    with pytest.raises(ContractError):
        t.backward(w)


def test_tape_rejects_foreign_variables_and_duplicates():
    a, b = Tape(), Tape()
    x = a.param(np.ones((1, 1)), "x")
    with pytest.raises(ContractError):
        b.matmul(x, np.ones((1, 1)))
    with pytest.raises(ContractError):
        a.param(np.ones(1), "x")


def test_tape_order_is_topological():
    t = Tape()
    x = t.param(crandn(np.random.default_rng(0), 3, 2), "x")
    y = t.matmul(x.H, x)
    z = t.sum(t.colnorm(y))
    for i, parents in enumerate(t._parents):
        assert all(p < i for p in parents)
    assert z.idx == len(t) - 1


def _primitive_losses():
    """(params, loss builder) pairs covering every differentiable primitive."""
    rng = np.random.default_rng(11)
    a = crandn(rng, 3, 4)
    w = rng.standard_normal(4)

    def f_matmul(t, p):
        return t.sum(t.colnorm(t.matmul(p["A"], p["B"]) - 0.3))

    def f_adjoint(t, p):
        return t.sum(t.colnorm(t.matmul(p["A"].H, p["A"])))

    def f_mul(t, p):
        return t.sum(t.colnorm(t.sub(t.mul(p["A"], p["c"]), t.mul(p["A"], 0.5))))

    def f_shrink(t, p):
        return t.sum(t.colnorm(t.soft_threshold(p["A"], t.take(p["eta"], 0))))

    def f_phase(t, p):
        q = (t.expj(t.sigmoid_phase(p["w"])) + 1j) * 0.5
        return t.sum(t.colnorm(t.mul(t.const(a), q)))

    return [
        ({"A": crandn(rng, 3, 2), "B": crandn(rng, 2, 4)}, f_matmul),
        ({"A": crandn(rng, 3, 2)}, f_adjoint),
        ({"A": crandn(rng, 3, 2), "c": crandn(rng, 1, 2)}, f_mul),
        ({"A": crandn(rng, 5, 3), "eta": np.array([0.2])}, f_shrink),
        ({"w": w}, f_phase),
    ]


@pytest.mark.parametrize("case", range(5))
def test_primitives_match_finite_differences(case):
    params, build = _primitive_losses()[case]
    rng = np.random.default_rng(case)
    for _ in range(10):
        p = {k: v + 0.1 * (crandn(rng, *v.shape) if np.iscomplexobj(v) else rng.standard_normal(v.shape)) for k, v in params.items()}
        if "eta" in p:
            # keep away from the shrinkage kink
            p["eta"] = np.abs(p["eta"])
            if np.min(np.abs(np.abs(p["A"]) - p["eta"][0])) < 1e-3:
                continue

        def f(q):
            t = Tape()
            return float(build(t, {k: t.param(v, k) for k, v in q.items()}).value)

        t = Tape()
        loss = build(t, {k: t.param(v, k) for k, v in p.items()})
        assert max_rel_err(t.backward(loss), fd_gradient(f, p)) < 1e-5


# ----- adam -----


def test_adam_zero_gradient_is_a_no_op():
    p = {"w": np.array([1.0 + 2j, -3.0])}
    out = adam_step(p, {"w": np.zeros(2, dtype=complex)}, AdamState(lr=0.1))
    np.testing.assert_array_equal(out["w"], p["w"])


def test_adam_first_step_moves_by_lr():
    g = np.array([0.3, -2.0, 0.7])
    st_ = AdamState(lr=1e-3)
    out = adam_step({"w": np.zeros(3)}, {"w": g}, st_)
    # mhat / sqrt(vhat) = sign(g) on the first step, up to eps
    np.testing.assert_allclose(out["w"], -1e-3 * np.sign(g), atol=1e-9)
    assert st_.step == 1


def test_adam_complex_components_are_independent():
    out = adam_step({"w": np.array([0j])}, {"w": np.array([2.0 - 0.01j])}, AdamState(lr=1e-2))
    np.testing.assert_allclose(out["w"], [-1e-2 + 1e-2j], atol=1e-7)


def test_adam_constant_gradient_descends():
    state = AdamState(lr=1e-2)
    p = {"w": np.array([0.0, 0.0])}
    for k in range(50):
        p = adam_step(p, {"w": np.array([1.0, -1.0])}, state)
        assert state.step == k + 1
    assert p["w"][0] < 0 < p["w"][1]


def test_adam_shape_errors():
    with pytest.raises(ShapeError):
        adam_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())
    state = AdamState()
    adam_step({"w": np.zeros(2)}, {"w": np.ones(2)}, state)
    with pytest.raises(ShapeError):
        adam_step({"w": np.zeros(3)}, {"w": np.ones(3)}, state)
