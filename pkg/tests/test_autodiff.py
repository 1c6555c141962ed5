import numpy as np
import pytest

from graded_transformer import autodiff as ad
from graded_transformer import tensor
from graded_transformer.errors import NonFinite, NotScalarRoot

from conftest import assert_close


def scalar(fn, point):
    tape = ad.Tape()
    with ad.recording(tape):
        nodes = {k: tape.param(k, v) for k, v in point.items()}
        root = fn(nodes)
    return tape, root


class TestBackward:
    def test_sum_gives_ones(self):
        tape, root = scalar(lambda p: ad.sum_all(p["w"]), {"w": np.ones((2, 2))})
        assert_close(tape.backward(root)["w"], np.ones((2, 2)))

    def test_squared_norm_gives_2x(self):
        x = np.array([[1.0, -2.0, 3.0]])
        tape, root = scalar(lambda p: ad.sum_all(ad.mul(p["x"], p["x"])), {"x": x})
        assert_close(tape.backward(root)["x"], 2 * x)

    def test_graded_mse_hand_case(self):
        # (1/n) sum q_i (y_i - yhat_i)^2 with q=(2,3), y-yhat=(1,0), n=2:
        # d/dyhat = (-2 q_i (y_i - yhat_i) / n) = (-2, 0)
        y = np.array([[1.0, 5.0]])
        yhat = np.array([[0.0, 5.0]])
        q = np.array([[2.0, 3.0]])

        def loss(p):
            diff = ad.sub(ad.wrap(y), p["yhat"])
            return ad.scale(ad.sum_all(ad.scale_cols(ad.mul(diff, diff), q)), 0.5)

        tape, root = scalar(loss, {"yhat": yhat})
        assert_close(tape.backward(root)["yhat"], [[-2.0, 0.0]])

    def test_not_scalar_root(self):
        tape = ad.Tape()
        with ad.recording(tape):
            x = tape.param("x", np.ones((2, 2)))
            y = ad.mul(x, x)
        with pytest.raises(NotScalarRoot):
            tape.backward(y)

    def test_unused_leaf_gets_zeros(self):
        tape = ad.Tape()
        with ad.recording(tape):
            x = tape.param("x", np.ones((1, 2)))
            unused = tape.param("unused", np.ones((2, 2)))
            root = ad.sum_all(x)
        grads = tape.backward(root)
        assert_close(grads["unused"], np.zeros((2, 2)))


class TestGradCheck:
    def test_quadratic_is_exact(self):
        err = ad.grad_check(
            lambda p: ad.sum_all(ad.mul(p["x"], p["x"])),
            {"x": np.array([[0.7, -1.3, 2.1]])},
            h=1e-5,
        )
        assert err <= 1e-6

    def test_egt_score_grade_derivative(self):
        # score q * lam**q * k; the grade derivative is (lam**q + q lam**q ln lam) k
        g = np.random.default_rng(11)
        for _ in range(20):
            qv = float(g.uniform(0.1, 2.0))
            lam = float(g.uniform(1.2, 3.0))
            kv = float(g.normal())

            def score(p):
                return ad.scale(ad.mul(p["q"], ad.pow_base(lam, p["q"])), kv)

            tape, root = scalar(score, {"q": np.array([[qv]])})
            analytic = tape.backward(root)["q"][0, 0]
            closed = (lam**qv + qv * lam**qv * np.log(lam)) * kv
            assert abs(analytic - closed) <= 1e-6 * max(1.0, abs(closed))
            fd = ad.grad_check(score, {"q": np.array([[qv]])}, h=1e-5)
            assert fd <= 1e-4

    def test_nonfinite_probe(self):
        def f(p):
            return ad.sum_all(ad.log(p["x"]))

        with pytest.raises(NonFinite):
            ad.grad_check(f, {"x": np.array([[1e-6]])}, h=1e-5)


class TestPrimitiveGradients:
    @pytest.mark.parametrize("case", [
        "matmul", "softmax", "layer_norm", "graded_relu", "exp_activation",
        "scale_cols", "normalize_rows", "add_rowvec", "hstack", "embedding",
        "sigmoid", "transpose",
    ])
    def test_primitive(self, case):
        g = np.random.default_rng(hash(case) % 2**32)
        worst = 0.0
        for _ in range(20):
            x0 = g.normal(0.0, 1.0, (3, 4))
            up = g.uniform(0.5, 1.5, (3, 4))
            q = g.uniform(0.8, 2.5, (1, 4))
            sx = np.where(np.abs(x0) < 0.2, x0 + 0.5, x0)
            if case == "matmul":
                y0 = g.normal(0.0, 1.0, (4, 3))
                upm = g.uniform(0.5, 1.5, (3, 3))
                fn = lambda p: ad.sum_all(ad.mul(ad.matmul(p["x"], p["y"]), upm))
                point = {"x": x0, "y": y0}
            elif case == "softmax":
                fn = lambda p: ad.sum_all(ad.mul(ad.softmax_rows(p["x"]), up))
                point = {"x": x0}
            elif case == "layer_norm":
                gam = g.uniform(0.8, 1.2, (1, 4))
                bet = g.normal(0.0, 0.1, (1, 4))
                fn = lambda p: ad.sum_all(ad.mul(
                    ad.layer_norm_rows(p["x"], p["g"], p["b"], 1e-5), up))
                point = {"x": x0, "g": gam, "b": bet}
            elif case == "graded_relu":
                fn = lambda p: ad.sum_all(ad.mul(ad.graded_relu_op(p["x"], q), up))
                point = {"x": sx}
            elif case == "exp_activation":
                fn = lambda p: ad.sum_all(ad.mul(ad.exp_activation_op(p["x"], q), up))
                point = {"x": x0}
            elif case == "scale_cols":
                w0 = g.uniform(0.5, 1.5, (1, 4))
                fn = lambda p: ad.sum_all(ad.mul(ad.scale_cols(p["x"], p["w"]), up))
                point = {"x": x0, "w": w0}
            elif case == "normalize_rows":
                fn = lambda p: ad.sum_all(ad.mul(ad.normalize_rows(p["x"]), up))
                point = {"x": x0 + 2.0}
            elif case == "add_rowvec":
                b0 = g.normal(0.0, 1.0, (1, 4))
                fn = lambda p: ad.sum_all(ad.mul(ad.add_rowvec(p["x"], p["b"]), up))
                point = {"x": x0, "b": b0}
            elif case == "hstack":
                y0 = g.normal(0.0, 1.0, (3, 2))
                up6 = g.uniform(0.5, 1.5, (3, 6))
                fn = lambda p: ad.sum_all(ad.mul(ad.hstack([p["x"], p["y"]]), up6))
                point = {"x": x0, "y": y0}
            elif case == "embedding":
                table = g.normal(0.0, 1.0, (5, 4))
                ids = [0, 3, 3]
                fn = lambda p: ad.sum_all(ad.mul(ad.embedding_rows(p["t"], ids), up))
                point = {"t": table}
            elif case == "sigmoid":
                fn = lambda p: ad.sum_all(ad.mul(ad.sigmoid(p["x"]), up))
                point = {"x": x0}
            else:  # transpose
                up_t = g.uniform(0.5, 1.5, (4, 3))
                fn = lambda p: ad.sum_all(ad.mul(ad.transpose(p["x"]), up_t))
                point = {"x": x0}
            worst = max(worst, ad.grad_check(fn, point, h=1e-5))
        assert worst <= 1e-4, f"{case}: {worst:.3e}"

    def test_softmax_jacobian_bruteforce(self):
        g = np.random.default_rng(2)
        for _ in range(10):
            x = g.normal(0.0, 1.0, (3, 3))
            up = g.normal(0.0, 1.0, (3, 3))
            tape = ad.Tape()
            with ad.recording(tape):
                xn = tape.param("x", x)
                root = ad.sum_all(ad.mul(ad.softmax_rows(xn), up))
            got = tape.backward(root)["x"]
            p = tensor.softmax_rows(x)
            want = np.stack([
                (np.diag(p[i]) - np.outer(p[i], p[i])) @ up[i] for i in range(3)
            ])
            assert_close(got, want, tol=1e-8)
