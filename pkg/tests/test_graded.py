import numpy as np
import pytest

from graded_transformer import graded
from graded_transformer import graded_space as gs
from graded_transformer import tensor
from graded_transformer import transformer as tf
from graded_transformer.errors import (
    InvalidSpec,
    NotRowStochastic,
    PositionOutOfRange,
    ZeroAfterGrading,
)
from graded_transformer.tensor import Rng

from conftest import assert_close


def make_gcfg(toy_model, **kw):
    cfg, _ = toy_model
    defaults = dict(model=cfg, grades=np.array([0.0, 0.5, 1.0, 2.0]))
    defaults.update(kw)
    return graded.GradedModelConfig(**defaults)


class TestConfig:
    def test_head_grades_default_to_slices(self, toy_model):
        gcfg = make_gcfg(toy_model)
        assert_close(gcfg.head_grades[0], [0.0, 0.5])
        assert_close(gcfg.head_grades[1], [1.0, 2.0])

    def test_linear_decay_positivity(self, toy_model):
        with pytest.raises(InvalidSpec):
            make_gcfg(toy_model, positional="linear_decay", alpha=0.2)  # 0.2*16 >= 1

    def test_exponential_needs_base_above_one(self, toy_model):
        with pytest.raises(InvalidSpec):
            make_gcfg(toy_model, mode=gs.EXPONENTIAL, base=1.0)

    def test_negative_grades_rejected(self, toy_model):
        with pytest.raises(InvalidSpec):
            make_gcfg(toy_model, grades=np.array([-1.0, 0.0, 0.0, 0.0]))

    def test_max_weight(self, toy_model):
        gcfg = make_gcfg(toy_model)
        assert gcfg.max_weight() == 3.0
        ecfg = make_gcfg(toy_model, mode=gs.EXPONENTIAL, base=2.0)
        assert ecfg.max_weight() == pytest.approx(4.0)
        assert ecfg.max_weight(lam=3.0) == pytest.approx(9.0)


class TestGradedInput:
    def test_photonic(self):
        cfg = tf.ModelConfig(vocab_size=0, d_model=3, n_heads=1, n_layers=1, d_ff=4)
        gcfg = graded.GradedModelConfig(
            model=cfg, grades=np.array([0.0, 1.0, 2.0]),
            weight_map=gs.affine_map(1.0, 0.1))
        out = graded.graded_input(np.array([1.0, 0.5, 0.1]), gcfg)
        assert_close(out, [0.871, 0.479, 0.105], tol=5e-4)
        assert abs(float(np.linalg.norm(out)) - 1.0) <= 1e-12

    def test_identity_grading_no_normalize(self, toy_model):
        gcfg = make_gcfg(toy_model, grades=np.zeros(4), normalize_inputs=False)
        x = Rng(0).generator.normal(size=(3, 4))
        assert np.array_equal(graded.graded_input(x, gcfg), x)

    def test_unit_norm_when_normalizing(self, toy_model):
        gcfg = make_gcfg(toy_model)
        x = Rng(1).generator.normal(size=(5, 4))
        out = graded.graded_input(x, gcfg)
        assert_close(np.linalg.norm(out, axis=1), np.ones(5), tol=1e-12)

    def test_zero_after_grading(self, toy_model):
        gcfg = make_gcfg(toy_model)
        with pytest.raises(ZeroAfterGrading):
            graded.graded_input(np.zeros(4), gcfg)

    def test_per_position_grading(self, toy_model):
        # optional per-token tuples: row i scaled by base**q_row_i
        pos_q = np.array([[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 2.0]])
        gcfg = make_gcfg(toy_model, mode=gs.EXPONENTIAL, base=2.0,
                         grades=np.zeros(4), normalize_inputs=False,
                         position_grades=pos_q)
        x = np.ones((2, 4))
        out = graded.graded_input(x, gcfg)
        assert_close(out, [[1, 1, 1, 1], [2, 2, 1, 4]], tol=1e-12)


class TestGradedPositional:
    def test_linear_decay_factor(self, toy_model):
        gcfg = make_gcfg(toy_model, positional="linear_decay", alpha=0.05)
        assert graded.positional_scale(1, gcfg) == pytest.approx(0.95)

    def test_exp_decay_factor(self, toy_model):
        gcfg = make_gcfg(toy_model, mode=gs.EXPONENTIAL, base=2.0,
                         positional="exp_decay", alpha=1.0)
        assert graded.positional_scale(2, gcfg) == pytest.approx(0.25)

    def test_off_is_standard(self, toy_model):
        gcfg = make_gcfg(toy_model)
        pe = graded.graded_positional(3, gcfg)
        assert np.array_equal(pe, tf.positional_encoding(3, 4, 16))

    def test_position_range(self, toy_model):
        gcfg = make_gcfg(toy_model)
        with pytest.raises(PositionOutOfRange):
            graded.positional_scale(17, gcfg)


class TestGradedAttention:
    def test_identity_weights_match_standard(self, rng):
        q = tensor.randn_matrix(rng, 4, 3)
        k = tensor.randn_matrix(rng, 4, 3)
        v = tensor.randn_matrix(rng, 4, 3)
        ones = np.ones(3)
        base, attn_base = graded.graded_attention(q, k, v, ones, "none")
        for variant in ("scores", "queries_keys", "multi_head", "values"):
            out, attn = graded.graded_attention(q, k, v, ones, variant)
            assert np.array_equal(out, base)
            assert np.array_equal(attn, attn_base)

    def test_scores_match_bruteforce(self, rng):
        n, dk = 3, 4
        q = tensor.randn_matrix(rng, n, dk)
        k = tensor.randn_matrix(rng, n, dk)
        v = tensor.randn_matrix(rng, n, dk)
        w = rng.generator.uniform(0.5, 2.0, dk)
        _, attn = graded.graded_attention(q, k, v, w, "scores")
        scores = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                scores[i, j] = sum(w[m] * q[i, m] * k[j, m] for m in range(dk))
        want = tensor.softmax_rows(scores / np.sqrt(dk))
        assert_close(attn, want, tol=1e-12)

    def test_values_variant_scales_values(self, rng):
        n, dk = 4, 2
        q = tensor.randn_matrix(rng, n, dk)
        k = tensor.randn_matrix(rng, n, dk)
        v = tensor.randn_matrix(rng, n, dk)
        w = np.array([2.0, 0.5])
        out, attn = graded.graded_attention(q, k, v, w, "values")
        _, attn_std = graded.graded_attention(q, k, v, np.ones(dk), "none")
        assert np.array_equal(attn, attn_std)
        assert_close(out, attn @ (v * w), tol=1e-15)

    def test_egt_concentration_monotone(self):
        g = Rng(33).generator
        grades = np.array([0.5, 2.5, 1.0, 0.2])
        q = g.normal(size=(4, 4))
        k = g.normal(size=(4, 4))
        shares = []
        for lam in (2.0, 4.0, 8.0, 16.0):
            w = np.exp(grades * np.log(lam))
            contrib = np.abs(q[:, None, :] * k[None, :, :] * w)
            shares.append(float((contrib[:, :, 1] / contrib.sum(axis=2)).mean()))
        assert all(a < b for a, b in zip(shares, shares[1:]))


class TestGradedFfnOutput:
    def test_identity_weights(self, toy_model):
        cfg, params = toy_model
        gcfg = make_gcfg(toy_model, grades=np.zeros(4), normalize_ffn=False)
        x = Rng(2).generator.normal(size=4)
        out = graded.graded_ffn_vector(x, params["enc0.w1"], params["enc0.b1"],
                                       params["enc0.w2"], params["enc0.b2"], gcfg)
        hidden = np.maximum(x @ params["enc0.w1"] + params["enc0.b1"].ravel(), 0)
        want = hidden @ params["enc0.w2"] + params["enc0.b2"].ravel()
        assert np.array_equal(out, want)

    def test_zero_weights_give_scaled_bias(self, toy_model):
        cfg, _ = toy_model
        gcfg = make_gcfg(toy_model, normalize_ffn=True)
        b2 = np.array([1.0, 0.5, -0.5, 2.0])
        out = graded.graded_ffn_vector(
            np.ones(4), np.zeros((4, 8)), np.zeros(8), np.zeros((8, 4)), b2, gcfg)
        scaled = b2 * gcfg.weights()
        assert_close(out, scaled / np.linalg.norm(scaled), tol=1e-12)

    def test_ffn_lipschitz_bound(self, toy_model):
        cfg, params = toy_model
        gcfg = make_gcfg(toy_model, normalize_ffn=False)
        w1, w2 = params["enc0.w1"], params["enc0.w2"]
        lip = tensor.spectral_norm(w1, 300, 0) * tensor.spectral_norm(w2, 300, 1)
        bound = gcfg.max_weight() * lip
        g = Rng(3).generator
        for _ in range(50):
            x, y = g.normal(size=4), g.normal(size=4)
            fx = graded.graded_ffn_vector(x, w1, params["enc0.b1"], w2, params["enc0.b2"], gcfg)
            fy = graded.graded_ffn_vector(y, w1, params["enc0.b1"], w2, params["enc0.b2"], gcfg)
            ratio = np.linalg.norm(fx - fy) / np.linalg.norm(x - y)
            assert ratio <= bound * (1 + 1e-6)

    def test_graded_output_softmax(self, toy_model):
        gcfg = make_gcfg(toy_model)
        g = Rng(4).generator
        probs = graded.graded_output_vector(g.normal(size=4), g.normal(size=(4, 5)),
                                            g.normal(size=5), gcfg)
        assert probs.shape == (5,)
        assert abs(probs.sum() - 1.0) <= 1e-12


class TestForward:
    def test_unit_grading_reduces_to_baseline(self, toy_model):
        cfg, params = toy_model
        ucfg = graded.unit_config(cfg)
        for i in range(5):
            x = Rng(50 + i).generator.normal(size=(6, 4))
            z, _ = graded.lgt_forward(params, ucfg, x)
            assert np.array_equal(z, tf.encode(params, cfg, x))

    def test_egt_zero_grades_reduce(self, toy_model):
        cfg, params = toy_model
        ecfg = graded.GradedModelConfig(model=cfg, mode=gs.EXPONENTIAL, base=2.0,
                                        grades=np.zeros(4), normalize_inputs=False)
        x = Rng(60).generator.normal(size=(6, 4))
        z, _ = graded.egt_forward(params, ecfg, x)
        assert np.array_equal(z, tf.encode(params, cfg, x))

    def test_forward_deterministic(self, toy_model):
        gcfg = make_gcfg(toy_model, attention_variant="scores")
        cfg, params = toy_model
        x = Rng(70).generator.normal(size=(5, 4))
        z1, l1 = graded.lgt_forward(params, gcfg, x)
        z2, l2 = graded.lgt_forward(params, gcfg, x)
        assert np.array_equal(z1, z2) and np.array_equal(l1, l2)

    def test_egt_input_row_scaling(self, toy_model):
        cfg, params = toy_model
        ecfg = graded.GradedModelConfig(model=cfg, mode=gs.EXPONENTIAL, base=2.0,
                                        grades=np.array([0.0, 1.0, 2.0, 0.0]),
                                        normalize_inputs=False)
        x = np.ones((2, 4))
        out = graded.graded_input(x, ecfg)
        assert_close(out, np.tile([1.0, 2.0, 4.0, 1.0], (2, 1)), tol=1e-12)

    def test_grading_stage_noise_bound(self, toy_model):
        gcfg = make_gcfg(toy_model, normalize_inputs=False)
        g = Rng(5).generator
        w_max = gcfg.max_weight()
        for _ in range(100):
            x = g.normal(size=(4, 4))
            delta = g.normal(size=(4, 4)) * 0.3
            lhs = np.linalg.norm(graded.graded_input(x + delta, gcfg)
                                 - graded.graded_input(x, gcfg))
            assert lhs <= w_max * np.linalg.norm(delta) * (1 + 1e-12)

    def test_graded_generate_matches_baseline_under_unit_grading(self, token_model):
        cfg, params = token_model
        ucfg = graded.unit_config(cfg)
        for seed in range(5):
            toks = list(Rng(seed).generator.integers(3, cfg.vocab_size + 1, size=4))
            assert graded.graded_generate(params, ucfg, toks) == \
                tf.generate(params, cfg, toks)


class TestConstructAttentionTarget:
    def test_identity_recovered(self):
        delta = 1e-3
        *_, err = graded.construct_attention_target(np.eye(4), delta)
        assert err <= delta

    def test_uniform_exact(self):
        a0 = np.full((4, 4), 0.25)
        *_, err = graded.construct_attention_target(a0, 1e-3)
        assert err <= 1e-12

    def test_random_targets(self):
        g = Rng(8).generator
        for delta in (1e-3, 1e-6):
            for _ in range(20):
                n = int(g.choice([4, 8]))
                a0 = g.uniform(0.0, 1.0, (n, n))
                a0 /= a0.sum(axis=1, keepdims=True)
                q, k, v, err = graded.construct_attention_target(a0, delta)
                assert err <= delta
                # the returned triple really does reproduce the target
                attn = tensor.softmax_rows(q @ k.T / np.sqrt(n)) @ v
                assert np.linalg.norm(attn - a0) <= delta

    def test_not_row_stochastic(self):
        with pytest.raises(NotRowStochastic):
            graded.construct_attention_target(np.ones((3, 3)), 1e-3)
