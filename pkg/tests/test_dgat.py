import math

import numpy as np
import pytest

from gdd import autodiff as ad
from gdd.autodiff import Var
from gdd.dgat import (
    DgatLayerParams,
    DualHeadParams,
    GraphBatch,
    RelHeadParams,
    dgat_layer,
    dual_head,
    global_forward_var,
    relation_update,
    relational_head,
    target_edge_attention,
    target_node_attention,
)
from gdd.numeric import Rng, circ_corr_fft, softmax


def make_dual(rng, a_w=6, e_w=8, d_model=6, d_head=4):
    return DualHeadParams(Wa=rng.uniform((a_w, d_head), -0.5, 0.5),
                          We=rng.uniform((e_w, d_head), -0.5, 0.5),
                          Wi=rng.uniform((d_model, d_head), -0.5, 0.5))


def make_rel(rng, e_w=8, d_model=6, d_head=4):
    return RelHeadParams(Wv=rng.uniform((d_model, d_head), -0.5, 0.5),
                         W1=rng.uniform((e_w, d_head), -0.5, 0.5),
                         b1=rng.uniform((d_head,), -0.5, 0.5),
                         W2=rng.uniform((d_head, 1), -0.5, 0.5),
                         b2=rng.uniform((1,), -0.5, 0.5))


def make_layer(rng, a_w=6, e_w=8, d_model=6, d_head=4, U=1, V=1, e_out=6):
    return DgatLayerParams(
        dual=[make_dual(rng, a_w, e_w, d_model, d_head) for _ in range(U)],
        rel=[make_rel(rng, e_w, d_model, d_head) for _ in range(V)],
        Wr=rng.uniform((e_w, e_out), -0.5, 0.5))


class TestTargetEdgeAttention:
    def test_single_edge(self):
        rng = Rng(0)
        p = make_dual(rng)
        beta = target_edge_attention(rng.uniform((6,)), rng.uniform((1, 8)), p.Wa, p.We)
        assert np.allclose(beta, [1.0])

    def test_identical_edges_uniform(self):
        rng = Rng(1)
        p = make_dual(rng)
        E = np.tile(rng.uniform((1, 8)), (2, 1))
        beta = target_edge_attention(rng.uniform((6,)), E, p.Wa, p.We)
        assert np.allclose(beta, [0.5, 0.5], atol=1e-15)

    def test_three_edge_hand_example(self):
        rng = Rng(2)
        p = make_dual(rng)
        h_a = rng.uniform((6,), -1, 1)
        E = rng.uniform((3, 8), -1, 1)
        logits = np.array([(h_a @ p.Wa) @ (E[i] @ p.We) for i in range(3)])
        assert np.allclose(target_edge_attention(h_a, E, p.Wa, p.We),
                           softmax(logits), atol=1e-12)

    def test_empty_graph_signals(self):
        p = make_dual(Rng(3))
        with pytest.raises(ValueError, match="empty graph"):
            target_edge_attention(np.zeros(6), np.zeros((0, 8)), p.Wa, p.We)


class TestTargetNodeAttention:
    def test_uniform_beta_identical_neighbors(self):
        rng = Rng(4)
        p = make_dual(rng)
        H_N = np.tile(rng.uniform((1, 6)), (3, 1))
        omega = target_node_attention(rng.uniform((6,)), H_N,
                                      np.full(3, 1 / 3), p.Wa, p.Wi)
        assert np.allclose(omega, np.full(3, 1 / 3), atol=1e-15)

    def test_single_neighbor(self):
        rng = Rng(5)
        p = make_dual(rng)
        omega = target_node_attention(rng.uniform((6,)), rng.uniform((1, 6)),
                                      np.array([1.0]), p.Wa, p.Wi)
        assert np.allclose(omega, [1.0])

    def test_beta_multiplies_logits_never_masks(self):
        rng = Rng(6)
        p = make_dual(rng)
        h_a = rng.uniform((6,), -1, 1)
        H_N = rng.uniform((2, 6), -1, 1)
        beta = np.array([1.0, 0.0])
        dots = np.array([(h_a @ p.Wa) @ (H_N[i] @ p.Wi) for i in range(2)])
        # a zero beta leaves logit 0, which still takes softmax mass
        expected = softmax(np.array([dots[0], 0.0]))
        assert np.allclose(target_node_attention(h_a, H_N, beta, p.Wa, p.Wi),
                           expected, atol=1e-12)


class TestDualHead:
    def test_single_neighbor_is_composition(self):
        rng = Rng(7)
        p = make_dual(rng)
        h_a = rng.uniform((6,), -1, 1)
        H_N = rng.uniform((1, 6), -1, 1)
        E = rng.uniform((1, 8), -1, 1)
        out = dual_head(h_a, H_N, E, p)
        expected = circ_corr_fft(H_N[0] @ p.Wi, E[0] @ p.We)
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_impulse_node_returns_edge_operand(self):
        # corr(delta_0, b) = b: the identity sits on the first (conjugated)
        # operand, which is the node side of the composition
        rng = Rng(8)
        d_head = 4
        p = DualHeadParams(Wa=rng.uniform((6, d_head)), We=rng.uniform((d_head, d_head)),
                           Wi=np.eye(d_head))
        h_a = rng.uniform((6,))
        H_N = np.zeros((1, d_head))
        H_N[0, 0] = 1.0  # projects to the impulse through Wi = I
        E = rng.uniform((1, d_head))
        out = dual_head(h_a, H_N, E, p)
        assert np.max(np.abs(out - E[0] @ p.We)) < 1e-12

    def test_impulse_edge_reverses_node_operand(self):
        # with the impulse on the edge side the node operand comes back
        # index-reversed (out[k] = a[(d-k) % d]); operand order matters
        rng = Rng(8)
        d_head = 4
        p = DualHeadParams(Wa=rng.uniform((6, d_head)), We=np.eye(d_head),
                           Wi=rng.uniform((6, d_head)))
        h_a = rng.uniform((6,))
        H_N = rng.uniform((1, 6))
        E = np.zeros((1, d_head))
        E[0, 0] = 1.0
        out = dual_head(h_a, H_N, E, p)
        n_proj = H_N[0] @ p.Wi
        reversed_ = n_proj[(-np.arange(d_head)) % d_head]
        assert np.max(np.abs(out - reversed_)) < 1e-12

    def test_three_neighbor_loop_oracle(self):
        rng = Rng(9)
        p = make_dual(rng)
        h_a = rng.uniform((6,), -1, 1)
        H_N = rng.uniform((3, 6), -1, 1)
        E = rng.uniform((3, 8), -1, 1)

        a_proj = h_a @ p.Wa
        beta = softmax(np.array([a_proj @ (E[i] @ p.We) for i in range(3)]))
        omega = softmax(beta * np.array([a_proj @ (H_N[i] @ p.Wi) for i in range(3)]))
        expected = np.zeros(4)
        for i in range(3):
            expected += omega[i] * circ_corr_fft(H_N[i] @ p.Wi, E[i] @ p.We)
        assert np.max(np.abs(dual_head(h_a, H_N, E, p) - expected)) < 1e-12


class TestRelationalHead:
    def test_identical_edges_uniform_rho(self):
        rng = Rng(10)
        p = make_rel(rng)
        E = np.tile(rng.uniform((1, 8)), (4, 1))
        H_N = rng.uniform((4, 6), -1, 1)
        out = relational_head(H_N, E, p)
        expected = np.mean(H_N @ p.Wv, axis=0)
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_single_neighbor(self):
        rng = Rng(11)
        p = make_rel(rng)
        H_N = rng.uniform((1, 6))
        out = relational_head(H_N, rng.uniform((1, 8)), p)
        assert np.max(np.abs(out - H_N[0] @ p.Wv)) < 1e-12

    def test_two_neighbor_hand_example(self):
        rng = Rng(12)
        p = make_rel(rng)
        H_N = rng.uniform((2, 6), -1, 1)
        E = rng.uniform((2, 8), -1, 1)
        logits = np.array([
            float((np.maximum(E[i] @ p.W1 + p.b1, 0.0) @ p.W2 + p.b2)[0])
            for i in range(2)
        ])
        rho = softmax(logits)
        expected = rho[0] * (H_N[0] @ p.Wv) + rho[1] * (H_N[1] @ p.Wv)
        assert np.max(np.abs(relational_head(H_N, E, p) - expected)) < 1e-12


class TestRelationUpdate:
    def test_identity(self):
        E = Rng(13).uniform((3, 4))
        assert np.array_equal(relation_update(E, np.eye(4)), E)

    def test_zero(self):
        E = Rng(14).uniform((3, 4))
        assert np.array_equal(relation_update(E, np.zeros((4, 2))), np.zeros((3, 2)))

    def test_matches_matmul_oracle(self):
        rng = Rng(15)
        E = rng.uniform((5, 4), -1, 1)
        Wr = rng.uniform((4, 6), -1, 1)
        assert np.max(np.abs(relation_update(E, Wr) - E @ Wr)) < 1e-15

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape mismatch"):
            relation_update(np.zeros((3, 4)), np.zeros((5, 2)))


class TestDgatLayer:
    def test_compositional_oracle_u1_v1_m1(self):
        rng = Rng(16)
        layer = make_layer(rng)
        h_a = rng.uniform((6,), -1, 1)
        H_N = rng.uniform((1, 6), -1, 1)
        E = rng.uniform((1, 8), -1, 1)
        h_next, E_next, trace = dgat_layer(GraphBatch(h_a, H_N, E), layer, d_head=4)
        expected = np.concatenate([
            dual_head(h_a, H_N, E, layer.dual[0]),
            relational_head(H_N, E, layer.rel[0]),
        ])
        assert np.max(np.abs(h_next - expected)) < 1e-12
        assert np.max(np.abs(E_next - E @ layer.Wr)) < 1e-15
        assert trace["empty"] is False

    def test_output_width_any_m(self):
        rng = Rng(17)
        layer = make_layer(rng, U=2, V=1)
        for m in (1, 3, 6):
            h, _, _ = dgat_layer(GraphBatch(Rng(0).uniform((6,)),
                                            Rng(1).uniform((m, 6)),
                                            Rng(2).uniform((m, 8))), layer, d_head=4)
            assert h.shape == (12,)

    def test_empty_graph_zero_vector_flagged(self):
        layer = make_layer(Rng(18))
        h, _, trace = dgat_layer(GraphBatch(np.ones(6), np.zeros((0, 6)),
                                            np.zeros((0, 8))), layer, d_head=4)
        assert np.array_equal(h, np.zeros(8))
        assert trace["empty"] is True

    def test_single_layer_stack_equals_one_layer_call(self):
        rng = Rng(25)
        layer = make_layer(rng)
        h_a = rng.uniform((6,), -1, 1)
        H_N = rng.uniform((3, 6), -1, 1)
        E = rng.uniform((3, 8), -1, 1)
        stacked, traces = global_forward_var(Var(h_a), Var(H_N), Var(E), [layer],
                                             d_head=4)
        single, _, _ = dgat_layer(GraphBatch(h_a, H_N, E), layer, d_head=4)
        assert np.array_equal(stacked.value, single)
        assert len(traces) == 1

    def test_two_stacked_layers_plumb(self):
        rng = Rng(19)
        layer0 = make_layer(rng, a_w=6, e_w=8, e_out=6)
        layer1 = make_layer(rng, a_w=8, e_w=6, e_out=6)
        h_a = Var(rng.uniform((6,)))
        H_N = Var(rng.uniform((2, 6)))
        E = Var(rng.uniform((2, 8)))
        h, traces = global_forward_var(h_a, H_N, E, [layer0, layer1], d_head=4)
        assert h.value.shape == (8,)
        assert len(traces) == 2

    def test_probability_vectors(self):
        rng = Rng(20)
        layer = make_layer(rng, U=2, V=2)
        _, _, trace = dgat_layer(GraphBatch(rng.uniform((6,)), rng.uniform((5, 6)),
                                            rng.uniform((5, 8))), layer, d_head=4)
        for coeffs in trace["beta"] + trace["omega"] + trace["rho"]:
            arr = np.array(coeffs)
            assert np.all(arr >= 0)
            assert abs(arr.sum() - 1.0) < 1e-12

    def test_neighbor_permutation_invariance(self):
        rng = Rng(21)
        layer = make_layer(rng, U=2, V=2)
        h_a = rng.uniform((6,), -1, 1)
        H_N = rng.uniform((5, 6), -1, 1)
        E = rng.uniform((5, 8), -1, 1)
        base, _, _ = dgat_layer(GraphBatch(h_a, H_N, E), layer, d_head=4)
        perm = Rng(22).permutation(5)
        shuffled, _, _ = dgat_layer(GraphBatch(h_a, H_N[perm], E[perm]), layer, d_head=4)
        assert np.max(np.abs(base - shuffled)) < 1e-12

    def test_scale_logits_changes_attention(self):
        rng = Rng(23)
        p = make_dual(rng)
        h_a = rng.uniform((6,), -1, 1)
        E = rng.uniform((3, 8), -1, 1)
        plain = target_edge_attention(h_a, E, p.Wa, p.We, scale=False)
        scaled = target_edge_attention(h_a, E, p.Wa, p.We, scale=True)
        logits = np.array([(h_a @ p.Wa) @ (E[i] @ p.We) for i in range(3)])
        assert np.allclose(scaled, softmax(logits / math.sqrt(4)), atol=1e-12)
        assert not np.allclose(plain, scaled)


class TestGlobalForwardGradients:
    def test_layer_gradients_match_finite_differences(self):
        from gdd.numeric import finite_diff_grad

        rng = Rng(24)
        h_a_val = rng.uniform((6,), -1, 1)
        H_N_val = rng.uniform((4, 6), -1, 1)
        E_val = rng.uniform((4, 8), -1, 1)
        probe = rng.uniform((8,), -1, 1)

        names = ["Wa", "We", "Wi", "Wv", "W1", "b1", "W2", "b2", "Wr"]
        shapes = [(6, 4), (8, 4), (6, 4), (6, 4), (8, 4), (4,), (4, 1), (1,), (8, 6)]
        values = [rng.uniform(s, -0.5, 0.5) for s in shapes]

        def run(vals):
            leaves = [Var(v) for v in vals]
            layer = DgatLayerParams(
                dual=[DualHeadParams(*leaves[0:3])],
                rel=[RelHeadParams(*leaves[3:8])],
                Wr=leaves[8])
            h, _ = global_forward_var(Var(h_a_val), Var(H_N_val), Var(E_val),
                                      [layer], d_head=4)
            return ad.matmul(h, Var(probe)), leaves

        out, leaves = run(values)
        ad.backward(out)
        for i, name in enumerate(names):
            def f(x):
                return float(run([x if j == i else values[j]
                                  for j in range(len(values))])[0].value)

            numeric = finite_diff_grad(f, values[i])
            analytic = leaves[i].grad
            if analytic is None:
                analytic = np.zeros_like(values[i])
            scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-6)
            assert np.max(np.abs(analytic - numeric)) / scale < 1e-4, name
