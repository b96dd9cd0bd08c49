import numpy as np
import pytest

from bem.dataio import EmbeddingTable
from bem.elbo import Edge, draw_pair_eps, edge_output_dim, elbo_pair_grads, estimate_prior
from bem.errors import AlignmentError, ConfigError, ShapeError, TrainingError
from bem.nets import DiffNet, net_forward
from bem.elbo import infer_posterior
from bem.rng import named_rng
from bem.synthgen import SynthSpec, generate
from bem.trainer import TrainConfig, refine, sample_paired_batches, train


def tiny_tables(seed=0, n=6, d_w=2, d_z=3):
    rng = np.random.default_rng(seed)
    ids = tuple(f"e{i}" for i in range(n))
    kg = EmbeddingTable(ids=ids, matrix=rng.normal(size=(n, d_w)))
    bg = EmbeddingTable(ids=ids, matrix=rng.normal(size=(n, d_z)))
    return kg, bg


class TestSamplePairedBatches:
    def test_full_batch_is_a_permutation(self):
        rng = np.random.default_rng(0)
        a, b = sample_paired_batches(8, 8, rng)
        assert sorted(a) == list(range(8)) and sorted(b) == list(range(8))
        assert not np.any(a == b)

    def test_deterministic_given_seed(self):
        a1, b1 = sample_paired_batches(50, 10, np.random.default_rng(42))
        a2, b2 = sample_paired_batches(50, 10, np.random.default_rng(42))
        assert np.array_equal(a1, a2) and np.array_equal(b1, b2)

    def test_no_self_pairs_unless_allowed(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a, b = sample_paired_batches(5, 5, rng)
            assert not np.any(a == b)

    def test_self_pairs_possible_when_allowed(self):
        rng = np.random.default_rng(2)
        seen_self = False
        for _ in range(100):
            a, b = sample_paired_batches(5, 5, rng, allow_self_pairs=True)
            seen_self = seen_self or bool(np.any(a == b))
        assert seen_self

    def test_inclusion_frequency_is_uniform(self):
        # Each entity lands in batch a with probability n_batch/n; over 1e4
        # draws the empirical frequency stays within 4 standard errors.
        n, n_batch, draws = 100, 10, 10_000
        rng = np.random.default_rng(7)
        counts = np.zeros(n)
        for _ in range(draws):
            a, _ = sample_paired_batches(n, n_batch, rng)
            counts[a] += 1
        p = n_batch / n
        se = np.sqrt(p * (1 - p) / draws)
        freq = counts / draws
        assert np.all(np.abs(freq - p) < 4 * se)

    def test_too_few_entities(self):
        with pytest.raises(ConfigError):
            sample_paired_batches(1, 1, np.random.default_rng(0))


class TestTrainConfig:
    def test_defaults_are_valid(self):
        TrainConfig().validate()

    def test_batch_bounds(self):
        with pytest.raises(ConfigError):
            TrainConfig(n_batch=1).validate()
        with pytest.raises(ConfigError):
            TrainConfig(n_batch=10).validate(n_entities=5)

    def test_positivity(self):
        with pytest.raises(ConfigError):
            TrainConfig(lambda1=0.0).validate()
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0.0).validate()

    def test_step_count_ceiling(self):
        assert TrainConfig(n_batch=2, epochs=0.01).n_steps(4) == 1
        assert TrainConfig(n_batch=2, epochs=1.0).n_steps(5) == 3

    def test_dict_round_trip(self):
        cfg = TrainConfig(edge=Edge.IDENTITY, lambda2=0.5, seed=9)
        assert TrainConfig.from_dict(cfg.to_dict()) == cfg


class TestTrain:
    def test_single_step_matches_hand_trace(self):
        # Replays the documented rng stream with public ops, then applies
        # one hand-written Adam update to the hand-averaged batch gradient.
        n, d_w, d_z, n_batch = 4, 2, 3, 2
        kg, bg = tiny_tables(seed=11, n=n, d_w=d_w, d_z=d_z)
        cfg = TrainConfig(n_batch=n_batch, epochs=n_batch / n, hidden_dim=4,
                          seed=123, normalize_inputs=False, edge=Edge.TRANSLATION)
        assert cfg.n_steps(n) == 1
        proj_net, infer_net, report = train(kg, bg, cfg)

        rng = named_rng(cfg.seed, "train")
        d_g = edge_output_dim(cfg.edge, d_z)
        proj_ref = DiffNet.random(d_w, cfg.hidden_dim, d_z, rng)
        infer_ref = DiffNet.random(d_w + d_z, cfg.hidden_dim,
                                   2 * d_w + 2 * d_g, rng)
        a, b = sample_paired_batches(n, n_batch, rng)
        prior_a, prior_b = estimate_prior(
            kg.matrix[a], kg.matrix[b], bg.matrix[a], bg.matrix[b],
            cfg.edge, cfg.n_bootstrap, rng, cfg.lambda1, cfg.lambda2)
        eps_list = [draw_pair_eps(rng, d_w, d_g) for _ in range(n_batch)]
        sums = {}
        elbo_sum = 0.0
        for m in range(n_batch):
            parts, gp, gi = elbo_pair_grads(
                proj_ref, infer_ref, cfg.edge,
                kg.matrix[a[m]], bg.matrix[a[m]],
                kg.matrix[b[m]], bg.matrix[b[m]],
                prior_a, prior_b, eps_list[m])
            elbo_sum += parts.elbo
            for key, val in {**gp.param_dict("proj."),
                             **gi.param_dict("infer.")}.items():
                sums[key] = sums.get(key, 0.0) + val
        params = {**proj_ref.param_dict("proj."), **infer_ref.param_dict("infer.")}
        lr, b1c, b2c, eps_adam = cfg.learning_rate, 0.9, 0.999, 1e-8
        for key, p in params.items():
            g = -sums[key] / n_batch  # loss gradient
            m_hat = ((1 - b1c) * g) / (1 - b1c)
            v_hat = ((1 - b2c) * g * g) / (1 - b2c)
            p -= lr * m_hat / (np.sqrt(v_hat) + eps_adam)
        assert report.records[0].elbo == pytest.approx(elbo_sum / n_batch, rel=1e-12)
        for name in ("W1", "b1", "W2", "b2"):
            assert np.allclose(getattr(proj_net, name), getattr(proj_ref, name),
                               rtol=0, atol=1e-13)
            assert np.allclose(getattr(infer_net, name), getattr(infer_ref, name),
                               rtol=0, atol=1e-13)

    def test_zero_learning_rate_freezes_parameters(self):
        kg, bg = tiny_tables(seed=3)
        cfg = TrainConfig(n_batch=3, epochs=2.0, hidden_dim=4, seed=1,
                          learning_rate=0.0, normalize_inputs=False)
        proj_net, infer_net, report = train(kg, bg, cfg)
        rng = named_rng(cfg.seed, "train")
        d_g = edge_output_dim(cfg.edge, bg.dim)
        proj_ref = DiffNet.random(kg.dim, cfg.hidden_dim, bg.dim, rng)
        infer_ref = DiffNet.random(kg.dim + bg.dim, cfg.hidden_dim,
                                   2 * kg.dim + 2 * d_g, rng)
        assert np.array_equal(proj_net.W1, proj_ref.W1)
        assert np.array_equal(infer_net.W2, infer_ref.W2)
        assert report.n_steps == cfg.n_steps(len(kg))

    def test_determinism_bit_identical(self):
        kg, bg = tiny_tables(seed=5, n=10)
        cfg = TrainConfig(n_batch=4, epochs=3.0, hidden_dim=6, seed=77,
                          normalize_inputs=True)
        out1 = train(kg, bg, cfg)
        out2 = train(kg, bg, cfg)
        assert out1[2].param_checksum == out2[2].param_checksum
        assert [r.elbo for r in out1[2].records] == [r.elbo for r in out2[2].records]
        r1 = refine(kg, bg, out1[0], out1[1])
        r2 = refine(kg, bg, out2[0], out2[1])
        assert np.array_equal(r1[0].matrix, r2[0].matrix)
        assert np.array_equal(r1[1].matrix, r2[1].matrix)

    def test_misaligned_tables_raise_with_ids(self):
        kg, _ = tiny_tables(seed=0, n=4)
        rng = np.random.default_rng(1)
        bg = EmbeddingTable(ids=("e0", "e1", "e2", "x9"),
                            matrix=rng.normal(size=(4, 3)))
        with pytest.raises(AlignmentError, match="x9"):
            train(kg, bg, TrainConfig(n_batch=2, epochs=1.0, hidden_dim=4))

    def test_non_finite_elbo_reports_step(self):
        kg, bg = tiny_tables(seed=2)
        cfg = TrainConfig(n_batch=3, epochs=4.0, hidden_dim=4, seed=0,
                          learning_rate=1e12, normalize_inputs=False)
        with pytest.raises(TrainingError, match=r"step \d+"):
            train(kg, bg, cfg)

    def test_elbo_improves_on_synthetic_data(self):
        # Window-50 smoothed trace at the end beats the start.
        truth = generate(SynthSpec(n_entities=400, kg_dim=8, bg_dim=12,
                                   n_clusters=4, true_hidden=12, seed=3))
        cfg = TrainConfig(n_batch=50, epochs=25.0, hidden_dim=48, seed=5,
                          normalize_inputs=False)
        _, _, report = train(truth.kg, truth.bg, cfg)
        trace = report.elbo_trace()
        assert report.n_steps == 200
        assert np.mean(trace[-50:]) > np.mean(trace[:50])
        assert np.mean(trace[150:200]) > np.mean(trace[:50])

    def test_identity_edge_trains_with_finite_elbo(self):
        kg, bg = tiny_tables(seed=8, n=12)
        for edge in (Edge.IDENTITY, Edge.TRANSLATION, Edge.INNER_PRODUCT):
            cfg = TrainConfig(n_batch=5, epochs=2.0, hidden_dim=5, seed=2,
                              edge=edge, normalize_inputs=False)
            _, _, report = train(kg, bg, cfg)
            assert np.all(np.isfinite(report.elbo_trace()))


class TestRefine:
    def test_zero_inference_net_returns_kg_unchanged(self):
        kg, bg = tiny_tables(seed=4)
        d_g = edge_output_dim(Edge.TRANSLATION, bg.dim)
        proj = DiffNet.random(kg.dim, 4, bg.dim, np.random.default_rng(0))
        infer = DiffNet.zeros(kg.dim + bg.dim, 4, 2 * kg.dim + 2 * d_g)
        kg_r, bg_r = refine(kg, bg, proj, infer)
        assert np.array_equal(kg_r.matrix, kg.matrix)
        assert kg_r.ids == kg.ids and bg_r.ids == kg.ids

    def test_rows_match_componentwise_recomputation(self):
        kg, bg = tiny_tables(seed=6)
        rng = np.random.default_rng(9)
        d_g = edge_output_dim(Edge.TRANSLATION, bg.dim)
        proj = DiffNet.random(kg.dim, 5, bg.dim, rng)
        infer = DiffNet.random(kg.dim + bg.dim, 5, 2 * kg.dim + 2 * d_g, rng)
        kg_r, bg_r = refine(kg, bg, proj, infer)
        for eid in ("e0", "e3"):
            stats = infer_posterior(infer, kg.row(eid), bg.row(eid))
            assert np.array_equal(kg_r.row(eid), kg.row(eid) + stats.shift_mean)
            assert np.array_equal(bg_r.row(eid), net_forward(proj, kg_r.row(eid)))

    def test_inputs_not_mutated(self):
        kg, bg = tiny_tables(seed=7)
        before_kg = kg.matrix.copy()
        before_bg = bg.matrix.copy()
        rng = np.random.default_rng(1)
        d_g = edge_output_dim(Edge.TRANSLATION, bg.dim)
        proj = DiffNet.random(kg.dim, 4, bg.dim, rng)
        infer = DiffNet.random(kg.dim + bg.dim, 4, 2 * kg.dim + 2 * d_g, rng)
        refine(kg, bg, proj, infer)
        assert np.array_equal(kg.matrix, before_kg)
        assert np.array_equal(bg.matrix, before_bg)

    def test_dimension_mismatch(self):
        kg, bg = tiny_tables(seed=1)
        proj = DiffNet.zeros(kg.dim + 1, 4, bg.dim)
        infer = DiffNet.zeros(kg.dim + bg.dim, 4, 2 * kg.dim + 2 * bg.dim)
        with pytest.raises(ShapeError):
            refine(kg, bg, proj, infer)
