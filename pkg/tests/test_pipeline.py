import numpy as np
import pytest

from driftalign import (
    ConfigError,
    DimensionMismatch,
    PipelineConfig,
    RankDeficient,
    StreamBatch,
    TransformMatrix,
    apply_transform,
    average_accuracy,
    classify,
    compensate,
    geodesic_distance,
    gfk_transform,
    icms_update,
    init_mean,
    init_pipeline,
    orthonormalize,
    pca_subspace,
    predict_next,
    process_batch,
    recursive_feedback,
)
from driftalign.pipeline import _aligned_view



def gaussian_source(rng, n=120, d=10, k_classes=2, sep=4.0):
    y = rng.integers(0, k_classes, size=n)
    centers = np.zeros((k_classes, d))
    for j in range(k_classes):
        centers[j, j] = sep
    x = centers[y] + rng.standard_normal((n, d))
    return x, y


class TestPcaSubspace:
    def test_exact_planar_data(self, rng):
        latent = rng.standard_normal((50, 2))
        x = np.zeros((50, 5))
        x[:, :2] = latent
        s = pca_subspace(x, 2)
        target = orthonormalize(np.eye(5)[:, :2])
        assert geodesic_distance(s, target) < 1e-8

    def test_isotropic_sample_is_seed_dependent(self):
        a = pca_subspace(np.random.default_rng(1).standard_normal((40, 8)), 1)
        b = pca_subspace(np.random.default_rng(2).standard_normal((40, 8)), 1)
        assert geodesic_distance(a, b) > 1e-3
        for s in (a, b):
            assert np.abs(s.basis.T @ s.basis - np.eye(1)).max() < 1e-10

    def test_anisotropic_concentration_with_eigh_oracle(self, rng):
        scales = np.ones(12)
        scales[0] = np.sqrt(10.0)
        x = rng.standard_normal((500, 12)) * scales
        s = pca_subspace(x, 1)
        target = orthonormalize(np.eye(12)[:, :1])
        assert geodesic_distance(s, target) < 0.1
        centered = x - x.mean(axis=0)
        _, vecs = np.linalg.eigh(centered.T @ centered)
        oracle = orthonormalize(vecs[:, -1:])
        assert geodesic_distance(s, oracle) < 1e-8

    def test_too_few_rows_rejected(self, rng):
        with pytest.raises(RankDeficient):
            pca_subspace(rng.standard_normal((3, 10)), 3)

    def test_rank_deficient_scatter_rejected(self, rng):
        x = np.tile(rng.standard_normal((1, 10)), (20, 1))
        with pytest.raises(RankDeficient):
            pca_subspace(x, 2)


class TestConfig:
    def test_prediction_and_cumulative_exclusive(self):
        with pytest.raises(ConfigError):
            PipelineConfig(subspace_dim=3, use_prediction=True, use_cumulative=True)

    def test_blend_range(self):
        with pytest.raises(ConfigError):
            PipelineConfig(subspace_dim=3, blend=1.5)

    def test_baseline_methods_reject_stages(self):
        with pytest.raises(ConfigError):
            PipelineConfig(subspace_dim=3, mean_method="karcher", use_feedback=True)

    def test_k_above_half_dim_rejected_at_init(self, rng):
        x, y = gaussian_source(rng)
        with pytest.raises(ConfigError):
            init_pipeline(x, y, PipelineConfig(subspace_dim=6))


class TestInitPipeline:
    def test_source_embedding_and_classifier(self, rng):
        x, y = gaussian_source(rng)
        state = init_pipeline(x, y, PipelineConfig(subspace_dim=3))
        gram = state.source_subspace.basis.T @ state.source_subspace.basis
        assert np.abs(gram - np.eye(3)).max() < 1e-10
        assert state.classifier.n_classes == 2
        assert np.array_equal(state.feedback_transform.g, np.eye(10))
        assert state.mean_state is None
        assert state.batch_index == 0

    def test_deterministic_for_identical_inputs(self, rng):
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3, seed=9)
        a = init_pipeline(x, y, cfg)
        b = init_pipeline(x, y, cfg)
        assert np.array_equal(a.source_subspace.basis, b.source_subspace.basis)
        assert np.array_equal(a.classifier.centroids, b.classifier.centroids)


class TestRecursiveFeedback:
    def test_identity_transform_is_noop(self, rng):
        batch = StreamBatch(features=rng.standard_normal((4, 6)))
        out = recursive_feedback(batch, TransformMatrix.identity(6))
        assert np.array_equal(out.features, batch.features)

    def test_zero_row_stays_zero(self, rng):
        features = rng.standard_normal((3, 6))
        features[1] = 0.0
        m = rng.standard_normal((6, 6))
        out = recursive_feedback(StreamBatch(features=features), TransformMatrix(m + m.T))
        assert np.abs(out.features[1]).max() == 0.0

    def test_composition_associativity(self, rng):
        features = rng.standard_normal((5, 6))
        m1 = rng.standard_normal((6, 6))
        m2 = rng.standard_normal((6, 6))
        g1, g2 = TransformMatrix(m1 + m1.T), TransformMatrix(m2 + m2.T)
        stepwise = apply_transform(
            recursive_feedback(StreamBatch(features=features), g1).features, g2
        )
        direct = features @ (g1.g @ g2.g)
        assert np.abs(stepwise - direct).max() < 1e-10


class TestProcessBatch:
    def test_first_batch_feedback_is_noop(self, rng):
        x, y = gaussian_source(rng)
        batch = StreamBatch(features=rng.standard_normal((30, 10)))
        on = PipelineConfig(subspace_dim=3, use_feedback=True)
        off = PipelineConfig(subspace_dim=3)
        ya, _, sa = process_batch(init_pipeline(x, y, on), batch, on)
        yb, _, sb = process_batch(init_pipeline(x, y, off), batch, off)
        assert np.array_equal(ya, yb)
        assert geodesic_distance(sa.mean_state.mean, sb.mean_state.mean) < 1e-12

    def test_mean_update_consumes_compensated_subspace(self, rng):
        # Hand-stepped trace of the prediction path over 3 batches: the
        # running mean must absorb the compensated subspace, not the raw
        # per-batch one.
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3, use_prediction=True, blend=0.5)
        state = init_pipeline(x, y, cfg)
        batches = [StreamBatch(features=rng.standard_normal((30, 10))) for _ in range(3)]

        mean_state = None
        for i, batch in enumerate(batches):
            observed = pca_subspace(batch.features, 3)
            if i >= 2:
                predicted = predict_next(mean_state.prev_mean, mean_state.mean)
                used = compensate(predicted, observed, 0.5)
            else:
                used = observed
            mean_state = (
                init_mean(used) if mean_state is None else icms_update(mean_state, used)
            )
            _, _, state = process_batch(state, batch, cfg)

        assert geodesic_distance(state.mean_state.mean, mean_state.mean) < 1e-10
        raw_only = init_mean(pca_subspace(batches[0].features, 3))
        for batch in batches[1:]:
            raw_only = icms_update(raw_only, pca_subspace(batch.features, 3))
        assert geodesic_distance(state.mean_state.mean, raw_only.mean) > 1e-6

    def test_variant_reduction_trace(self, rng):
        # With every stage flag off the loop must reduce exactly to
        # subspace -> incremental mean -> plain transform -> aligned
        # classification, state by state.
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3)
        state = init_pipeline(x, y, cfg)
        source = state.source_subspace
        classifier = state.classifier
        mean_state = None
        for _ in range(5):
            batch = StreamBatch(
                features=rng.standard_normal((30, 10)),
                labels=rng.integers(0, 2, size=30),
            )
            y_hat, accuracy, state = process_batch(state, batch, cfg)

            observed = pca_subspace(batch.features, 3)
            mean_state = (
                init_mean(observed)
                if mean_state is None
                else icms_update(mean_state, observed)
            )
            transform = gfk_transform(source, mean_state.mean)
            aligned = apply_transform(batch.features, transform)
            view = _aligned_view(classifier, transform.g)
            expected_labels = classify(view, aligned)

            assert np.array_equal(y_hat, expected_labels)
            assert geodesic_distance(state.mean_state.mean, mean_state.mean) < 1e-10
            assert np.abs(state.feedback_transform.g - transform.g).max() < 1e-10
            record = state.history[-1]
            assert abs(
                record.dist_source_mean - geodesic_distance(source, mean_state.mean)
            ) < 1e-10
            assert accuracy == pytest.approx(np.mean(expected_labels == batch.labels))

    def test_transform_stored_for_next_feedback(self, rng):
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3, use_feedback=True)
        state = init_pipeline(x, y, cfg)
        b1 = StreamBatch(features=rng.standard_normal((30, 10)))
        b2 = StreamBatch(features=rng.standard_normal((30, 10)))
        _, _, state1 = process_batch(state, b1, cfg)
        expected_pre = b1.features @ np.eye(10)  # identity on the first batch
        observed = pca_subspace(expected_pre, 3)
        transform = gfk_transform(state.source_subspace, observed)
        assert np.abs(state1.feedback_transform.g - transform.g).max() < 1e-10
        # Second batch must be pre-aligned with exactly that transform.
        _, _, state2 = process_batch(state1, b2, cfg)
        pre = apply_transform(b2.features, state1.feedback_transform)
        observed2 = pca_subspace(pre, 3)
        expected_mean = icms_update(state1.mean_state, observed2)
        assert geodesic_distance(state2.mean_state.mean, expected_mean.mean) < 1e-10

    def test_history_complete_and_finite(self, rng):
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3)
        state = init_pipeline(x, y, cfg)
        for _ in range(7):
            batch = StreamBatch(
                features=rng.standard_normal((30, 10)),
                labels=rng.integers(0, 2, size=30),
            )
            _, _, state = process_batch(state, batch, cfg)
        assert state.batch_index == 7
        assert len(state.history) == 7
        for record in state.history:
            assert np.isfinite(record.dist_source_mean)
            assert np.isfinite(record.dist_mean_step)
            assert record.accuracy is not None

    def test_determinism_bitwise(self, rng):
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3, adaptive_classifier=True)
        batches = [
            StreamBatch(
                features=rng.standard_normal((30, 10)),
                labels=rng.integers(0, 2, size=30),
            )
            for _ in range(5)
        ]

        def run():
            state = init_pipeline(x, y, cfg)
            for batch in batches:
                _, _, state = process_batch(state, batch, cfg)
            return state

        a, b = run(), run()
        for ra, rb in zip(a.history, b.history):
            assert ra.accuracy == rb.accuracy
            assert abs(ra.dist_source_mean - rb.dist_source_mean) <= 1e-12
            assert abs(ra.dist_mean_step - rb.dist_mean_step) <= 1e-12
        assert np.array_equal(a.classifier.centroids, b.classifier.centroids)

    def test_cut_locus_batch_skipped_with_state_unchanged(self, rng, caplog):
        import logging
        from unittest import mock

        from driftalign.errors import CutLocusError

        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3)
        state = init_pipeline(x, y, cfg)
        batch = StreamBatch(features=rng.standard_normal((30, 10)))
        with mock.patch(
            "driftalign.pipeline.gfk_transform",
            side_effect=CutLocusError("forced"),
        ):
            with caplog.at_level(logging.WARNING, logger="driftalign.pipeline"):
                y_hat, accuracy, new_state = process_batch(state, batch, cfg)
        assert y_hat is None and accuracy is None
        assert new_state is state
        assert any("cut locus" in r.message for r in caplog.records)

    def test_dimension_mismatch_propagates(self, rng):
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3)
        state = init_pipeline(x, y, cfg)
        with pytest.raises(DimensionMismatch):
            process_batch(state, StreamBatch(features=rng.standard_normal((30, 9))), cfg)

    def test_adaptive_update_moves_centroids(self, rng):
        x, y = gaussian_source(rng)
        cfg = PipelineConfig(subspace_dim=3, adaptive_classifier=True, update_rate=0.5)
        state = init_pipeline(x, y, cfg)
        batch = StreamBatch(features=rng.standard_normal((30, 10)) + 2.0)
        _, _, new_state = process_batch(state, batch, cfg)
        assert not np.array_equal(new_state.classifier.centroids, state.classifier.centroids)

    def test_confidence_gate_blocks_ambiguous_updates(self, rng):
        x, y = gaussian_source(rng)
        gated = PipelineConfig(
            subspace_dim=3, adaptive_classifier=True, update_rate=0.5,
            confidence_threshold=0.999,
        )
        state = init_pipeline(x, y, gated)
        # Rows near the decision boundary never clear a near-1 margin
        # threshold, so the classifier must stay untouched.
        batch = StreamBatch(features=0.01 * rng.standard_normal((30, 10)))
        _, _, new_state = process_batch(state, batch, gated)
        assert np.array_equal(new_state.classifier.centroids, state.classifier.centroids)


class TestAverageAccuracy:
    def test_single_value(self):
        assert average_accuracy([1.0]) == 1.0

    def test_exact_small_case(self):
        assert average_accuracy([0.5, 1.0, 0.75]) == 0.75

    def test_matches_compensated_summation(self, rng):
        import math

        values = rng.uniform(0.0, 1.0, size=1000)
        oracle = math.fsum(values) / len(values)
        assert abs(average_accuracy(values) - oracle) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            average_accuracy([])
