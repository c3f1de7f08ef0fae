import numpy as np
import pytest

from stablematch.fusion import (
    FeatureMap,
    FusionKind,
    FusionParams,
    fuse,
    fusion_param_count,
    init_fusion_params,
    site_widths,
)


def make_inputs(rng, n_layers, tokens=6, dim=8):
    backbone = FeatureMap(rng.normal(size=(tokens, dim)))
    layers = [FeatureMap(rng.normal(size=(tokens, dim))) for _ in range(n_layers)]
    return backbone, layers


class TestFeatureMap:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            FeatureMap(np.zeros((0, 4)))
        with pytest.raises(ValueError):
            FeatureMap(np.zeros(5))

    def test_finiteness(self):
        with pytest.raises(ValueError):
            FeatureMap(np.array([[np.inf, 1.0]]))


class TestSiteWidths:
    def test_simple(self):
        assert site_widths(FusionKind.SIMPLE, 6, 8) == [16]

    def test_u_like(self):
        assert site_widths(FusionKind.U_LIKE, 3, 8) == [16, 16, 16]

    def test_dense_growth(self):
        assert site_widths(FusionKind.DENSE, 6, 8) == [16, 24, 32, 40, 48, 56]

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            site_widths(FusionKind.DENSE, 0, 8)


class TestFuse:
    @pytest.mark.parametrize("kind", list(FusionKind))
    @pytest.mark.parametrize("n_layers", [1, 3, 6])
    def test_shape_preservation(self, kind, n_layers):
        rng = np.random.default_rng(0)
        backbone, layers = make_inputs(rng, n_layers, tokens=5, dim=8)
        params = init_fusion_params(kind, n_layers, 8, seed=1)
        outputs = fuse(kind, backbone, layers, params)
        expected_sites = 1 if kind is FusionKind.SIMPLE else n_layers
        assert len(outputs) == expected_sites
        for fm in outputs:
            assert (fm.tokens, fm.dim) == (5, 8)

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        backbone, layers = make_inputs(rng, 4)
        params = init_fusion_params(FusionKind.DENSE, 4, 8, seed=3)
        out1 = fuse(FusionKind.DENSE, backbone, layers, params)
        out2 = fuse(FusionKind.DENSE, backbone, layers, params)
        for a, b in zip(out1, out2):
            np.testing.assert_array_equal(a.values, b.values)

    def test_norm_postcondition(self):
        rng = np.random.default_rng(11)
        backbone, layers = make_inputs(rng, 2, tokens=9, dim=16)
        params = init_fusion_params(FusionKind.U_LIKE, 2, 16, seed=5)
        for fm in fuse(FusionKind.U_LIKE, backbone, layers, params):
            np.testing.assert_allclose(fm.values.mean(axis=1), 0.0, atol=1e-9)
            np.testing.assert_allclose(fm.values.var(axis=1), 1.0, atol=1e-6)

    def test_constant_rows_standardize_to_bias(self):
        tokens, dim = 4, 6
        backbone = FeatureMap(np.ones((tokens, dim)))
        layers = [FeatureMap(np.full((tokens, dim), 2.0))]
        # identity-like projection halves: output rows are constant pre-norm
        proj = np.vstack([np.eye(dim), np.eye(dim)])
        bias = np.arange(dim, dtype=float)
        params = [FusionParams(projection=proj, norm_scale=np.ones(dim), norm_bias=bias)]
        (out,) = fuse(FusionKind.SIMPLE, backbone, layers, params)
        np.testing.assert_allclose(out.values, np.tile(bias, (tokens, 1)), atol=1e-6)

    def test_dense_site1_equals_ulike_site1(self):
        rng = np.random.default_rng(13)
        backbone, layers = make_inputs(rng, 3)
        dense_params = init_fusion_params(FusionKind.DENSE, 3, 8, seed=9)
        ulike_params = init_fusion_params(FusionKind.U_LIKE, 3, 8, seed=9)
        # first sites have identical width; share the parameters
        dense_out = fuse(FusionKind.DENSE, backbone, layers, dense_params)
        ulike_out = fuse(
            FusionKind.U_LIKE, backbone, layers, [dense_params[0]] + ulike_params[1:]
        )
        np.testing.assert_array_equal(dense_out[0].values, ulike_out[0].values)

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(17)
        backbone = FeatureMap(rng.normal(size=(4, 8)))
        layers = [FeatureMap(rng.normal(size=(4, 6)))]
        params = init_fusion_params(FusionKind.SIMPLE, 1, 8)
        with pytest.raises(ValueError):
            fuse(FusionKind.SIMPLE, backbone, layers, params)

    def test_projection_width_mismatch_rejected(self):
        rng = np.random.default_rng(19)
        backbone, layers = make_inputs(rng, 2)
        params = init_fusion_params(FusionKind.DENSE, 2, 8, seed=0)
        with pytest.raises(ValueError):
            fuse(FusionKind.DENSE, backbone, layers, list(reversed(params)))

    def test_empty_layers_rejected(self):
        backbone = FeatureMap(np.zeros((2, 4)) + 1.0)
        with pytest.raises(ValueError):
            fuse(FusionKind.SIMPLE, backbone, [], [])


class TestParamCount:
    def test_simple_closed_form(self):
        for dim in (4, 8, 256):
            assert fusion_param_count(FusionKind.SIMPLE, 3, dim) == 2 * dim * dim + 2 * dim

    def test_u_like_closed_form(self):
        for n_layers in range(1, 7):
            for dim in (4, 8, 256):
                assert fusion_param_count(FusionKind.U_LIKE, n_layers, dim) == n_layers * (
                    2 * dim * dim + 2 * dim
                )

    def test_dense_summation_oracle(self):
        for n_layers in range(1, 7):
            for dim in (4, 8, 256):
                expected = sum(
                    (layer + 1) * dim * dim + 2 * dim
                    for layer in range(1, n_layers + 1)
                )
                assert fusion_param_count(FusionKind.DENSE, n_layers, dim) == expected

    def test_matches_actual_parameters(self):
        for kind in FusionKind:
            params = init_fusion_params(kind, 5, 8, seed=2)
            assert sum(p.n_params for p in params) == fusion_param_count(kind, 5, 8)

    def test_init_reproducible(self):
        a = init_fusion_params(FusionKind.DENSE, 3, 8, seed=4)
        b = init_fusion_params(FusionKind.DENSE, 3, 8, seed=4)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.projection, pb.projection)

    def test_init_bounds(self):
        for p, width in zip(
            init_fusion_params(FusionKind.DENSE, 4, 8, seed=6),
            site_widths(FusionKind.DENSE, 4, 8),
        ):
            k = width**-0.5
            assert np.all(np.abs(p.projection) <= k)
            assert np.all(p.norm_scale == 1.0)
            assert np.all(p.norm_bias == 0.0)
