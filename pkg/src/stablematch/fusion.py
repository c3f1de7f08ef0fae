"""Memory fusion of backbone features with encoder-layer outputs.

Three topologies at toy tensor scale:

* simple - one site fusing the backbone with the final encoder output;
* u_like - one site per layer, each fusing the backbone with that
  layer's output (a mirrored pairwise ladder);
* dense  - one site per layer, fusing the backbone with every encoder
  output up to and including that layer.

Each site concatenates its sources along the feature dimension, applies
a linear projection back to the original width, then a per-token
standardization with learned scale and bias. Everything is pure and
deterministic; parameters are plain arrays initialized from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

_NORM_EPS = 1e-12


class FusionKind(Enum):
    SIMPLE = "simple"
    U_LIKE = "u_like"
    DENSE = "dense"


@dataclass(frozen=True)
class FeatureMap:
    """A (tokens, dim) matrix of finite feature values."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"feature map must be (tokens, dim), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature map values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class FusionParams:
    """Per-site parameters: projection (in_width, dim), norm scale/bias (dim,)."""

    projection: np.ndarray
    norm_scale: np.ndarray
    norm_bias: np.ndarray

    def __post_init__(self) -> None:
        proj = np.asarray(self.projection, dtype=np.float64)
        scale = np.asarray(self.norm_scale, dtype=np.float64)
        bias = np.asarray(self.norm_bias, dtype=np.float64)
        if proj.ndim != 2:
            raise ValueError("projection must be a matrix")
        dim = proj.shape[1]
        if scale.shape != (dim,) or bias.shape != (dim,):
            raise ValueError("norm scale/bias must be length-dim vectors")
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "norm_scale", scale)
        object.__setattr__(self, "norm_bias", bias)

    @property
    def n_params(self) -> int:
        return self.projection.size + self.norm_scale.size + self.norm_bias.size


def site_widths(kind: FusionKind, n_layers: int, dim: int) -> list[int]:
    """Concatenation width of each fusion site, in site order."""
    if n_layers < 1 or dim < 1:
        raise ValueError("need n_layers >= 1 and dim >= 1")
    if kind is FusionKind.SIMPLE:
        return [2 * dim]
    if kind is FusionKind.U_LIKE:
        return [2 * dim] * n_layers
    if kind is FusionKind.DENSE:
        return [(layer + 1) * dim for layer in range(1, n_layers + 1)]
    raise ValueError(f"unknown fusion kind: {kind!r}")


def init_fusion_params(
    kind: FusionKind, n_layers: int, dim: int, seed: int = 0
) -> list[FusionParams]:
    """Seeded parameters for every site: uniform(-k, k) with k = width^-0.5."""
    rng = np.random.default_rng(seed)
    params = []
    for width in site_widths(kind, n_layers, dim):
        k = width**-0.5
        params.append(
            FusionParams(
                projection=rng.uniform(-k, k, size=(width, dim)),
                norm_scale=np.ones(dim),
                norm_bias=np.zeros(dim),
            )
        )
    return params


def _site_sources(
    kind: FusionKind, backbone: FeatureMap, encoder_layers: Sequence[FeatureMap]
) -> list[list[FeatureMap]]:
    if kind is FusionKind.SIMPLE:
        return [[backbone, encoder_layers[-1]]]
    if kind is FusionKind.U_LIKE:
        return [[backbone, layer] for layer in encoder_layers]
    if kind is FusionKind.DENSE:
        return [
            [backbone, *encoder_layers[: i + 1]] for i in range(len(encoder_layers))
        ]
    raise ValueError(f"unknown fusion kind: {kind!r}")


def fuse(
    kind: FusionKind,
    backbone: FeatureMap,
    encoder_layers: Sequence[FeatureMap],
    params: Sequence[FusionParams],
) -> list[FeatureMap]:
    """Run every fusion site; output keeps the input tokens x dim shape."""
    if not encoder_layers:
        raise ValueError("need at least one encoder layer output")
    tokens, dim = backbone.tokens, backbone.dim
    for fm in encoder_layers:
        if fm.tokens != tokens or fm.dim != dim:
            raise ValueError(
                f"all feature maps must share shape ({tokens}, {dim}), "
                f"got ({fm.tokens}, {fm.dim})"
            )
    sources = _site_sources(kind, backbone, encoder_layers)
    if len(params) != len(sources):
        raise ValueError(f"expected {len(sources)} parameter sets, got {len(params)}")
    outputs = []
    for site_sources, site_params in zip(sources, params):
        concat = np.concatenate([fm.values for fm in site_sources], axis=1)
        if site_params.projection.shape[0] != concat.shape[1]:
            raise ValueError(
                f"projection expects width {site_params.projection.shape[0]}, "
                f"site concatenates to {concat.shape[1]}"
            )
        projected = concat @ site_params.projection
        mean = projected.mean(axis=1, keepdims=True)
        var = projected.var(axis=1, keepdims=True)
        normed = (projected - mean) / np.sqrt(var + _NORM_EPS)
        outputs.append(
            FeatureMap(normed * site_params.norm_scale + site_params.norm_bias)
        )
    return outputs


def fusion_param_count(kind: FusionKind, n_layers: int, dim: int) -> int:
    """Scalar parameters added by the fusion: projections plus norms."""
    return sum(width * dim + 2 * dim for width in site_widths(kind, n_layers, dim))
