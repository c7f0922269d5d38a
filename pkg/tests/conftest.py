"""Shared fixtures: small architecture shapes sized for fast exact tests."""

import pytest

from elastictune.model import ArchDims
from elastictune.space import DESK_DIMS, SearchSpace, get_preset


@pytest.fixture
def micro_dims():
    # deliberately distinct, non-round sizes so transposed shapes collide
    return ArchDims(L_max=2, H_max=2, d_head=3, D_in=5, D_ffn_max=7,
                    N=4, V=11, C=3)


@pytest.fixture
def desk_dims():
    return DESK_DIMS


@pytest.fixture
def desk_space():
    return get_preset("desk").space


@pytest.fixture
def micro_space(micro_dims):
    return SearchSpace(micro_dims, depth_values=(1, 2), head_values=(1, 2),
                       ffn_values=(3, 7), mode="uniform")


@pytest.fixture
def micro_space_per_layer(micro_dims):
    return SearchSpace(micro_dims, depth_values=(1, 2), head_values=(1, 2),
                       ffn_values=(3, 7), mode="per_layer")

