"""Shared fixtures: meshes and layouts are expensive, so cache per session."""

import numpy as np
import pytest

from weberlab import assemble_local_forms, build_layout, gen_structured


@pytest.fixture(scope="session")
def solid2():
    return gen_structured("solid_cube", 2)


@pytest.fixture(scope="session")
def solid4():
    return gen_structured("solid_cube", 4)


@pytest.fixture(scope="session")
def hollow3():
    return gen_structured("hollow_cube", 3)


@pytest.fixture(scope="session")
def through3():
    return gen_structured("through_hole_cube", 3)


@pytest.fixture(scope="session")
def layout_cache():
    """(mesh id, degree, policy, bc, curl_only) -> (layout, forms)."""
    cache = {}

    def get(mesh, degree, policy="minimal", bc="none", curl_only=False,
            quad_degree=None):
        key = (id(mesh), degree, str(policy), bc, curl_only, quad_degree)
        if key not in cache:
            layout = build_layout(mesh, degree, policy, bc=bc,
                                  curl_only=curl_only, quad_degree=quad_degree)
            forms = assemble_local_forms(layout)
            cache[key] = (layout, forms)
        return cache[key]

    return get


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
