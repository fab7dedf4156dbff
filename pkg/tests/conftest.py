"""Shared fixtures: the standard ball domain and a few meshes.

Meshes are cached per size because the eigenpair cache keys on mesh
identity and several tests lean on warm eigenpairs for speed.
"""

import numpy as np
import pytest

from quadgrad import DomainSpec, make_mesh


@pytest.fixture(scope="session")
def ball3():
    return DomainSpec(kind="radial-ball", dimension=3, outer_radius=1.0)


@pytest.fixture(scope="session")
def interval():
    return DomainSpec(kind="interval", dimension=1, outer_radius=1.0)


@pytest.fixture(scope="session")
def annulus3():
    return DomainSpec(kind="radial-annulus", dimension=3,
                      inner_radius=1.0, outer_radius=2.0)


_MESHES = {}


@pytest.fixture(scope="session")
def mesh_of(ball3):
    def get(M, domain=None):
        dom = domain if domain is not None else ball3
        key = (dom.kind, dom.dimension, dom.inner_radius, dom.outer_radius, M)
        if key not in _MESHES:
            _MESHES[key] = make_mesh(dom, M=M)
        return _MESHES[key]
    return get


def interior_radii(mesh):
    return mesh.nodes[mesh.i0:mesh.M]


@pytest.fixture(scope="session")
def radii():
    return interior_radii
