"""Property-based checks of the algebraic invariants."""

import numpy as np
from hypothesis import given, settings, strategies as st

from ksefix.actuation import ActuatorLayout, forcing_field
from ksefix.spectral import (GridSpec, dealias, dft2, idft2, is_hermitian,
                             spectral_distance)

GRID = GridSpec()
N = GRID.n
LAYOUT = ActuatorLayout()


def fields(max_mag=10.0):
    return st.integers(0, 2 ** 31 - 1).map(
        lambda seed: np.random.default_rng(seed).uniform(-max_mag, max_mag,
                                                         (N, N)))


@settings(max_examples=25, deadline=None)
@given(fields())
def test_roundtrip_inverts(f):
    assert np.max(np.abs(idft2(dft2(f)) - f)) < 1e-12 * max(np.max(np.abs(f)), 1.0)


@settings(max_examples=25, deadline=None)
@given(fields())
def test_parseval(f):
    spec = dft2(f)
    assert np.sum(np.abs(spec) ** 2) == np.sum(f * f) * N ** 2 \
        or abs(np.sum(np.abs(spec) ** 2) - np.sum(f * f) * N ** 2) \
        < 1e-8 * np.sum(f * f) * N ** 2


@settings(max_examples=25, deadline=None)
@given(fields())
def test_forward_transform_hermitian(f):
    assert is_hermitian(dft2(f), rtol=1e-10)


@settings(max_examples=25, deadline=None)
@given(fields())
def test_dealias_projection(f):
    spec = dft2(f)
    once = dealias(spec)
    assert np.array_equal(dealias(once), once)
    assert np.linalg.norm(once) <= np.linalg.norm(spec) + 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_distance_symmetry(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    b = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    assert spectral_distance(a, b) == spectral_distance(b, a)
    assert spectral_distance(a, a) == 0.0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_forcing_superposition(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.5, 1.5, 36)
    b = rng.uniform(-1.5, 1.5, 36)
    fa = forcing_field(LAYOUT, a, GRID)
    fb = forcing_field(LAYOUT, b, GRID)
    fab = forcing_field(LAYOUT, a + b, GRID)
    scale = max(np.max(np.abs(fa)), np.max(np.abs(fb)), 1.0)
    assert np.max(np.abs(fab - fa - fb)) < 1e-10 * scale
