import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_ssc.errors import DegenerateInputError, InvalidBasisError, InvalidConfigError
from robust_ssc.model import (DataMatrix, ModelConfig, Subspace, SubspaceSpec, affinity,
                              diagnostics, energy_dimension, fit_subspace_pca, generate,
                              normalize_columns, principal_angles)


def test_point_count_rounds_half_to_even():
    assert SubspaceSpec(5, 2.5).n_points == 12   # 12.5 -> 12
    assert SubspaceSpec(3, 2.5).n_points == 8    # 7.5 -> 8
    assert SubspaceSpec(10, 5).n_points == 50


def test_generate_shapes_and_labels():
    cfg = ModelConfig(40, [(5, 4), (3, 6)], noise_sigma=0.1, seed=1)
    data = generate(cfg)
    assert data.Y.shape == (40, 38)
    assert list(np.bincount(data.labels)) == [20, 18]
    assert np.allclose(np.linalg.norm(data.X, axis=0), 1.0)
    for k, S in enumerate(data.subspaces):
        S.check_orthonormal()
        pts = data.X[:, data.labels == k]
        assert np.allclose(S.project(pts), pts, atol=1e-12)
    assert list(data.dims_per_label()) == [5, 3]


def test_generate_is_seeded():
    cfg = ModelConfig(20, [(3, 4)], noise_sigma=0.2, seed=9)
    assert np.array_equal(generate(cfg).Y, generate(cfg).Y)
    other = ModelConfig(20, [(3, 4)], noise_sigma=0.2, seed=10)
    assert not np.array_equal(generate(cfg).Y, generate(other).Y)


def test_noise_scale_matches_sigma():
    cfg = ModelConfig(200, [(5, 200)], noise_sigma=0.4, seed=2)
    data = generate(cfg)
    # E||z||^2 = sigma^2 for every column
    assert np.mean(np.sum(data.Z**2, axis=0)) == pytest.approx(0.16, rel=0.02)


def test_orthogonal_option_gives_zero_affinity():
    data = generate(ModelConfig(30, [(4, 3), (5, 3), (6, 3)], orthogonal=True, seed=0))
    S = data.subspaces
    assert affinity(S[0], S[1]) < 1e-12
    assert affinity(S[1], S[2]) < 1e-12


@pytest.mark.parametrize("bad", [
    dict(ambient_dim=5, subspaces=[(6, 2)]),
    dict(ambient_dim=5, subspaces=[(2, 0.5)]),
    dict(ambient_dim=5, subspaces=[]),
    dict(ambient_dim=5, subspaces=[(2, 2)], noise_sigma=-1),
    dict(ambient_dim=5, subspaces=[(3, 2), (3, 2)], orthogonal=True),
])
def test_invalid_configs_rejected(bad):
    with pytest.raises(InvalidConfigError):
        generate(ModelConfig(**bad))


def test_normalize_columns():
    Y = np.array([[3.0, 0.0], [4.0, 2.0]])
    assert np.allclose(normalize_columns(Y), [[0.6, 0.0], [0.8, 1.0]])
    with pytest.raises(DegenerateInputError) as exc:
        normalize_columns(np.array([[1.0, 0.0], [0.0, 0.0]]))
    assert exc.value.index == 1
    dm = normalize_columns(DataMatrix(Y=Y, labels=np.array([0, 1])))
    assert isinstance(dm, DataMatrix) and dm.labels is not None


def test_principal_angles_known_case():
    e = np.eye(3)
    A = e[:, :2]
    t = 0.3
    B = np.array([[1.0, 0.0], [0.0, math.cos(t)], [0.0, math.sin(t)]])
    geo = principal_angles(A, B)
    assert np.allclose(geo.cos_angles, [1.0, math.cos(t)])
    assert geo.affinity == pytest.approx(math.sqrt((1 + math.cos(t) ** 2) / 2))
    assert affinity(A, A) == pytest.approx(1.0)
    assert affinity(e[:, :1], e[:, 1:]) == 0.0


def test_principal_angles_rejects_non_orthonormal():
    with pytest.raises(InvalidBasisError):
        principal_angles(np.array([[2.0], [0.0]]), np.array([[1.0], [0.0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(1, 4))
def test_affinity_symmetric_and_bounded(seed, d1, d2):
    rng = np.random.default_rng(seed)
    A = np.linalg.qr(rng.standard_normal((8, d1)))[0]
    B = np.linalg.qr(rng.standard_normal((8, d2)))[0]
    a, b = affinity(A, B), affinity(B, A)
    assert a == pytest.approx(b, abs=1e-12)
    assert 0.0 <= a <= 1.0
    # invariant under a change of basis inside each subspace
    Q = np.linalg.qr(rng.standard_normal((d1, d1)))[0]
    assert affinity(A @ Q, B) == pytest.approx(a, abs=1e-12)


def test_energy_dimension():
    assert energy_dimension([5, 3, 1, 1], 0.5) == 1
    assert energy_dimension([5, 3, 1, 1], 0.8) == 2
    assert energy_dimension([1, 1, 1, 1], 1.0) == 4
    assert energy_dimension([2, 0, 0], 0.9) == 1


def test_pca_fit_recovers_clean_subspace(rng):
    U = np.linalg.qr(rng.standard_normal((10, 3)))[0]
    pts = U @ rng.standard_normal((3, 40))
    S = fit_subspace_pca(pts)
    assert S.dim == 3
    assert affinity(S, U) == pytest.approx(1.0)
    assert fit_subspace_pca(pts, dim=2).dim == 2
    with pytest.raises(ValueError):
        fit_subspace_pca(pts, dim=2, energy=0.5)
    with pytest.raises(DegenerateInputError):
        fit_subspace_pca(np.zeros((10, 0)))


def test_subspace_accepts_vector():
    S = Subspace(np.array([1.0, 0.0]))
    assert S.dim == 1


def test_diagnostics_reports_conditions():
    data = generate(ModelConfig(60, [(4, 10), (4, 10)], noise_sigma=0.1, orthogonal=True))
    diag = diagnostics(data)
    assert diag.affinities.shape == (2, 2)
    assert np.all(diag.affinity_ok)
    assert np.all(diag.density_ok)
    assert diag.noise_ok
    assert diag.constants["sigma"] == pytest.approx(0.1, rel=0.3)
