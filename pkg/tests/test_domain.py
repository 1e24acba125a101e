import numpy as np
import pytest
from hypothesis import given, strategies as st

from pqvar.domain import (
    DiscreteFunction,
    ScalarField,
    build_mesh,
    lr_norm,
    negative_part,
    positive_part,
    read_csv,
    sobolev_gradient_norm,
    write_csv,
)


@pytest.fixture(scope="module")
def hat():
    mesh = build_mesh(1, [0.0, 1.0], 2)
    return DiscreteFunction(mesh, [0.0, 1.0, 0.0])


def test_mesh_shapes():
    m1 = build_mesh(1, [0.0, 2.0], 8)
    assert m1.num_nodes == 9 and m1.num_elements == 8
    assert m1.volume == pytest.approx(2.0)
    m2 = build_mesh(2, [[0.0, 1.0], [0.0, 2.0]], 4)
    assert m2.num_nodes == 25 and m2.num_elements == 32
    assert m2.volume == pytest.approx(2.0)
    assert int(m2.interior.sum()) == 9


@pytest.mark.parametrize("dim,extent,n", [(1, [1.0, 1.0], 4), (1, [0.0, 1.0], 1), (3, [0.0, 1.0], 4)])
def test_mesh_rejects_bad_input(dim, extent, n):
    with pytest.raises(ValueError):
        build_mesh(dim, extent, n)


def test_boundary_values_must_vanish(hat):
    with pytest.raises(ValueError, match="boundary"):
        DiscreteFunction(hat.mesh, [1.0, 1.0, 0.0])


def test_hat_gradient_energy(hat):
    assert sobolev_gradient_norm(hat, 2.0) == pytest.approx(4.0, rel=1e-14)
    assert sobolev_gradient_norm(hat, 3.0, ScalarField.constant(2.0)) == pytest.approx(16.0, rel=1e-14)


def test_hat_l2_norm_is_exact(hat):
    # int_0^1 hat^2 = 2 * int_0^1/2 (2x)^2 dx = 1/3; two-point Gauss integrates it exactly
    assert lr_norm(hat, 2.0) == pytest.approx(np.sqrt(1.0 / 3.0), rel=1e-14)


def test_lr_norm_of_zero_and_constant():
    for n in (8, 64, 512):
        mesh = build_mesh(1, [0.0, 1.0], n)
        assert lr_norm(DiscreteFunction.zeros(mesh), 2.5) == 0.0
    prev = 0.0
    for n in (8, 64, 512):
        mesh = build_mesh(1, [0.0, 1.0], n)
        val = lr_norm(DiscreteFunction.from_callable(mesh, lambda x: np.ones(len(x))), 2.0)
        assert prev < val < 1.0
        prev = val
    assert prev > 0.998


def test_sine_interpolant_converges_second_order():
    errs = []
    for n in (16, 32, 64, 128):
        mesh = build_mesh(1, [0.0, 1.0], n)
        u = DiscreteFunction.from_callable(mesh, lambda x: np.sin(np.pi * x[:, 0]))
        errs.append(abs(lr_norm(u, 2.0) - np.sqrt(0.5)))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_sign_parts_example():
    mesh = build_mesh(1, [0.0, 3.0], 3)
    u = DiscreteFunction(mesh, [0.0, -2.0, 3.0, 0.0])
    assert positive_part(u).values.tolist() == [0.0, 0.0, 3.0, 0.0]
    assert negative_part(u).values.tolist() == [0.0, 2.0, 0.0, 0.0]
    w = DiscreteFunction(mesh, [0.0, 1.0, 4.0, 0.0])
    assert np.array_equal(positive_part(w).values, w.values)
    assert not np.any(negative_part(w).values)


@given(seed=st.integers(0, 2**32 - 1), dim=st.sampled_from([1, 2]))
def test_sign_decomposition_exact(seed, dim):
    mesh = build_mesh(dim, [0.0, 1.0] if dim == 1 else [[0.0, 1.0], [0.0, 1.0]], 7)
    u = DiscreteFunction.from_interior(mesh, np.random.default_rng(seed).normal(size=mesh.num_nodes))
    up, um = positive_part(u), negative_part(u)
    assert np.array_equal(up.values - um.values, u.values)
    assert np.array_equal(up.values + um.values, np.abs(u.values))


@given(seed=st.integers(0, 2**32 - 1), r=st.floats(1.1, 4.0))
def test_weight_floor_bounds_energy(seed, r):
    mesh = build_mesh(2, [[0.0, 1.0], [0.0, 1.0]], 5)
    a = ScalarField.family("sine_bump", base=0.3, amplitude=2.0, extent=[[0.0, 1.0], [0.0, 1.0]])
    c1 = float(a.on_mesh(mesh).min())
    u = DiscreteFunction.from_interior(mesh, np.random.default_rng(seed).normal(size=mesh.num_nodes))
    assert sobolev_gradient_norm(u, r, a) >= c1 * sobolev_gradient_norm(u, r) * (1 - 1e-12)


def test_nonpositive_weight_rejected(hat):
    with pytest.raises(ValueError, match="positive"):
        sobolev_gradient_norm(hat, 2.0, ScalarField.constant(-1.0))


def test_csv_roundtrip(tmp_path, small_mesh_2d):
    rng = np.random.default_rng(3)
    u = DiscreteFunction.from_interior(small_mesh_2d, rng.normal(size=small_mesh_2d.num_nodes))
    path = tmp_path / "u.csv"
    write_csv(u, path)
    assert path.read_text().splitlines()[0] == "node_index,x,y,value"
    assert np.array_equal(read_csv(path, small_mesh_2d).values, u.values)


def test_tabulated_weight_matches_interpolant(small_mesh_1d):
    nodal = 1.0 + small_mesh_1d.nodes[:, 0]
    a = ScalarField.tabulated(small_mesh_1d, nodal)
    pts = small_mesh_1d.qp_points
    assert np.allclose(a.on_mesh(small_mesh_1d), 1.0 + pts[:, 0], atol=1e-13)
