"""Boundary-map layer: bases, matrices, pairings, noise, file formats."""

import numpy as np
import pytest

from cgolab import BoundaryField, ConfigError, Potential, build_grid, direction_mask
from cgolab.dtn import (
    DEFAULT_WEIGHTS,
    DtnBasis,
    DtnMatrix,
    DtnOracle,
    add_noise,
    assemble_difference_matrix,
    assemble_dtn_matrix,
    dtn_apply,
    faces_within,
    load_field,
    operator_norm,
    pairing,
    pairing_volume,
    partial_dtn_apply,
    save_field,
)
from cgolab.norms import boundary_sobolev_weights


def _random_boundary_data(grid, rng):
    a, b, c = rng.normal(size=3)

    def fn(pts, t):
        return ((a + 1j * b) * np.sin(np.pi * (pts[:, 0] + 0.3))
                * np.sin(np.pi * (abs(c) % 1.3 + 0.2) * t / grid.T))

    return BoundaryField.from_callable(grid, fn)


def _cosine_potential(grid, amp):
    xs = grid.space_coordinates()[0]
    vals = amp * np.sin(np.pi * xs)[None, :] * np.cos(np.pi * grid.ts / grid.T)[:, None]
    return Potential(grid, np.broadcast_to(vals, grid.field_shape).copy(), m=amp)


def test_lateral_basis_is_orthonormal():
    g = build_grid(2, 17, 33, 1.0)
    basis = DtnBasis(g, j_max=2, k_max=1)
    assert basis.lateral_size == 4 * 2 * 3
    gram = np.empty((basis.lateral_size, basis.lateral_size), dtype=np.complex128)
    for i in range(basis.lateral_size):
        f, init = basis.mode_data(i)
        assert init is None
        gram[:, i] = basis.project(f)
    assert np.abs(gram - np.eye(basis.lateral_size)).max() < 1e-12


def test_project_synthesize_round_trip():
    g = build_grid(1, 17, 33, 2.0)
    basis = DtnBasis(g, k_max=3)
    rng = np.random.default_rng(5)
    coeffs = rng.normal(size=basis.lateral_size) + 1j * rng.normal(size=basis.lateral_size)
    f = basis.synthesize(coeffs)
    back = basis.project(f)
    assert np.abs(back - coeffs).max() < 1e-12
    with pytest.raises(ValueError):
        basis.synthesize(coeffs[:-1])


def test_initial_modes_extend_the_input_side():
    g = build_grid(2, 17, 17, 1.0)
    basis = DtnBasis(g, j_max=1, k_max=0, initial_modes=2)
    assert basis.size == basis.lateral_size + 2
    lateral, init = basis.mode_data(basis.lateral_size)
    assert np.all(lateral.values == 0)
    # first initial mode is the (1,1) sine product with unit L2 norm
    X, Y = g.space_coordinates()
    expected = 2.0 * np.sin(np.pi * X) * np.sin(np.pi * Y)
    assert np.abs(init - expected).max() < 1e-12
    mass = float(np.sum(g.space_weights * np.abs(init) ** 2))
    assert mass == pytest.approx(1.0, rel=1e-3)


def test_basis_validation():
    g = build_grid(2, 9, 9, 1.0)
    with pytest.raises(ConfigError, match="j_max"):
        DtnBasis(g, j_max=8, k_max=1)
    with pytest.raises(ConfigError, match="k_max"):
        DtnBasis(g, j_max=1, k_max=5)
    with pytest.raises(ConfigError, match="initial modes"):
        DtnBasis(build_grid(1, 9, 9, 1.0), initial_modes=100)


def test_basis_descriptor_round_trip():
    g = build_grid(2, 17, 33, 1.5)
    basis = DtnBasis(g, j_max=3, k_max=2, faces=[0, 2], initial_modes=1)
    clone = DtnBasis.from_descriptor(basis.descriptor())
    assert clone.lateral_modes == basis.lateral_modes
    assert clone.init_modes == basis.init_modes
    assert clone.grid.same_layout(g)


def test_faces_within_direction_mask():
    g = build_grid(2, 17, 33, 1.0)
    plus_x = direction_mask(g, [1.0, 0.0], 0.25, sign=1)
    assert faces_within(g, plus_x) == [1]
    everything = plus_x.union(plus_x.complement())
    assert faces_within(g, everything) == [0, 1, 2, 3]


def test_dtn_apply_is_linear():
    g = build_grid(1, 17, 17, 1.0)
    q = _cosine_potential(g, 0.5)
    rng = np.random.default_rng(2)
    f1 = _random_boundary_data(g, rng)
    f2 = _random_boundary_data(g, rng)
    both = BoundaryField(g, 2.0 * f1.values - 0.5j * f2.values)
    combo = dtn_apply(g, q, both)
    split = 2.0 * dtn_apply(g, q, f1).values - 0.5j * dtn_apply(g, q, f2).values
    assert np.abs(combo.values - split).max() < 1e-10


def test_pairing_matches_volume_identity():
    # boundary and volume sides of the map-difference pairing are independent
    # code paths; on a 33x33 grid they agree to ~3 percent
    g = build_grid(1, 33, 33, 1.0)
    q = _cosine_potential(g, 0.6)
    rng = np.random.default_rng(11)
    gdat = _random_boundary_data(g, rng)
    hdat = _random_boundary_data(g, rng)
    pb = pairing(g, q, None, gdat, hdat)
    pv = pairing_volume(g, q, None, gdat, hdat)
    assert abs(pb - pv) / abs(pv) < 0.05


def test_matrix_shape_and_validation():
    xi = np.array([0.0, np.pi**2])
    tau = np.array([0.0, 2 * np.pi])
    with pytest.raises(ValueError, match="shape"):
        DtnMatrix(np.zeros((3, 2)), xi, tau, xi, tau)
    bad = np.full((2, 2), np.nan)
    with pytest.raises(ValueError, match="finite"):
        DtnMatrix(bad, xi, tau, xi, tau)


def test_weighted_matrix_matches_hand_formula():
    rng = np.random.default_rng(3)
    xi = np.array([0.0, np.pi**2, 4 * np.pi**2])
    tau = np.array([0.0, 2 * np.pi, -2 * np.pi])
    mat = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m = DtnMatrix(mat, xi, tau, xi, tau)
    r_in, s_in, r_out, s_out = DEFAULT_WEIGHTS
    w_in = boundary_sobolev_weights(xi, tau, r_in, s_in)
    w_out = boundary_sobolev_weights(xi, tau, r_out, s_out)
    assert np.allclose(m.weighted(), w_out[:, None] * mat / w_in[None, :])


def test_operator_norm_against_power_iteration():
    g = build_grid(1, 17, 33, 1.0)
    q = _cosine_potential(g, 0.5)
    basis = DtnBasis(g, k_max=3)
    m = assemble_dtn_matrix(g, q, basis) - assemble_dtn_matrix(g, None, basis)
    w = m.weighted()
    v = np.random.default_rng(0).standard_normal(w.shape[1]).astype(np.complex128)
    for _ in range(300):
        v = w.conj().T @ (w @ v)
        v /= np.linalg.norm(v)
    assert np.linalg.norm(w @ v) == pytest.approx(operator_norm(m), rel=1e-8)


def test_add_noise_hits_exact_level_and_is_deterministic():
    g = build_grid(1, 17, 33, 1.0)
    basis = DtnBasis(g, k_max=3)
    m = assemble_dtn_matrix(g, _cosine_potential(g, 0.5), basis)
    noisy = add_noise(m, 0.125, 4)
    assert operator_norm(noisy - m) == pytest.approx(0.125, rel=1e-12)
    again = add_noise(m, 0.125, 4)
    assert np.array_equal(noisy.matrix, again.matrix)
    assert noisy.meta["noise_delta"] == 0.125
    assert np.array_equal(add_noise(m, 0.0, 4).matrix, m.matrix)
    with pytest.raises(ConfigError):
        add_noise(m, -0.1, 4)


def test_same_seed_noise_scales_proportionally():
    g = build_grid(1, 17, 33, 1.0)
    basis = DtnBasis(g, k_max=3)
    m = assemble_dtn_matrix(g, _cosine_potential(g, 0.5), basis)
    big = add_noise(m, 0.1, 7).matrix - m.matrix
    small = add_noise(m, 0.001, 7).matrix - m.matrix
    assert np.allclose(big, 100.0 * small, rtol=1e-10)


def test_matrix_save_load_round_trip(tmp_path):
    g = build_grid(1, 17, 33, 1.0)
    basis = DtnBasis(g, k_max=2)
    m = assemble_dtn_matrix(g, _cosine_potential(g, 0.5), basis)
    path = tmp_path / "map.dtn"
    m.save(path)
    back = DtnMatrix.load(path)
    # payload is stored in single precision
    assert np.abs(back.matrix - m.matrix).max() < 1e-6 * max(1.0, np.abs(m.matrix).max())
    assert np.array_equal(back.xi_sq_in, m.xi_sq_in)
    assert np.array_equal(back.tau_out, m.tau_out)
    assert back.weights == m.weights
    bogus = tmp_path / "bogus.dtn"
    bogus.write_bytes(b'{"format": "something-else"}\n')
    with pytest.raises(ConfigError, match="not a dtn matrix"):
        DtnMatrix.load(bogus)


def test_field_save_load_round_trip(tmp_path):
    from cgolab import ScalarField

    g = build_grid(2, 9, 9, 1.0)
    rng = np.random.default_rng(8)
    vals = rng.normal(size=g.field_shape) + 1j * rng.normal(size=g.field_shape)
    f = ScalarField(g, vals)
    path = tmp_path / "state.field"
    save_field(path, f)
    back = load_field(path)
    assert back.grid.same_layout(g)
    assert np.abs(back.values - vals).max() < 1e-6
    short = tmp_path / "short.field"
    with open(path, "rb") as fh:
        data = fh.read()
    short.write_bytes(data[:-16])
    with pytest.raises(ConfigError, match="samples"):
        load_field(short)


def test_partial_apply_enforces_support():
    g = build_grid(2, 17, 17, 1.0)
    support = direction_mask(g, [1.0, 0.0], 0.25, sign=1)
    obs = direction_mask(g, [1.0, 0.0], 0.25, sign=-1)
    rng = np.random.default_rng(1)
    gdat = _random_boundary_data(g, rng)
    with pytest.raises(ConfigError, match="support"):
        partial_dtn_apply(g, None, gdat, support, obs)
    inside = gdat.restricted(support)
    resp = partial_dtn_apply(g, None, inside, support, obs)
    assert np.all(resp.values[:, ~obs.values] == 0)


def test_oracle_noise_closed_loop():
    # with the difference assembled in the oracle's own noise basis and a zero
    # map difference, only the injected perturbation survives: its weighted
    # norm is exactly the requested level
    g = build_grid(1, 33, 33, 1.0)
    basis = DtnBasis(g, k_max=3)
    oracle = DtnOracle(g, None, noise_delta=0.05, noise_seed=9, noise_basis=basis)
    diff = assemble_difference_matrix(oracle, None, basis)
    assert operator_norm(diff) == pytest.approx(0.05, rel=1e-10)
    clean = DtnOracle(g, None)
    diff0 = assemble_difference_matrix(clean, None, basis)
    assert operator_norm(diff0) < 1e-12


def test_oracle_enforces_support_mask():
    g = build_grid(2, 17, 17, 1.0)
    support = direction_mask(g, [0.0, 1.0], 0.25, sign=1)
    oracle = DtnOracle(g, None, support_mask=support)
    rng = np.random.default_rng(4)
    with pytest.raises(ConfigError, match="support"):
        oracle.apply(_random_boundary_data(g, rng))


def test_output_basis_rejects_initial_modes():
    g = build_grid(1, 17, 17, 1.0)
    basis_in = DtnBasis(g, k_max=2, initial_modes=1)
    with pytest.raises(ConfigError, match="initial modes"):
        assemble_dtn_matrix(g, None, basis_in, basis_out=basis_in)
