"""Boundary measurement maps: full, partial, and initial-data-extended.

The Dirichlet-to-Neumann action is a forward solve plus a normal-derivative
trace.  For operator-level work (norm estimation, calibrated noise) the map
is discretized in an orthonormal boundary basis: per-face sine profiles in
space tensored with Fourier modes in time, which the trapezoid quadrature
keeps exactly orthonormal and which diagonalize the anisotropic Sobolev
weights.  Matrices serialize to a one-line JSON header followed by raw
row-major complex64 bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigError
from .fields import BoundaryField, Potential, ScalarField
from .forward import ThetaScheme, neumann_trace, solve_backward, solve_forward
from .grid import DirectionMask, Grid, build_grid
from .norms import boundary_sobolev_weights

__all__ = [
    "DtnBasis",
    "DtnMatrix",
    "DtnOracle",
    "dtn_apply",
    "partial_dtn_apply",
    "pairing",
    "pairing_volume",
    "assemble_dtn_matrix",
    "assemble_difference_matrix",
    "operator_norm",
    "add_noise",
    "faces_within",
    "save_field",
    "load_field",
]

# (r_in, s_in, r_out, s_out): data space smoothness -1/2,-1/4, difference
# output measured in the smoother 1/2,1/4 scale
DEFAULT_WEIGHTS = (-0.5, -0.25, 0.5, 0.25)


def faces_within(grid: Grid, mask: DirectionMask) -> list:
    """Face ids whose every owned boundary point lies in the mask."""
    out = []
    for fid in range(len(grid.faces)):
        pts = grid.boundary_face == fid
        if pts.any() and bool(mask.values[pts].all()):
            out.append(fid)
    return out


class DtnBasis:
    """Orthonormal lateral-boundary basis, optionally extended by initial modes.

    Lateral mode (face, j, k): sine profile of index j along the face (the
    constant profile on point faces in one dimension) times e^{2 pi i k t/T},
    normalized to unit discrete Sigma-norm.  Initial modes are interior sine
    products on the spatial box, used only as inputs of the extended map.
    """

    def __init__(self, grid: Grid, j_max: int | None = None, k_max: int | None = None,
                 faces=None, initial_modes: int = 0):
        self.grid = grid
        if faces is None:
            faces = list(range(len(grid.faces)))
        self.faces = list(faces)
        if grid.n == 1:
            self.j_max = 0
            js = [0]
        else:
            if j_max is None:
                j_max = min(4, grid.nx - 2)
            if not 1 <= j_max <= grid.nx - 2:
                raise ConfigError(f"j_max must lie in [1, {grid.nx - 2}], got {j_max}")
            self.j_max = j_max
            js = list(range(1, j_max + 1))
        if k_max is None:
            k_max = min(4, (grid.nt - 2) // 2)
        if not 0 <= 2 * k_max < grid.nt - 1:
            raise ConfigError(
                f"k_max must satisfy 2*k_max < nt-1 = {grid.nt - 1}, got {k_max}"
            )
        self.k_max = k_max
        self.initial_modes = int(initial_modes)

        self.lateral_modes = [
            (fid, j, k)
            for fid in self.faces
            for j in js
            for k in range(-k_max, k_max + 1)
        ]
        self.init_modes = self._initial_mode_indices(self.initial_modes)
        self._mode_cache = {}
        self._init_cache = {}

        xi_sq, tau = [], []
        for fid, j, k in self.lateral_modes:
            xi_sq.append((j * np.pi) ** 2)
            tau.append(2 * np.pi * k / grid.T)
        for js_tuple in self.init_modes:
            xi_sq.append(sum((j * np.pi) ** 2 for j in js_tuple))
            tau.append(0.0)
        self.xi_sq = np.asarray(xi_sq)
        self.tau = np.asarray(tau)

    def _initial_mode_indices(self, count: int):
        if count == 0:
            return []
        if self.grid.n == 1:
            pool = [(j,) for j in range(1, self.grid.nx - 1)]
        else:
            lim = self.grid.nx - 2
            pool = sorted(
                ((j, k) for j in range(1, lim + 1) for k in range(1, lim + 1)),
                key=lambda p: (p[0] ** 2 + p[1] ** 2, p),
            )
        if count > len(pool):
            raise ConfigError(f"at most {len(pool)} initial modes fit this grid")
        return pool[:count]

    @property
    def size(self) -> int:
        return len(self.lateral_modes) + len(self.init_modes)

    @property
    def lateral_size(self) -> int:
        return len(self.lateral_modes)

    def _lateral_values(self, mode) -> np.ndarray:
        vals = self._mode_cache.get(mode)
        if vals is not None:
            return vals
        grid = self.grid
        fid, j, k = mode
        face = grid.faces[fid]
        pts = np.flatnonzero(grid.boundary_face == fid)
        if grid.n == 1:
            profile = np.ones(pts.size)
            norm = 1.0 / np.sqrt(grid.T)
        else:
            other = 1 - face.axis
            s = grid.xs[grid.boundary_index[other][pts]]
            profile = np.sin(j * np.pi * s)
            norm = 1.0 / np.sqrt(grid.T / 2.0)
        tfac = np.exp(2j * np.pi * k * grid.ts / grid.T)
        vals = np.zeros((grid.nt, grid.n_boundary), dtype=np.complex128)
        vals[:, pts] = norm * tfac[:, None] * profile[None, :]
        self._mode_cache[mode] = vals
        return vals

    def _initial_values(self, js_tuple) -> np.ndarray:
        vals = self._init_cache.get(js_tuple)
        if vals is not None:
            return vals
        grid = self.grid
        coords = grid.space_coordinates()
        out = np.ones(grid.space_shape)
        for a, j in enumerate(js_tuple):
            out = out * np.sin(j * np.pi * np.broadcast_to(coords[a], grid.space_shape))
        out = out * np.sqrt(2.0) ** grid.n
        self._init_cache[js_tuple] = out
        return out

    def mode_data(self, i: int):
        """(lateral BoundaryField, initial slice or None) of input mode i."""
        if i < len(self.lateral_modes):
            return (
                BoundaryField(self.grid, self._lateral_values(self.lateral_modes[i])),
                None,
            )
        js_tuple = self.init_modes[i - len(self.lateral_modes)]
        zero = BoundaryField.zeros(self.grid)
        return zero, self._initial_values(js_tuple).astype(np.complex128)

    def project(self, f: BoundaryField) -> np.ndarray:
        """Coefficients of the lateral modes (orthonormal, so inner products)."""
        out = np.empty(len(self.lateral_modes), dtype=np.complex128)
        for i, mode in enumerate(self.lateral_modes):
            out[i] = self.grid.integrate_boundary(
                f.values * np.conj(self._lateral_values(mode))
            )
        return out

    def synthesize(self, coeffs) -> BoundaryField:
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (len(self.lateral_modes),):
            raise ValueError("coefficient vector does not match the lateral basis")
        vals = np.zeros((self.grid.nt, self.grid.n_boundary), dtype=np.complex128)
        for c, mode in zip(coeffs, self.lateral_modes):
            if c != 0:
                vals += c * self._lateral_values(mode)
        return BoundaryField(self.grid, vals)

    def descriptor(self) -> dict:
        return {
            "n": self.grid.n,
            "nx": self.grid.nx,
            "nt": self.grid.nt,
            "T": self.grid.T,
            "j_max": self.j_max,
            "k_max": self.k_max,
            "faces": self.faces,
            "initial_modes": self.initial_modes,
        }

    @classmethod
    def from_descriptor(cls, d: dict) -> "DtnBasis":
        grid = build_grid(d["n"], d["nx"], d["nt"], d["T"])
        return cls(grid, d["j_max"] or None, d["k_max"], d["faces"], d["initial_modes"])


@dataclass
class DtnMatrix:
    """Basis-coefficient matrix of a boundary map (or map difference)."""

    matrix: np.ndarray
    xi_sq_in: np.ndarray
    tau_in: np.ndarray
    xi_sq_out: np.ndarray
    tau_out: np.ndarray
    weights: tuple = DEFAULT_WEIGHTS
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.complex128)
        if self.matrix.shape != (self.xi_sq_out.size, self.xi_sq_in.size):
            raise ValueError("matrix shape does not match the basis descriptors")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("matrix has non-finite entries")

    def weighted(self) -> np.ndarray:
        r_in, s_in, r_out, s_out = self.weights
        w_in = boundary_sobolev_weights(self.xi_sq_in, self.tau_in, r_in, s_in)
        w_out = boundary_sobolev_weights(self.xi_sq_out, self.tau_out, r_out, s_out)
        return w_out[:, None] * self.matrix / w_in[None, :]

    def __sub__(self, other: "DtnMatrix") -> "DtnMatrix":
        if self.matrix.shape != other.matrix.shape:
            raise ValueError("matrix shapes differ")
        return DtnMatrix(
            self.matrix - other.matrix,
            self.xi_sq_in,
            self.tau_in,
            self.xi_sq_out,
            self.tau_out,
            self.weights,
            dict(self.meta),
        )

    def save(self, path) -> None:
        header = {
            "format": "dtn-matrix-v1",
            "rows": int(self.matrix.shape[0]),
            "cols": int(self.matrix.shape[1]),
            "dtype": "complex64",
            "order": "row-major",
            "weights": list(self.weights),
            "xi_sq_in": self.xi_sq_in.tolist(),
            "tau_in": self.tau_in.tolist(),
            "xi_sq_out": self.xi_sq_out.tolist(),
            "tau_out": self.tau_out.tolist(),
            "meta": self.meta,
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
            fh.write(b"\n")
            fh.write(np.ascontiguousarray(self.matrix.astype(np.complex64)).tobytes())

    @classmethod
    def load(cls, path) -> "DtnMatrix":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            header = json.loads(header_line.decode("utf-8"))
            if header.get("format") != "dtn-matrix-v1":
                raise ConfigError(f"not a dtn matrix file: {path}")
            payload = fh.read()
        rows, cols = header["rows"], header["cols"]
        mat = np.frombuffer(payload, dtype=np.complex64, count=rows * cols)
        return cls(
            mat.reshape(rows, cols).astype(np.complex128),
            np.asarray(header["xi_sq_in"]),
            np.asarray(header["tau_in"]),
            np.asarray(header["xi_sq_out"]),
            np.asarray(header["tau_out"]),
            tuple(header["weights"]),
            header.get("meta", {}),
        )


def operator_norm(m: DtnMatrix) -> float:
    """Largest singular value of the Sobolev-weighted matrix."""
    return float(np.linalg.svd(m.weighted(), compute_uv=False)[0])


def add_noise(m: DtnMatrix, delta: float, seed: int) -> DtnMatrix:
    """Additive complex Gaussian perturbation with weighted norm exactly delta."""
    if delta < 0:
        raise ConfigError(f"noise level must be nonnegative, got {delta}")
    out = DtnMatrix(
        m.matrix.copy(), m.xi_sq_in, m.tau_in, m.xi_sq_out, m.tau_out,
        m.weights, dict(m.meta),
    )
    if delta == 0:
        return out
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(m.matrix.shape) + 1j * rng.standard_normal(m.matrix.shape)
    probe = DtnMatrix(
        noise, m.xi_sq_in, m.tau_in, m.xi_sq_out, m.tau_out, m.weights
    )
    scale = delta / operator_norm(probe)
    out.matrix = out.matrix + scale * noise
    out.meta = dict(out.meta, noise_delta=delta, noise_seed=seed)
    return out


# ---------------------------------------------------------------------------
# Map actions


def dtn_apply(grid: Grid, q: Potential | None, g: BoundaryField, u0=None,
              theta: float = 0.5, scheme: ThetaScheme | None = None) -> BoundaryField:
    """Neumann trace of the forward solution with Dirichlet data g (and u0)."""
    u = solve_forward(grid, q, g, u0, None, theta, scheme=scheme,
                      warn_incompatible=False)
    return neumann_trace(u)


def _check_support(g: BoundaryField, support_mask: DirectionMask) -> None:
    outside = ~support_mask.values
    if not np.any(outside):
        return
    peak = max(g.max_abs(), 1.0)
    stray = np.abs(g.values[:, outside]).max()
    if stray > 1e-12 * peak:
        raise ConfigError(
            "input data does not vanish outside the support mask "
            f"(max magnitude {stray:.3e})"
        )


def partial_dtn_apply(grid: Grid, q: Potential | None, g: BoundaryField,
                      support_mask: DirectionMask, obs_mask: DirectionMask,
                      theta: float = 0.5) -> BoundaryField:
    """Masked map: inputs supported on one boundary part, outputs observed on
    another.  Violating the support constraint is an error, not a clip."""
    _check_support(g, support_mask)
    return dtn_apply(grid, q, g, None, theta).restricted(obs_mask)


def pairing(grid: Grid, q: Potential | None, q_ref: Potential | None,
            g: BoundaryField, h: BoundaryField, theta: float = 0.5,
            obs_mask: DirectionMask | None = None) -> complex:
    """Boundary-side pairing of the map difference against test data h:
    the lateral integral of [(map_q - map_ref) g] * h."""
    diff = dtn_apply(grid, q, g, None, theta).values - dtn_apply(
        grid, q_ref, g, None, theta
    ).values
    if obs_mask is not None:
        diff = diff * obs_mask.values[None, :]
    return complex(grid.integrate_boundary(diff * h.values))


def pairing_volume(grid: Grid, q: Potential | None, q_ref: Potential | None,
                   g: BoundaryField, h: BoundaryField, theta: float = 0.5) -> complex:
    """Volume side of the same pairing: integral of (q - q_ref) u+ u- with
    u+ the forward solution for (q, g) and u- the backward one for (q_ref, h).
    Independent code path used to verify the boundary identity."""
    qv = 0.0 if q is None else q.values
    rv = 0.0 if q_ref is None else q_ref.values
    u_fwd = solve_forward(grid, q, g, None, None, theta, warn_incompatible=False)
    u_bwd = solve_backward(grid, q_ref, h, None, None, theta, warn_incompatible=False)
    return complex(grid.integrate_volume((qv - rv) * u_fwd.values * u_bwd.values))


# ---------------------------------------------------------------------------
# Matrix assembly and the measurement oracle


def assemble_dtn_matrix(grid: Grid, q: Potential | None, basis_in: DtnBasis,
                        basis_out: DtnBasis | None = None, theta: float = 0.5,
                        obs_mask: DirectionMask | None = None,
                        weights=DEFAULT_WEIGHTS) -> DtnMatrix:
    """Column-by-column probing of the map in the given bases."""
    if basis_out is None:
        basis_out = basis_in
    if basis_out.initial_modes:
        raise ConfigError("output basis cannot carry initial modes")
    scheme = ThetaScheme(grid, q, theta)
    cols = []
    for i in range(basis_in.size):
        g, u0 = basis_in.mode_data(i)
        resp = dtn_apply(grid, q, g, u0, theta, scheme=scheme)
        if obs_mask is not None:
            resp = resp.restricted(obs_mask)
        cols.append(basis_out.project(resp))
    return DtnMatrix(
        np.column_stack(cols),
        basis_in.xi_sq,
        basis_in.tau,
        basis_out.xi_sq,
        basis_out.tau,
        weights,
        {"basis_in": basis_in.descriptor(), "basis_out": basis_out.descriptor()},
    )


class DtnOracle:
    """Measurement interface handed to the inversion pipeline.

    Wraps the hidden truth potential behind an apply() action, with optional
    support/observation masks and an optional calibrated noise operator that
    perturbs responses consistently with the noisy matrix it reports.
    """

    def __init__(self, grid: Grid, q: Potential | None, *,
                 support_mask: DirectionMask | None = None,
                 obs_mask: DirectionMask | None = None,
                 theta: float = 0.5,
                 noise_delta: float = 0.0, noise_seed: int = 0,
                 noise_basis: DtnBasis | None = None):
        self.grid = grid
        self._q = q
        self.support_mask = support_mask
        self.obs_mask = obs_mask
        self.theta = theta
        self.noise_delta = float(noise_delta)
        self.noise_seed = int(noise_seed)
        self._scheme = ThetaScheme(grid, q, theta)
        self._noise_basis = None
        self._noise_matrix = None
        if self.noise_delta > 0:
            if noise_basis is None:
                noise_basis = DtnBasis(grid)
            if noise_basis.initial_modes:
                raise ConfigError("noise basis must be lateral-only")
            rng = np.random.default_rng(self.noise_seed)
            shape = (noise_basis.lateral_size, noise_basis.lateral_size)
            e = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
            probe = DtnMatrix(
                e, noise_basis.xi_sq, noise_basis.tau,
                noise_basis.xi_sq, noise_basis.tau, DEFAULT_WEIGHTS,
            )
            self._noise_basis = noise_basis
            self._noise_matrix = e * (self.noise_delta / operator_norm(probe))

    def apply(self, g: BoundaryField, u0=None) -> BoundaryField:
        if self.support_mask is not None:
            _check_support(g, self.support_mask)
        resp = dtn_apply(self.grid, self._q, g, u0, self.theta, scheme=self._scheme)
        if self._noise_matrix is not None:
            coeffs = self._noise_matrix @ self._noise_basis.project(g)
            resp = BoundaryField(
                self.grid, resp.values + self._noise_basis.synthesize(coeffs).values
            )
        if self.obs_mask is not None:
            resp = resp.restricted(self.obs_mask)
        return resp

    def pair_against(self, q_ref: Potential | None, g: BoundaryField,
                     h: BoundaryField) -> complex:
        """Pairing of (measured map - simulated reference map) g against h."""
        diff = self.apply(g).values - self._reference_response(q_ref, g).values
        return complex(self.grid.integrate_boundary(diff * h.values))

    def _reference_response(self, q_ref, g: BoundaryField) -> BoundaryField:
        resp = dtn_apply(self.grid, q_ref, g, None, self.theta)
        if self.obs_mask is not None:
            resp = resp.restricted(self.obs_mask)
        return resp


def assemble_difference_matrix(oracle: DtnOracle, q_ref: Potential | None,
                               basis_in: DtnBasis, basis_out: DtnBasis | None = None,
                               weights=DEFAULT_WEIGHTS) -> DtnMatrix:
    """Matrix of (measured map - simulated reference map) in the given bases.

    The operator norm of this matrix is the measured data-distance fed to
    parameter selection.
    """
    if basis_out is None:
        basis_out = basis_in
    if basis_out.initial_modes:
        raise ConfigError("output basis cannot carry initial modes")
    grid = oracle.grid
    ref_scheme = ThetaScheme(grid, q_ref, oracle.theta)
    cols = []
    for i in range(basis_in.size):
        g, u0 = basis_in.mode_data(i)
        measured = oracle.apply(g, u0)
        ref = dtn_apply(grid, q_ref, g, u0, oracle.theta, scheme=ref_scheme)
        if oracle.obs_mask is not None:
            ref = ref.restricted(oracle.obs_mask)
        cols.append(basis_out.project(BoundaryField(grid, measured.values - ref.values)))
    return DtnMatrix(
        np.column_stack(cols),
        basis_in.xi_sq,
        basis_in.tau,
        basis_out.xi_sq,
        basis_out.tau,
        weights,
        {"basis_in": basis_in.descriptor(), "basis_out": basis_out.descriptor()},
    )


def save_field(path, field: ScalarField) -> None:
    """Field dump: one-line JSON header (grid layout, dtype) + raw complex64
    bytes in C order; same container convention as the matrix format."""
    grid = field.grid
    header = {
        "format": "dtn-field-v1",
        "n": grid.n,
        "nx": grid.nx,
        "nt": grid.nt,
        "T": grid.T,
        "dtype": "complex64",
        "order": "C",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(field.values.astype(np.complex64)).tobytes())


def load_field(path) -> ScalarField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != "dtn-field-v1":
            raise ConfigError(f"not a field dump: {path}")
        grid = build_grid(header["n"], header["nx"], header["nt"], header["T"])
        raw = np.frombuffer(fh.read(), dtype=np.complex64)
    expected = grid.nt * grid.nx**grid.n
    if raw.size != expected:
        raise ConfigError(
            f"field dump has {raw.size} samples, layout expects {expected}"
        )
    return ScalarField(grid, raw.reshape(grid.field_shape).astype(np.complex128))
