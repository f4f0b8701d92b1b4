"""Inversion pipeline: probe pairings to Fourier slices to a cutoff inverse.

The potential difference p = (truth - reference) is recovered one frequency
at a time.  For a lattice node zeta = (xi, tau) with an admissible direction
omega orthogonal to xi, the pairing of the measured-minus-simulated map
difference against a pair of opposite probes approximates the normalized
transform of p at zeta.  Collecting slices over the ball |zeta| <= R on the
padded-torus lattice and inverting the transform gives the low-pass estimate;
everything outside the ball (and every infeasible node in partial mode) is
zero-filled.

Frequencies live on the same lattice as the negative-order norm machinery,
so with exact slices substituted the reconstruction error IS the Parseval
tail, which the tests pin to rounding accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .cgo import CgoParams, build_cgo
from .dtn import (
    DtnBasis,
    DtnOracle,
    assemble_difference_matrix,
    faces_within,
    operator_norm,
)
from .errors import ConfigError
from .fields import Potential, ScalarField
from .grid import Grid, direction_mask
from .norms import (
    ModulusParams,
    box_lengths,
    coefficients_to_field,
    fit_modulus_constant,
    hminus1_distance,
    torus_coefficients,
    zero_extend,
)

__all__ = [
    "FrequencyNode",
    "FrequencyGrid",
    "ReconstructionConfig",
    "ReconstructionResult",
    "StabilityRecord",
    "choose_direction",
    "build_frequency_grid",
    "partial_masks",
    "probe_rho_cap",
    "fourier_slice",
    "exact_slice_values",
    "select_parameters",
    "invert_cutoff",
    "reconstruct",
    "stability_sweep",
    "slice_error_report",
]


def choose_direction(xi, mode: str = "full", base_direction=None,
                     half_width: float = 0.0):
    """Unit direction orthogonal to xi, or None when none is admissible.

    Full mode rotates the lexicographically smallest coordinate axis that is
    not parallel to xi into the orthogonal complement.  Partial mode projects
    the base direction onto the complement and accepts the result only when
    it stays within the cone of the given half-width around the base, which
    at unit length means a projection of norm >= 1 - half_width^2/2.
    """
    xi = np.asarray(xi, dtype=float)
    n = xi.size
    if base_direction is None:
        base = np.zeros(n)
        base[0] = 1.0
    else:
        base = np.asarray(base_direction, dtype=float)
        if abs(np.linalg.norm(base) - 1.0) > 1e-12:
            raise ConfigError("base direction must be a unit vector")
    norm_xi = np.linalg.norm(xi)
    if norm_xi < 1e-14:
        return base
    if n == 1:
        return None
    hat = xi / norm_xi
    if mode == "full":
        axis = np.zeros(n)
        first_not_parallel = 0 if abs(abs(hat[0]) - 1.0) > 1e-12 else 1
        axis[first_not_parallel] = 1.0
        proj = axis - (axis @ hat) * hat
        return proj / np.linalg.norm(proj)
    if mode == "partial":
        if not 0.0 < half_width < math.sqrt(2.0):
            raise ConfigError(f"cone half-width must lie in (0, sqrt(2)), got {half_width}")
        proj = base - (base @ hat) * hat
        pn = np.linalg.norm(proj)
        if pn < 1.0 - half_width**2 / 2.0 - 1e-12:
            return None
        return proj / pn
    raise ConfigError(f"mode must be 'full' or 'partial', got {mode!r}")


@dataclass
class FrequencyNode:
    index: tuple          # FFT array index on the padded lattice (time first)
    xi: np.ndarray
    tau: float
    omega: np.ndarray | None
    feasible: bool
    canonical: bool
    mirror: tuple
    value: complex | None = None

    @property
    def zeta_norm(self) -> float:
        return math.hypot(float(np.linalg.norm(self.xi)), self.tau)


@dataclass
class FrequencyGrid:
    grid: Grid
    R: float
    mode: str
    base_direction: np.ndarray
    half_width: float
    nodes: list

    @property
    def padded_shape(self) -> tuple:
        g = self.grid
        return (2 * (g.nt - 1),) + (2 * (g.nx - 1),) * g.n

    def canonical_nodes(self):
        return [nd for nd in self.nodes if nd.canonical]

    def node_at(self, index) -> FrequencyNode:
        for nd in self.nodes:
            if nd.index == tuple(index):
                return nd
        raise KeyError(f"no node at lattice index {index}")

    def to_coefficients(self, hermitian: bool = True) -> np.ndarray:
        """Padded-lattice coefficient array: canonical values, conjugate
        mirrors (for real fields), zeros elsewhere."""
        out = np.zeros(self.padded_shape, dtype=np.complex128)
        for nd in self.canonical_nodes():
            if nd.value is None:
                continue
            out[nd.index] = nd.value
            if hermitian and nd.mirror != nd.index:
                out[nd.mirror] = np.conj(nd.value)
        if not hermitian:
            for nd in self.nodes:
                if not nd.canonical and nd.value is not None:
                    out[nd.index] = nd.value
        return out


def build_frequency_grid(grid: Grid, R: float, mode: str = "full",
                         base_direction=None, half_width: float = 0.0) -> FrequencyGrid:
    """All lattice nodes with |zeta| <= R, with directions attached."""
    if R < 0:
        raise ConfigError(f"cutoff radius must be nonnegative, got {R}")
    if base_direction is None:
        base = np.zeros(grid.n)
        base[0] = 1.0
    else:
        base = np.asarray(base_direction, dtype=float)
    nt2 = 2 * (grid.nt - 1)
    nx2 = 2 * (grid.nx - 1)
    tau_of = lambda s: math.pi * s / grid.T
    xi_of = lambda s: math.pi * s

    max_kt = min(nt2 // 2, int(math.floor(R * grid.T / math.pi)))
    max_kx = min(nx2 // 2, int(math.floor(R / math.pi)))
    t_range = range(-max_kt, max_kt + 1)
    x_range = range(-max_kx, max_kx + 1)

    nodes = []
    if grid.n == 1:
        signed_tuples = [(st, sx) for st in t_range for sx in x_range]
    else:
        signed_tuples = [
            (st, sx, sy) for st in t_range for sx in x_range for sy in x_range
        ]
    for signed in signed_tuples:
        st, sxs = signed[0], signed[1:]
        tau = tau_of(st)
        xi = np.array([xi_of(s) for s in sxs], dtype=float)
        if math.hypot(float(np.linalg.norm(xi)), tau) > R + 1e-12:
            continue
        index = tuple([st % nt2] + [s % nx2 for s in sxs])
        mirror = tuple((-i) % npts for i, npts in zip(index, (nt2,) + (nx2,) * grid.n))
        nonzero = [s for s in signed if s != 0]
        canonical = (not nonzero) or nonzero[0] > 0 or mirror == index
        omega = choose_direction(xi, mode, base, half_width) if mode == "partial" else (
            choose_direction(xi, "full", base)
        )
        nodes.append(
            FrequencyNode(
                index=index,
                xi=xi,
                tau=tau,
                omega=omega,
                feasible=omega is not None,
                canonical=canonical,
                mirror=mirror,
            )
        )
    return FrequencyGrid(grid, float(R), mode, base, float(half_width), nodes)


def partial_masks(grid: Grid, base_direction, mask_delta: float):
    """(support, observation) masks: everything except the far faces.

    Inputs may live anywhere except where the outward normal opposes the base
    direction beyond mask_delta; observations anywhere except where it
    follows the base direction beyond mask_delta.  Each is a neighborhood of
    the corresponding open half of the boundary.
    """
    support = direction_mask(grid, base_direction, mask_delta, sign=-1).complement()
    obs = direction_mask(grid, base_direction, mask_delta, sign=1).complement()
    return support, obs


def probe_rho_cap(grid: Grid) -> float:
    """Largest rho the grid can host: resolution (rho^2 ht <= 5) and weight
    overflow (rho sqrt(n) + rho^2 T <= 650) guards combined."""
    res = math.sqrt(5.0 / grid.ht)
    rn = math.sqrt(grid.n)
    overflow = (-rn + math.sqrt(rn**2 + 4.0 * 650.0 * grid.T)) / (2.0 * grid.T)
    return min(res, overflow)


def fourier_slice(oracle: DtnOracle, q_ref: Potential | None, xi, tau: float,
                  omega, rho: float, *, probe_q: Potential | None = None,
                  probe_delta: float = 0.25, vanish_plus=None, vanish_minus=None,
                  theta: float = 0.5) -> complex:
    """One normalized transform sample of (truth - reference) at (xi, tau).

    The forward probe carries the oscillation and is built with the reference
    potential (or probe_q when validating with the truth: the clairvoyant
    mode); the backward probe is always reference-built.  The value is
    (2 pi)^{-(n+1)/2} times the pairing of the map difference.
    """
    grid = oracle.grid
    xi = np.asarray(xi, dtype=float)
    plus_side = q_ref if probe_q is None else probe_q
    par_plus = CgoParams(1, omega, xi, tau, rho, probe_delta)
    sol_plus = build_cgo(grid, par_plus, plus_side, vanish_mask=vanish_plus,
                         theta=theta, compute_residual=False)
    par_minus = CgoParams(-1, omega, np.zeros(grid.n), 0.0, rho, probe_delta)
    sol_minus = build_cgo(grid, par_minus, q_ref, vanish_mask=vanish_minus,
                          theta=theta, compute_residual=False)
    g = sol_plus.boundary_trace()
    h = sol_minus.boundary_trace()
    val = oracle.pair_against(q_ref, g, h)
    return (2 * math.pi) ** (-(grid.n + 1) / 2) * val


def exact_slice_values(grid: Grid, p_values: np.ndarray, freq: FrequencyGrid) -> None:
    """Fill feasible nodes with the exact lattice transform of p (bypassing
    the measurement maps entirely); infeasible nodes get zero."""
    coeffs = torus_coefficients(zero_extend(grid, p_values), box_lengths(grid))
    for nd in freq.nodes:
        nd.value = complex(coeffs[nd.index]) if nd.feasible else 0.0


@dataclass
class SelectionResult:
    trivial: bool
    rho: float
    R: float
    saturated: bool = False


def select_parameters(delta: float, s: float, c: float,
                      rho_cap: float | None = None) -> SelectionResult:
    """Noise-balancing parameter rule.

    Small data distance: rho = sqrt(|ln delta| / (2c)) so the amplification
    e^{c rho^2} turns delta into sqrt(delta); cutoff R = rho^s.  Large
    distance (delta >= e^{-2}): the trivial branch, where the a-priori bound
    beats anything the data can add and the estimate is zero.
    """
    if delta < 0:
        raise ConfigError(f"data distance must be nonnegative, got {delta}")
    if not 0 < s < 1:
        raise ConfigError(f"s must lie in (0, 1), got {s}")
    if c <= 0:
        raise ConfigError(f"exponent constant must be positive, got {c}")
    if delta >= math.exp(-2):
        return SelectionResult(trivial=True, rho=0.0, R=0.0)
    if delta == 0.0:
        # perfect data: the rule's limit is rho -> infinity, so hand back the cap
        if rho_cap is None:
            raise ConfigError("zero data distance needs a rho cap")
        return SelectionResult(trivial=False, rho=rho_cap, R=rho_cap**s,
                               saturated=True)
    rho = math.sqrt(abs(math.log(delta)) / (2.0 * c))
    saturated = False
    if rho_cap is not None and rho > rho_cap:
        rho = rho_cap
        saturated = True
    return SelectionResult(trivial=False, rho=rho, R=rho**s, saturated=saturated)


def invert_cutoff(grid: Grid, freq: FrequencyGrid, hermitian: bool = True):
    """Inverse transform of the collected slices, restricted to the cylinder.

    Returns (real-part estimate, imaginary residue, coefficient array).  The
    coefficient array is the lattice object used for exact error evaluation.
    """
    if not freq.nodes:
        raise ConfigError("empty frequency set")
    coeffs = freq.to_coefficients(hermitian)
    padded = coefficients_to_field(coeffs, box_lengths(grid))
    crop = padded[tuple(slice(0, s) for s in grid.field_shape)]
    imag_residue = float(np.abs(crop.imag).max())
    return ScalarField(grid, crop.real.astype(np.complex128)), imag_residue, coeffs


@dataclass
class ReconstructionConfig:
    s: float = 0.15
    mode: str = "full"
    rho: float | str = "auto"
    R: float | None = None
    c: float | None = None
    rho_floor: float = 2.05
    probe_delta: float = 0.25
    base_direction: tuple | None = None
    half_width: float = 0.3
    mask_delta: float = 0.3
    basis_j_max: int | None = None
    basis_k_max: int | None = None
    use_hermitian: bool = True
    theta: float = 0.5
    measure_delta: bool = True

    def __post_init__(self):
        if self.mode not in ("full", "partial"):
            raise ConfigError(f"mode must be 'full' or 'partial', got {self.mode!r}")
        if not 0 < self.s < 1:
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        if self.rho != "auto":
            self.rho = float(self.rho)
            if self.rho <= 2.0:
                raise ConfigError(f"explicit rho must exceed 2, got {self.rho}")
        if self.R is not None and self.R < 0:
            raise ConfigError("cutoff radius must be nonnegative")

    def direction(self, n: int) -> np.ndarray:
        if self.base_direction is None:
            base = np.zeros(n)
            base[0] = 1.0
            return base
        base = np.asarray(self.base_direction, dtype=float)
        if base.shape != (n,):
            raise ConfigError(f"base direction must have dimension {n}")
        return base


@dataclass
class ReconstructionResult:
    estimate: ScalarField
    coefficients: np.ndarray
    frequencies: FrequencyGrid
    delta: float | None
    rho: float
    R: float
    trivial: bool
    saturated: bool
    imag_residue: float
    error: float | None
    node_records: list = dc_field(default_factory=list)


def _measurement_bases(grid: Grid, oracle: DtnOracle, cfg: ReconstructionConfig):
    faces_in = None
    faces_out = None
    if oracle.support_mask is not None:
        faces_in = faces_within(grid, oracle.support_mask)
    if oracle.obs_mask is not None:
        faces_out = faces_within(grid, oracle.obs_mask)
    basis_in = DtnBasis(grid, cfg.basis_j_max, cfg.basis_k_max, faces_in)
    basis_out = DtnBasis(grid, cfg.basis_j_max, cfg.basis_k_max, faces_out)
    return basis_in, basis_out


def reconstruct(oracle: DtnOracle, q_ref: Potential | None,
                cfg: ReconstructionConfig, truth: Potential | None = None,
                probe_q: Potential | None = None) -> ReconstructionResult:
    """Full pipeline: measure the data distance, pick (rho, R), sweep the
    admissible frequency ball, invert.  With truth given, reports the
    negative-order error of the estimate against (truth - reference)."""
    grid = oracle.grid
    base = cfg.direction(grid.n)

    delta = None
    if cfg.measure_delta:
        basis_in, basis_out = _measurement_bases(grid, oracle, cfg)
        diff = assemble_difference_matrix(oracle, q_ref, basis_in, basis_out)
        delta = operator_norm(diff)

    cap = probe_rho_cap(grid)
    trivial = False
    saturated = False
    if cfg.rho == "auto":
        if delta is None:
            raise ConfigError("auto parameter rule needs the measured data distance")
        c = cfg.c if cfg.c is not None else grid.T + math.sqrt(grid.n)
        sel = select_parameters(delta, cfg.s, c, rho_cap=cap)
        trivial, saturated = sel.trivial, sel.saturated
        rho, radius = sel.rho, sel.R
        if not trivial and rho < cfg.rho_floor:
            rho = cfg.rho_floor
            radius = rho**cfg.s
    else:
        rho = float(cfg.rho)
        if rho > cap:
            raise ConfigError(
                f"rho={rho:.3g} exceeds what this grid can host (cap {cap:.3g})"
            )
        radius = cfg.R if cfg.R is not None else rho**cfg.s

    if trivial:
        zero = ScalarField.zeros(grid)
        freq = FrequencyGrid(grid, 0.0, cfg.mode, base, cfg.half_width, [])
        coeffs = np.zeros(
            (2 * (grid.nt - 1),) + (2 * (grid.nx - 1),) * grid.n, dtype=np.complex128
        )
        err = None
        if truth is not None:
            p = truth.values - (0.0 if q_ref is None else q_ref.values)
            err = hminus1_distance(grid, p, coeffs)
        return ReconstructionResult(zero, coeffs, freq, delta, 0.0, 0.0, True,
                                    False, 0.0, err)

    freq = build_frequency_grid(grid, radius, cfg.mode, base, cfg.half_width)
    vanish_plus = vanish_minus = None
    if cfg.mode == "partial":
        vanish_plus = direction_mask(grid, base, cfg.mask_delta, sign=-1)
        vanish_minus = direction_mask(grid, base, cfg.mask_delta, sign=1)

    records = []
    for nd in freq.canonical_nodes():
        if not nd.feasible:
            nd.value = 0.0
        else:
            nd.value = fourier_slice(
                oracle, q_ref, nd.xi, nd.tau, nd.omega, rho,
                probe_q=probe_q, probe_delta=cfg.probe_delta,
                vanish_plus=vanish_plus, vanish_minus=vanish_minus,
                theta=cfg.theta,
            )
        records.append(
            {
                "index": nd.index,
                "xi": nd.xi.tolist(),
                "tau": nd.tau,
                "feasible": nd.feasible,
                "value": nd.value,
            }
        )
    estimate, residue, coeffs = invert_cutoff(grid, freq, cfg.use_hermitian)

    err = None
    if truth is not None:
        p = truth.values - (0.0 if q_ref is None else q_ref.values)
        err = hminus1_distance(grid, p, coeffs)
    return ReconstructionResult(estimate, coeffs, freq, delta, rho, radius,
                                False, saturated, residue, err, records)


@dataclass
class StabilityRecord:
    delta: float
    err: float
    params: dict

    def __post_init__(self):
        if self.delta < 0 or self.err < 0:
            raise ValueError("distance and error must be nonnegative")


def stability_sweep(grid: Grid, q_ref: Potential | None, cfg: ReconstructionConfig,
                    modulus: ModulusParams, *, pair_truths=None, noise_levels=None,
                    noise_truth: Potential | None = None, noise_seed: int = 7,
                    theta: float = 0.5) -> dict:
    """(data distance, reconstruction error) records against a modulus fit.

    Two sweep axes: a list of truth potentials at zero noise (pair mode), or
    a list of calibrated noise levels at a fixed truth.  Either way each
    record runs the full pipeline and the smallest constant C with
    err <= C * modulus(delta) over the usable records is fitted.
    """
    if (pair_truths is None) == (noise_levels is None):
        raise ConfigError("provide exactly one of pair_truths or noise_levels")
    support = obs = None
    if cfg.mode == "partial":
        support, obs = partial_masks(grid, cfg.direction(grid.n), cfg.mask_delta)

    runs = []
    if pair_truths is not None:
        if len(pair_truths) < 2:
            raise ConfigError("degenerate sweep: need at least 2 levels")
        for q_true in pair_truths:
            oracle = DtnOracle(grid, q_true, support_mask=support, obs_mask=obs,
                               theta=theta)
            runs.append((oracle, q_true))
    else:
        levels = list(noise_levels)
        if len(levels) < 2 or min(levels) == max(levels):
            raise ConfigError("degenerate sweep: need at least 2 distinct levels")
        for lvl in levels:
            oracle = DtnOracle(grid, noise_truth, support_mask=support, obs_mask=obs,
                               theta=theta, noise_delta=float(lvl),
                               noise_seed=noise_seed)
            runs.append((oracle, noise_truth))

    records = []
    zero_truth = Potential(grid, np.zeros(grid.field_shape))
    for oracle, q_true in runs:
        if q_true is None:
            q_true = q_ref if q_ref is not None else zero_truth
        res = reconstruct(oracle, q_ref, cfg, truth=q_true)
        records.append(
            StabilityRecord(
                delta=float(res.delta),
                err=float(res.error),
                params={
                    "rho": res.rho,
                    "R": res.R,
                    "trivial": res.trivial,
                    "saturated": res.saturated,
                    "mode": cfg.mode,
                },
            )
        )
    deltas = [r.delta for r in records]
    errs = [r.err for r in records]
    c_fit, used = fit_modulus_constant(deltas, errs, modulus)
    return {
        "records": records,
        "fit_constant": c_fit,
        "fit_used": used,
        "modulus_family": modulus.family,
        "modulus_s": modulus.s,
    }


def slice_error_report(grid: Grid, q: Potential, q_ref: Potential | None,
                       xi, tau: float, rhos, *, clairvoyant: bool = True,
                       probe_delta: float = 0.25, theta: float = 0.5) -> dict:
    """Gap between measured slices and the exact lattice transform across rho.

    The frequency must sit on the padded lattice.  Clairvoyant mode builds
    the forward probe with the truth, isolating the probe-estimate error the
    slice bound describes; practical mode uses the reference-built probe.
    """
    xi = np.asarray(xi, dtype=float)
    jt = round(tau * grid.T / math.pi)
    jx = [round(x / math.pi) for x in xi]
    if abs(jt * math.pi / grid.T - tau) > 1e-10 or any(
        abs(j * math.pi - x) > 1e-10 for j, x in zip(jx, xi)
    ):
        raise ConfigError("frequency is not on the padded lattice")
    p = q.values - (0.0 if q_ref is None else q_ref.values)
    coeffs = torus_coefficients(zero_extend(grid, p), box_lengths(grid))
    index = tuple(
        [jt % (2 * (grid.nt - 1))] + [j % (2 * (grid.nx - 1)) for j in jx]
    )
    target = complex(coeffs[index])

    omega = choose_direction(xi)
    if omega is None:
        raise ConfigError("no admissible direction for this frequency")
    oracle = DtnOracle(grid, q, theta=theta)
    gaps, values = [], []
    for rho in rhos:
        val = fourier_slice(
            oracle, q_ref, xi, tau, omega, float(rho),
            probe_q=q if clairvoyant else None,
            probe_delta=probe_delta, theta=theta,
        )
        values.append(val)
        gaps.append(abs(val - target))
    return {
        "rho": [float(r) for r in rhos],
        "value": values,
        "target": target,
        "gap": gaps,
    }
