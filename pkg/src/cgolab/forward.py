"""Implicit theta-scheme solvers for the parabolic initial-boundary problems.

All solvers discretize on the tensor grid of `Grid` with the standard
second-order Laplacian, optional constant-coefficient convection (central
differences), and a theta time step with theta in [1/2, 1].  Boundary data is
imposed strongly; the unknowns are the interior points, solved per step with
a sparse direct factorization.  Where the lateral data at t=0 disagrees with
the initial slice on the boundary, the lateral value wins and a warning is
emitted (the discrepancy lives on the corner of the cylinder).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import SolverError
from .fields import BoundaryField, Potential, ScalarField
from .grid import Grid

__all__ = [
    "ThetaScheme",
    "SemilinearResult",
    "solve_forward",
    "solve_backward",
    "solve_semilinear",
    "neumann_trace",
]

# Interior problems stay modest at desk scale; cache per-step factorizations
# only while the total storage stays cheap.
_CACHE_DOF_LIMIT = 1600


def _check_theta(theta):
    if not 0.5 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [1/2, 1], got {theta}")


def _interior(values, n):
    return values[1:-1] if n == 1 else values[1:-1, 1:-1]


def _apply_spatial(grid: Grid, u: np.ndarray, convection):
    """(Laplacian - convection . grad) of a full space slice, interior values."""
    hx = grid.hx
    if grid.n == 1:
        out = (u[:-2] - 2 * u[1:-1] + u[2:]) / hx**2
        if convection is not None and convection[0] != 0.0:
            out = out - convection[0] * (u[2:] - u[:-2]) / (2 * hx)
        return out
    core = u[1:-1, 1:-1]
    out = (u[:-2, 1:-1] + u[2:, 1:-1] + u[1:-1, :-2] + u[1:-1, 2:] - 4 * core) / hx**2
    if convection is not None:
        if convection[0] != 0.0:
            out = out - convection[0] * (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * hx)
        if convection[1] != 0.0:
            out = out - convection[1] * (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * hx)
    return out


def _interior_operator(grid: Grid, convection):
    """Sparse interior-to-interior block of (Laplacian - convection . grad)."""
    m = grid.nx - 2
    hx = grid.hx
    d2 = sp.diags(
        [np.full(m - 1, 1.0), np.full(m, -2.0), np.full(m - 1, 1.0)],
        offsets=(-1, 0, 1),
    ) / hx**2
    d1 = sp.diags(
        [np.full(m - 1, -1.0), np.full(m - 1, 1.0)], offsets=(-1, 1)
    ) / (2 * hx)
    if grid.n == 1:
        op = d2
        if convection is not None and convection[0] != 0.0:
            op = op - convection[0] * d1
        return op.tocsc()
    eye = sp.identity(m)
    op = sp.kron(d2, eye) + sp.kron(eye, d2)
    if convection is not None:
        if convection[0] != 0.0:
            op = op - convection[0] * sp.kron(d1, eye)
        if convection[1] != 0.0:
            op = op - convection[1] * sp.kron(eye, d1)
    return op.tocsc()


def _solve_real(lu, rhs):
    """Solve with a real factorization; complex right-hand sides split."""
    if np.iscomplexobj(rhs):
        return lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
    return lu.solve(rhs)


class ThetaScheme:
    """Time stepper for (d_t - Laplacian + convection . grad + q) u = f.

    Building the object assembles the interior operator once; repeated solves
    with the same coefficients (as in column-by-column boundary-map assembly)
    reuse the per-step factorizations when the interior problem is small
    enough to keep them around.
    """

    def __init__(self, grid: Grid, q: Potential | None = None, theta: float = 0.5,
                 convection=None, cache: bool | None = None):
        _check_theta(theta)
        if q is not None and not grid.same_layout(q.grid):
            raise ValueError("potential lives on a different grid")
        if convection is not None:
            convection = np.asarray(convection, dtype=float)
            if convection.shape != (grid.n,):
                raise ValueError(f"convection must have shape ({grid.n},)")
        self.grid = grid
        self.theta = theta
        self.convection = convection
        self.q_values = np.zeros(grid.field_shape) if q is None else q.values
        self.time_invariant = bool(np.all(self.q_values == self.q_values[0]))
        self._op = _interior_operator(grid, convection)
        self._ndof = self._op.shape[0]
        self._eye = sp.identity(self._ndof, format="csc")
        if cache is None:
            cache = self._ndof <= _CACHE_DOF_LIMIT or self.time_invariant
        self._cache = cache
        self._lus = {}

    def _interior_q(self, k):
        return _interior(self.q_values[k], self.grid.n).ravel()

    def _lu(self, k):
        key = -1 if self.time_invariant else k
        lu = self._lus.get(key)
        if lu is None:
            th = self.theta * self.grid.ht
            mat = self._eye - th * self._op + th * sp.diags(self._interior_q(k + 1))
            try:
                lu = splu(mat.tocsc())
            except RuntimeError as exc:
                bad = float((1.0 + th * self.q_values[k + 1]).min())
                raise SolverError(
                    f"singular step matrix at time level {k + 1} "
                    f"(min of 1 + theta*ht*q is {bad:.3e})"
                ) from exc
            if self._cache:
                self._lus[key] = lu
        return lu

    def solve(self, bdata: BoundaryField, u0=None, source: ScalarField | None = None,
              warn_incompatible: bool = True) -> ScalarField:
        grid = self.grid
        if not grid.same_layout(bdata.grid):
            raise ValueError("boundary data lives on a different grid")
        if source is not None and not grid.same_layout(source.grid):
            raise ValueError("source lives on a different grid")
        theta, ht, n = self.theta, grid.ht, grid.n

        u = np.zeros(grid.field_shape, dtype=np.complex128)
        first = np.zeros(grid.space_shape, dtype=np.complex128)
        if u0 is not None:
            u0 = np.asarray(u0)
            if u0.shape != grid.space_shape:
                raise ValueError("initial slice has the wrong shape")
            first[...] = u0
        clash = np.abs(first[grid.boundary_index] - bdata.values[0])
        scale = max(np.abs(first).max(), bdata.max_abs(), 1.0)
        if warn_incompatible and clash.max() > 1e-10 * scale:
            warnings.warn(
                "lateral data and initial slice disagree at t=0; "
                "keeping the lateral value",
                stacklevel=2,
            )
        first[grid.boundary_index] = bdata.values[0]
        u[0] = first

        fvals = None if source is None else source.values
        bc_embed = np.zeros(grid.space_shape, dtype=np.complex128)
        for k in range(grid.nt - 1):
            qk = self._interior_q(k)
            rhs = _interior(u[k], n).ravel().copy()
            rhs += (1 - theta) * ht * (
                _apply_spatial(grid, u[k], self.convection).ravel()
                - qk * _interior(u[k], n).ravel()
            )
            bc_embed[...] = 0.0
            bc_embed[grid.boundary_index] = bdata.values[k + 1]
            rhs += theta * ht * _apply_spatial(grid, bc_embed, self.convection).ravel()
            if fvals is not None:
                rhs += ht * (
                    theta * _interior(fvals[k + 1], n).ravel()
                    + (1 - theta) * _interior(fvals[k], n).ravel()
                )
            x = _solve_real(self._lu(k), rhs)
            if not np.all(np.isfinite(x)):
                raise SolverError(f"non-finite solution at time level {k + 1}")
            nxt = np.zeros(grid.space_shape, dtype=np.complex128)
            if n == 1:
                nxt[1:-1] = x
            else:
                nxt[1:-1, 1:-1] = x.reshape((grid.nx - 2, grid.nx - 2))
            nxt[grid.boundary_index] = bdata.values[k + 1]
            u[k + 1] = nxt
        return ScalarField(grid, u)


def solve_forward(grid: Grid, q: Potential | None, bdata: BoundaryField, u0=None,
                  source: ScalarField | None = None, theta: float = 0.5,
                  convection=None, scheme: ThetaScheme | None = None,
                  warn_incompatible: bool = True) -> ScalarField:
    """Solve (d_t - Laplacian + convection . grad + q) u = source, u(0) = u0."""
    if scheme is None:
        scheme = ThetaScheme(grid, q, theta, convection, cache=False)
    return scheme.solve(bdata, u0, source, warn_incompatible)


def _reversed_potential(q: Potential | None):
    if q is None:
        return None
    return Potential(q.grid, q.values[::-1], m=q.m)


def solve_backward(grid: Grid, q: Potential | None, bdata: BoundaryField, uT=None,
                   source: ScalarField | None = None, theta: float = 0.5,
                   convection=None, warn_incompatible: bool = True) -> ScalarField:
    """Solve (-d_t - Laplacian + convection . grad + q) u = source, u(T) = uT.

    Realized by reflecting time, solving forward, and reflecting back, so the
    scheme is the exact mirror of solve_forward.
    """
    rev_b = BoundaryField(grid, bdata.values[::-1])
    rev_f = None if source is None else ScalarField(grid, source.values[::-1])
    out = solve_forward(
        grid,
        _reversed_potential(q),
        rev_b,
        uT,
        rev_f,
        theta,
        convection,
        warn_incompatible=warn_incompatible,
    )
    return ScalarField(grid, out.values[::-1])


def neumann_trace(u: ScalarField) -> BoundaryField:
    """Outward normal derivative on the lateral boundary.

    One-sided three-point stencil along the owning face's normal axis, exact
    for quadratics.  Needs nx >= 4 so the stencil never reaches across.
    """
    grid = u.grid
    if grid.nx < 4:
        raise ValueError(f"grid too small for the one-sided stencil (nx={grid.nx} < 4)")
    out = np.empty((grid.nt, grid.n_boundary), dtype=np.complex128)
    for fid, face in enumerate(grid.faces):
        pts = np.flatnonzero(grid.boundary_face == fid)
        if pts.size == 0:
            continue
        idx0 = [grid.boundary_index[a][pts] for a in range(grid.n)]
        inward = -1 if face.side == 1 else 1
        idx1 = [arr.copy() for arr in idx0]
        idx2 = [arr.copy() for arr in idx0]
        idx1[face.axis] = idx0[face.axis] + inward
        idx2[face.axis] = idx0[face.axis] + 2 * inward
        vals = (
            3 * u.values[(slice(None), *idx0)]
            - 4 * u.values[(slice(None), *idx1)]
            + u.values[(slice(None), *idx2)]
        ) / (2 * grid.hx)
        out[:, pts] = vals
    return BoundaryField(grid, out)


@dataclass
class SemilinearResult:
    field: ScalarField
    newton_iterations: list

    @property
    def max_iterations(self) -> int:
        return max(self.newton_iterations) if self.newton_iterations else 0


def solve_semilinear(grid: Grid, a, bdata: BoundaryField, u0=None, theta: float = 0.5,
                     newton_tol: float = 1e-10, max_iter: int = 50,
                     max_halvings: int = 10,
                     warn_incompatible: bool = True) -> SemilinearResult:
    """Solve (d_t - Laplacian) u + a(x, t, u) = 0 with data on the parabolic boundary.

    `a` needs vectorized methods value(*x, t, u) and du(*x, t, u).  Each step
    runs a damped Newton iteration on the theta-stepped equation down to
    residual newton_tol.  Data must be real.
    """
    _check_theta(theta)
    if not grid.same_layout(bdata.grid):
        raise ValueError("boundary data lives on a different grid")
    if np.abs(bdata.values.imag).max() > 0:
        raise ValueError("semilinear solver expects real boundary data")
    bvals = bdata.values.real

    op = _interior_operator(grid, None)
    ndof = op.shape[0]
    eye = sp.identity(ndof, format="csc")

    coords = grid.space_coordinates()
    if grid.n == 1:
        xint = (coords[0][1:-1],)
    else:
        xx = np.broadcast_to(coords[0], grid.space_shape)[1:-1, 1:-1].ravel()
        yy = np.broadcast_to(coords[1], grid.space_shape)[1:-1, 1:-1].ravel()
        xint = (xx, yy)

    u = np.zeros(grid.field_shape)
    first = np.zeros(grid.space_shape)
    if u0 is not None:
        u0 = np.asarray(u0)
        if u0.shape != grid.space_shape:
            raise ValueError("initial slice has the wrong shape")
        if np.iscomplexobj(u0) and np.abs(u0.imag).max() > 0:
            raise ValueError("semilinear solver expects real initial data")
        first[...] = u0.real if np.iscomplexobj(u0) else u0
    clash = np.abs(first[grid.boundary_index] - bvals[0])
    if warn_incompatible and clash.max() > 1e-10 * max(1.0, np.abs(bvals).max()):
        warnings.warn(
            "lateral data and initial slice disagree at t=0; keeping the lateral value",
            stacklevel=2,
        )
    first[grid.boundary_index] = bvals[0]
    u[0] = first

    ht = grid.ht
    bc_embed = np.zeros(grid.space_shape)
    iterations = []
    for k in range(grid.nt - 1):
        t0, t1 = grid.ts[k], grid.ts[k + 1]
        uk_int = _interior(u[k], grid.n).ravel()
        bc_embed[...] = 0.0
        bc_embed[grid.boundary_index] = bvals[k + 1]
        bc_term = _apply_spatial(grid, bc_embed, None).ravel()
        explicit = _apply_spatial(grid, u[k], None).ravel() - a.value(*xint, t0, uk_int)

        def residual(v):
            lap = op @ v + bc_term
            return (v - uk_int) / ht - theta * (lap - a.value(*xint, t1, v)) - (
                1 - theta
            ) * explicit

        v = uk_int.copy()
        res = residual(v)
        it = 0
        while np.abs(res).max() > newton_tol:
            if it >= max_iter:
                raise SolverError(
                    f"Newton did not converge at time level {k + 1} "
                    f"(residual {np.abs(res).max():.3e})"
                )
            jac = eye / ht - theta * op + theta * sp.diags(a.du(*xint, t1, v))
            try:
                step = splu(jac.tocsc()).solve(-res)
            except RuntimeError as exc:
                raise SolverError(
                    f"singular Newton system at time level {k + 1}"
                ) from exc
            alpha, base = 1.0, np.linalg.norm(res)
            for _ in range(max_halvings):
                trial = residual(v + alpha * step)
                if np.all(np.isfinite(trial)) and np.linalg.norm(trial) <= base:
                    break
                alpha *= 0.5
            v = v + alpha * step
            res = residual(v)
            it += 1
        iterations.append(it)
        nxt = np.zeros(grid.space_shape)
        if grid.n == 1:
            nxt[1:-1] = v
        else:
            nxt[1:-1, 1:-1] = v.reshape((grid.nx - 2, grid.nx - 2))
        nxt[grid.boundary_index] = bvals[k + 1]
        u[k + 1] = nxt
    return SemilinearResult(ScalarField(grid, u), iterations)
