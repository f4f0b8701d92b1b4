"""Probe construction: weights, conjugation, corrector sources, decay."""

import numpy as np
import pytest

from cgolab import (
    CgoParams,
    Potential,
    ScalarField,
    build_cgo,
    build_grid,
    corrector_source,
    direction_mask,
    exp_weight,
    principal_part,
    remainder_decay_report,
)
from cgolab.errors import ConfigError, SolverError
from cgolab.fd import diff1, diff2


def _params(eps=1, rho=4.0, xi=(0.0,), tau=0.0, omega=None, n=1, delta=0.25):
    xi = np.asarray(xi, dtype=float)
    if omega is None:
        omega = np.array([1.0]) if n == 1 else np.array([0.0, 1.0])
    return CgoParams(eps, np.asarray(omega, float), xi, tau, rho, delta)


def test_params_validation():
    with pytest.raises(ConfigError):
        _params(eps=0)
    with pytest.raises(ConfigError):
        _params(rho=2.0)  # strict bound
    with pytest.raises(ConfigError):
        CgoParams(1, np.array([2.0]), np.array([0.0]), 0.0, 4.0)
    with pytest.raises(ConfigError):
        CgoParams(1, np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.0, 4.0)
    p = _params(xi=(1.0, 0.0), omega=(0.0, 1.0), tau=2.0, n=2)
    assert p.zeta_bracket_sq == pytest.approx(1 + 1 + 4)


def test_exp_weight_values_and_overflow_guard():
    g = build_grid(1, 9, 9, T=1.0)
    w = exp_weight(g, 1, np.array([1.0]), 3.0)
    want = np.exp(-(3.0 * g.xs[None, :] + 9.0 * g.ts[:, None]))
    assert np.allclose(w.values, want)
    w2 = exp_weight(g, -1, np.array([1.0]), 3.0, squared=True)
    assert np.allclose(w2.values, 1.0 / want**2)
    with pytest.raises(SolverError):
        exp_weight(g, 1, np.array([1.0]), 40.0)  # rho^2 T > 700


def test_principal_part_switches_on_at_quiet_end():
    g = build_grid(1, 9, 9, T=1.0)
    plus = principal_part(g, _params(eps=1, rho=16.0, xi=(0.0,), tau=3.0))
    minus = principal_part(g, _params(eps=-1, rho=16.0))
    assert np.abs(plus.values[0]).max() == 0.0
    assert np.abs(minus.values[-1]).max() == 0.0
    assert np.abs(plus.values).max() <= 1.0 + 1e-12
    # forward profile carries the oscillation
    ramp = -np.expm1(-16.0**0.75 * g.ts[-1])
    assert plus.values[-1, 0] == pytest.approx(ramp * np.exp(-1j * 3.0))


def test_corrector_source_formulas():
    # recompute both orientation sources from scratch at a few sample points
    g = build_grid(1, 7, 6, T=1.0)
    qv = 0.3 * np.sin(np.pi * g.xs)[None, :] * np.cos(g.ts)[:, None]
    q = Potential(g, qv)
    rho, tau = 5.0, 2.0
    xi = np.array([0.0])

    src_p = corrector_source(g, _params(eps=1, rho=rho, tau=tau), q).values
    e_dec = np.exp(-rho**0.75 * g.ts)[:, None]
    osc = np.exp(-1j * (xi[0] * g.xs[None, :] + tau * g.ts[:, None]))
    want_p = -osc * ((-1j * tau + xi @ xi + qv) * (1 - e_dec) + rho**0.75 * e_dec)
    assert np.abs(src_p - want_p).max() < 1e-13

    src_m = corrector_source(g, _params(eps=-1, rho=rho), q).values
    f_dec = np.exp(-rho**0.75 * (1.0 - g.ts))[:, None]
    want_m = -(qv * (1 - f_dec) + rho**0.75 * f_dec) * np.ones_like(src_m)
    assert np.abs(src_m - want_m).max() < 1e-13


def test_conjugation_identity_by_finite_differences():
    # (d_t - lap)(psi_minus v) == psi_minus (d_t - lap - 2 rho w.grad) v
    # away from rounding, checked on interior points for a smooth v
    g = build_grid(1, 41, 41, T=1.0)
    rho, om = 3.0, np.array([1.0])
    v = np.exp(-g.ts)[:, None] * np.sin(np.pi * g.xs)[None, :] + 0j
    psi = exp_weight(g, -1, om, rho).values  # e^{+rho x + rho^2 t}

    heat = lambda f: diff1(f, g.ht, 0) - diff2(f, g.hx, 1)
    lhs = heat(psi * v)
    rhs = psi * (heat(v) - 2 * rho * diff1(v, g.hx, 1))
    inner = (slice(2, -2), slice(2, -2))
    scale = np.abs(lhs[inner]).max()
    assert np.abs(lhs[inner] - rhs[inner]).max() < 2e-2 * scale


def test_probe_vanishes_on_mask_exactly():
    g = build_grid(2, 9, 9, T=1.0)
    p = _params(eps=1, rho=4.0, xi=(0.0, 0.0), omega=(1.0, 0.0), n=2)
    sol = build_cgo(g, p)
    mask = direction_mask(g, p.omega, p.delta, sign=-1)
    profile_trace = sol.profile.boundary_trace()
    assert np.abs(profile_trace.values[:, mask.values]).max() < 1e-9


def test_residual_orientation_parity():
    # q symmetric under t -> T-t makes the two orientations mirror images:
    # their conjugated residuals must coincide (regression for the eps sign)
    g = build_grid(1, 33, 65, T=1.0)
    qv = 0.3 * np.sin(np.pi * g.xs)[None, :] * np.sin(np.pi * g.ts)[:, None]
    q = Potential(g, qv)
    res = {}
    for eps in (1, -1):
        sol = build_cgo(g, _params(eps=eps, rho=6.0), q)
        res[eps] = sol.residual_norm
    assert res[1] == pytest.approx(res[-1], rel=1e-10)
    assert np.isfinite(res[1])


def test_remainder_decay_and_guard():
    g = build_grid(1, 33, 257, T=1.0)
    qv = 0.3 * np.sin(np.pi * g.xs)[None, :] * np.sin(np.pi * g.ts)[:, None]
    q = Potential(g, qv)
    rep = remainder_decay_report(g, q, np.array([0.0]), 0.0, [4.0, 8.0, 16.0, 24.0])
    assert rep["slope_minus"] < -0.15
    assert rep["slope_plus"] < -0.15
    assert all(b < a for a, b in zip(rep["w_minus"], rep["w_minus"][1:]))
    with pytest.raises(ConfigError):
        remainder_decay_report(g, q, np.array([0.0]), 0.0, [4.0, 8.0, 16.0])
    with pytest.raises(ConfigError):
        remainder_decay_report(g, q, np.array([0.0]), 0.0, [4.0, 8.0, 16.0, 60.0])


def test_field_assembly_guard():
    g = build_grid(1, 17, 513, T=1.0)
    sol = build_cgo(g, _params(rho=30.0), compute_residual=False)
    with pytest.raises(SolverError):
        _ = sol.field  # rho^2 T = 900 overflows the weight
    assert sol.remainder.l2_norm() < np.inf  # conjugated data stays usable
