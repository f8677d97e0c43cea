"""Tests for the vector KdV core: tensors, rhs, evolution, conserved quantities."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdvlab.grid import Field, Grid, advance_linear, integrate
from kdvlab.kdv import (
    LimitModel,
    QTensor,
    blowup_monitor,
    conserved_quantities,
    evolve_kdv,
    genuine_nonlinearity,
    kdv_rhs,
    q_apply,
)


def canonical_scalar(q=1.0, dispersion=1.0):
    return LimitModel(1, dispersion, canonical_q=QTensor.scalar(q))


@pytest.fixture
def grid():
    return Grid(128, 2 * np.pi)


# -- QTensor -----------------------------------------------------------------


def test_qtensor_symmetrizes_and_records_defect():
    raw = np.zeros((2, 2, 2))
    raw[0, 1, 0] = 1.0  # asymmetric input
    Q = QTensor(raw)
    c = Q.coeffs
    for perm in [(0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]:
        assert np.max(np.abs(c - c.transpose(perm))) < 1e-15
    assert Q.symmetry_defect > 0.1


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=8, max_size=8))
def test_qtensor_symmetric_for_any_input(vals):
    Q = QTensor(np.array(vals).reshape(2, 2, 2))
    c = Q.coeffs
    assert np.max(np.abs(c - c.transpose(2, 1, 0))) < 1e-12
    assert np.max(np.abs(c - c.transpose(0, 2, 1))) < 1e-12


def test_qtensor_rejects_bad_shape():
    with pytest.raises(ValueError):
        QTensor(np.zeros((2, 3, 2)))


# -- q_apply -----------------------------------------------------------------


def test_q_apply_scalar_constant(grid):
    Q = QTensor.scalar(1.0)
    two = Field(grid, 2.0 * np.ones(grid.n_points))
    out = q_apply(Q, two, two)
    assert np.max(np.abs(out.components - 4.0)) < 1e-12


def test_q_apply_commutes(grid):
    rng = np.random.default_rng(0)
    Q = QTensor(rng.normal(size=(2, 2, 2)))
    u = Field(grid, np.array([np.sin(grid.x), np.cos(2 * grid.x)]))
    v = Field(grid, np.array([np.cos(3 * grid.x), np.sin(grid.x)]))
    a = q_apply(Q, u, v)
    b = q_apply(Q, v, u)
    assert np.max(np.abs(a.components - b.components)) < 1e-14


def test_q_apply_dim_mismatch(grid):
    Q = QTensor.scalar(1.0)
    u = Field(grid, np.array([np.sin(grid.x), np.cos(grid.x)]))
    with pytest.raises(ValueError):
        q_apply(Q, u, u)


def test_q_apply_integral_permutation_invariant():
    # int Q(u,v).w dx is symmetric under all six permutations of (u,v,w)
    grid = Grid(64, 2 * np.pi)
    rng = np.random.default_rng(4)
    Q = QTensor(rng.normal(size=(2, 2, 2)))

    def trig(seed):
        r = np.random.default_rng(seed)
        comps = np.zeros((2, grid.n_points))
        for c in range(2):
            for m in range(1, 5):
                comps[c] += r.normal() * np.cos(m * grid.x) + r.normal() * np.sin(m * grid.x)
        return Field(grid, comps)

    u, v, w = trig(1), trig(2), trig(3)
    vals = []
    import itertools

    for a, b, c in itertools.permutations([u, v, w]):
        vals.append(integrate(np.sum(q_apply(Q, a, b).components * c.components, axis=0), grid))
    assert max(vals) - min(vals) < 1e-12


# -- kdv_rhs -----------------------------------------------------------------


def test_rhs_airy_only(grid):
    model = canonical_scalar(0.0)
    u = Field(grid, np.sin(3 * grid.x))
    out = kdv_rhs(model, u)
    # dxxx sin(3x) = -27 cos(3x)
    assert np.max(np.abs(out.components[0] + 27 * np.cos(3 * grid.x))) < 1e-9


def test_rhs_constant_state_is_static(grid):
    model = canonical_scalar(-1.0)
    u = Field(grid, 0.7 * np.ones(grid.n_points))
    out = kdv_rhs(model, u)
    assert np.max(np.abs(out.components)) < 1e-12


def test_rhs_raw_scalar_matches_quadrature(grid):
    # 2 dt rho = (1/4) dxxx rho - 3 rho dx rho, evaluated at rho = sin(x):
    # rhs = (-(1/4) cos x - 3 sin x cos x) / 2
    model = LimitModel(
        1,
        dispersion=1.0 / 8.0,
        raw_nonlinearity=np.array([[[-3.0]]]),
        scale={"time_factor": 8.0, "amplitude": -6.0, "sound_speed": 1.0},
        form="raw",
    )
    u = Field(grid, np.sin(grid.x))
    out = kdv_rhs(model, u)
    expected = (-0.25 * np.cos(grid.x) - 3 * np.sin(grid.x) * np.cos(grid.x)) / 2.0
    assert np.max(np.abs(out.components[0] - expected)) < 1e-11


# -- evolve_kdv ----------------------------------------------------------------


def test_evolve_zero_stays_zero(grid):
    model = canonical_scalar(-1.0)
    traj = evolve_kdv(model, Field.zeros(grid), 0.5, 1e-2)
    assert not traj.aborted
    assert max(np.max(np.abs(s.components)) for s in traj.states) < 1e-14


def test_evolve_linear_matches_advance(grid):
    model = canonical_scalar(0.0)
    u0 = Field(grid, np.cos(2 * grid.x))
    T = 1.0
    traj = evolve_kdv(model, u0, T, 1e-2)
    exact = advance_linear(u0, lambda k: (1j * k) ** 3, T)
    err = np.max(np.abs(traj.states[-1].components - exact.components))
    assert err < 1e-10


def test_evolve_conservation_smooth():
    # canonical run, smooth data: relative drift of H and M <= 1e-8,
    # P drift <= 1e-10 absolute
    grid = Grid(256, 2 * np.pi)
    model = canonical_scalar(-1.0)
    u0 = Field(grid, 0.5 * np.sin(grid.x) + 0.1 * np.cos(2 * grid.x))
    h0, m0, p0 = conserved_quantities(model, u0)
    traj = evolve_kdv(model, u0, 1.0, 1e-3)
    assert not traj.aborted
    h1, m1, p1 = conserved_quantities(model, traj.states[-1])
    assert abs(h1 - h0) / abs(h0) < 1e-8
    assert abs(m1 - m0) / m0 < 1e-8
    assert np.max(np.abs(p1 - p0)) < 1e-10


def test_evolve_time_reversal():
    grid = Grid(128, 2 * np.pi)
    model = canonical_scalar(-1.0)
    u0 = Field(grid, 0.4 * np.sin(grid.x))
    fwd = evolve_kdv(model, u0, 0.5, 1e-3)
    back = evolve_kdv(model, fwd.states[-1], 0.5, -1e-3)
    err = np.max(np.abs(back.states[-1].components - u0.components))
    assert err < 1e-8


def test_raw_and_canonical_runs_agree():
    # evolve the raw form and the canonically rescaled form of the same
    # dynamics; map states across and compare
    grid = Grid(128, 2 * np.pi)
    scale = {"time_factor": 8.0, "amplitude": -6.0, "sound_speed": 1.0}
    raw = LimitModel(
        1,
        dispersion=1.0 / 8.0,
        raw_nonlinearity=np.array([[[-3.0]]]),
        canonical_q=QTensor.scalar(-1.0),
        scale=scale,
        form="raw",
    )
    assert raw.scale_consistency_defect() < 1e-14
    canonical = raw.as_canonical()
    assert canonical.dispersion == 1.0

    a0 = Field(grid, 0.2 * np.sin(grid.x))
    T = 0.8
    raw_traj = evolve_kdv(raw, a0, T, 1e-3)
    can_traj = evolve_kdv(canonical, raw.raw_to_canonical_state(a0), T / 8.0, 1e-3 / 8.0)
    mapped = raw.raw_to_canonical_state(raw_traj.states[-1])
    err = np.max(np.abs(mapped.components - can_traj.states[-1].components))
    assert err < 1e-8


# -- conserved quantities ------------------------------------------------------


def test_conserved_zero_field(grid):
    model = canonical_scalar(1.0)
    h, m, p = conserved_quantities(model, Field.zeros(grid))
    assert h == 0.0 and m == 0.0 and np.all(p == 0.0)


def test_conserved_sine_linear(grid):
    model = canonical_scalar(0.0)
    h, m, p = conserved_quantities(model, Field(grid, np.sin(grid.x)))
    assert abs(h - np.pi / 2) < 1e-12
    assert abs(m - np.pi) < 1e-12
    assert abs(p[0]) < 1e-12


def test_conserved_sine_cubic_term_vanishes(grid):
    # int sin^3 = 0, so H is the same with Q(u,u)=u^2
    model = canonical_scalar(1.0)
    h, _, _ = conserved_quantities(model, Field(grid, np.sin(grid.x)))
    assert abs(h - np.pi / 2) < 1e-12


def test_conserved_requires_canonical(grid):
    model = LimitModel(
        1,
        dispersion=1.0 / 8.0,
        raw_nonlinearity=np.array([[[-3.0]]]),
        scale={"time_factor": 8.0, "amplitude": -6.0, "sound_speed": 1.0},
        form="raw",
    )
    with pytest.raises(ValueError):
        conserved_quantities(model, Field.zeros(grid))


# -- genuine nonlinearity -------------------------------------------------------


def test_genuine_nonlinearity_scalar_burgers():
    report = genuine_nonlinearity(QTensor.scalar(1.0), [1.0])
    assert len(report) == 1
    assert abs(report[0]["eigenvalue"] - 2.0) < 1e-14
    assert abs(report[0]["dlambda_dot_r"] - 2.0) < 1e-14
    assert not report[0]["linearly_degenerate"]


def test_genuine_nonlinearity_zero_tensor():
    report = genuine_nonlinearity(QTensor.zero(2), [0.3, -0.7])
    for entry in report:
        assert abs(entry["dlambda_dot_r"]) < 1e-14
        assert entry["linearly_degenerate"]


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_genuine_nonlinearity_flags_clusters(a, b):
    # diagonal tensor with two equal diagonal entries -> clustered at u=(t,t)
    coeffs = np.zeros((2, 2, 2))
    coeffs[0, 0, 0] = 1.0
    coeffs[1, 1, 1] = 1.0
    Q = QTensor(coeffs)
    report = genuine_nonlinearity(Q, [a, b])
    if abs(a - b) < 1e-9:
        assert all(e["clustered"] for e in report)


# -- blow-up monitoring ----------------------------------------------------------


def test_no_breakdown_linear(grid):
    model = canonical_scalar(0.0)
    traj = evolve_kdv(model, Field(grid, np.sin(grid.x)), 1.0, 1e-2)
    report = blowup_monitor(traj)
    assert not report["breakdown"]


def test_burgers_breakdown_near_oracle_time():
    # dispersionless du/dt + dx(u^2) = 0 with u0 = sin x breaks down at
    # t* = 1/max(-d/dx f'(u0)) = 1/max(-2 cos x) = 0.5
    grid = Grid(512, 2 * np.pi)
    model = canonical_scalar(1.0, dispersion=0.0)
    u0 = Field(grid, np.sin(grid.x))
    traj = evolve_kdv(model, u0, 1.0, 2e-4)
    report = blowup_monitor(traj)
    assert report["breakdown"]
    t_star = 0.5
    assert abs(report["time"] - t_star) <= 0.2 * t_star
