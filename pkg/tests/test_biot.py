import numpy as np
import pytest

from poroperm.biot import (
    BiotSolver,
    ConfigurationError,
    SolverConfig,
    compute_lame,
    run,
    solve_saddle_point,
    step,
    sweep_thresholds,
)
from poroperm.mesh import (
    PROBLEM_SQUEEZE,
    build_rect_mesh,
    dirichlet_displacement_dofs,
    dirichlet_pressure,
    element_coupling,
    element_pressure_laplacian,
    element_stiffness,
    stabilization_parameter,
)
from poroperm.relations import KozenyCarman, NetworkInspired, PermeabilityRelation


class ConstantRelation(PermeabilityRelation):
    """Fixed permeability regardless of porosity, for solver-only tests."""

    def __init__(self, value: float, theta0: float = 0.4):
        self.value = value
        self.theta0 = theta0

    def transform(self, X):
        return np.full(np.shape(X), self.value)

    @property
    def kappa0(self) -> float:
        return self.value


def quick_config(**kwargs):
    defaults = dict(relation=KozenyCarman(), dx=0.25, dy=0.25, T=2.0)
    defaults.update(kwargs)
    return SolverConfig(**defaults)


class TestLame:
    def test_table_values(self):
        lam, mu = compute_lame(35e6, 0.3)
        assert lam == pytest.approx(2.0192e7, rel=1e-4)
        assert mu == pytest.approx(1.3462e7, rel=1e-4)

    def test_zero_poisson(self):
        lam, mu = compute_lame(10.0, 0.0)
        assert lam == 0.0
        assert mu == 5.0

    def test_quarter_poisson_identity(self):
        lam, mu = compute_lame(7e6, 0.25)
        assert lam == pytest.approx(mu, rel=1e-14)

    def test_incompressible_limit_rejected(self):
        with pytest.raises(ConfigurationError):
            compute_lame(1e6, 0.5)
        with pytest.raises(ConfigurationError):
            compute_lame(-1.0, 0.3)


class TestConfig:
    def test_all_errors_reported_at_once(self):
        cfg = SolverConfig(relation=KozenyCarman(), nu=0.6, eta=-1.0, tau=-0.5)
        with pytest.raises(ConfigurationError) as err:
            cfg.validate()
        msg = str(err.value)
        assert "nu" in msg and "eta" in msg and "tau" in msg

    def test_step_count(self):
        assert quick_config(T=300.0, tau=0.5).n_steps == 600


class TestStep:
    def test_homogeneous_problem_stays_zero(self):
        cfg = quick_config(p_pump=0.0, sigma0=0.0)
        result = run(cfg)
        st = result.final_state
        assert np.abs(st.u).max() == pytest.approx(0.0, abs=1e-14)
        assert np.abs(st.p).max() == pytest.approx(0.0, abs=1e-9)
        assert result.diagnostics.q_out_avg == pytest.approx(0.0, abs=1e-20)

    def test_one_step_matches_dense_oracle(self):
        # two-cell mesh, constant permeability, independent dense assembly
        cfg = SolverConfig(relation=ConstantRelation(3e-11), L=1.0, H=0.5,
                           dx=0.5, dy=0.5, tau=0.5, T=0.5, p_pump=2e6)
        solver = BiotSolver(cfg)
        state1 = solver.step(solver.initial_state())

        mesh = solver.mesh
        lam, mu = compute_lame(cfg.E, cfg.nu)
        n_u, n_p = mesh.n_p2_nodes, mesh.n_vertices
        A = np.zeros((2 * n_u, 2 * n_u))
        B = np.zeros((n_p, 2 * n_u))
        Lap = np.zeros((n_p, n_p))
        for t in range(mesh.n_triangles):
            coords = mesh.vertices[mesh.triangles[t]]
            nodes = mesh.tri_nodes[t]
            gd = np.concatenate([nodes, nodes + n_u])
            A[np.ix_(gd, gd)] += element_stiffness(coords, lam, mu)
            B[np.ix_(mesh.triangles[t], gd)] += element_coupling(coords)
            Lap[np.ix_(mesh.triangles[t], mesh.triangles[t])] += \
                element_pressure_laplacian(coords)

        h = np.zeros(2 * n_u)
        for e in mesh.boundary_edges:
            if e.tag == "left":
                h[e.v_a] += cfg.p_pump * e.length / 6.0
                h[e.v_b] += cfg.p_pump * e.length / 6.0
                h[e.midpoint] += cfg.p_pump * 2.0 * e.length / 3.0

        beta = stabilization_parameter(mesh, lam, mu)
        kappa0 = cfg.relation.kappa0
        D = (cfg.tau * kappa0 / cfg.eta + beta) * Lap

        fixed_u = dirichlet_displacement_dofs(mesh)
        free_u = np.setdiff1d(np.arange(2 * n_u), fixed_u)
        dir_p, p_vals = dirichlet_pressure(mesh, cfg.p_pump)
        free_p = np.setdiff1d(np.arange(n_p), dir_p)

        p_prev = np.zeros(n_p)
        p_prev[dir_p] = p_vals
        nf = len(free_u)
        M = np.zeros((nf + len(free_p), nf + len(free_p)))
        M[:nf, :nf] = A[np.ix_(free_u, free_u)]
        M[:nf, nf:] = -B[np.ix_(free_p, free_u)].T
        M[nf:, :nf] = B[np.ix_(free_p, free_u)]
        M[nf:, nf:] = D[np.ix_(free_p, free_p)]
        rhs = np.concatenate([
            h[free_u] + B[np.ix_(dir_p, free_u)].T @ p_vals,
            beta * (Lap[np.ix_(free_p, free_p)] @ p_prev[free_p])
            - cfg.tau * (kappa0 / cfg.eta) * (Lap[np.ix_(free_p, dir_p)] @ p_vals)
            - beta * (Lap[np.ix_(free_p, dir_p)] @ p_vals)
            + beta * (Lap[np.ix_(free_p, dir_p)] @ p_prev[dir_p]),
        ])
        x = np.linalg.solve(M, rhs)
        u_ref = np.zeros(2 * n_u)
        u_ref[free_u] = x[:nf]
        p_ref = np.zeros(n_p)
        p_ref[free_p] = x[nf:]
        p_ref[dir_p] = p_vals

        np.testing.assert_allclose(state1.u, u_ref, rtol=0,
                                   atol=1e-10 * np.abs(u_ref).max())
        np.testing.assert_allclose(state1.p, p_ref, rtol=0,
                                   atol=1e-10 * np.abs(p_ref).max())

    def test_module_level_step_wrapper(self):
        cfg = quick_config()
        solver = BiotSolver(cfg)
        s0 = solver.initial_state()
        s1 = solver.step(s0)
        s1b = step(s0, solver.sys, cfg)
        np.testing.assert_allclose(s1b.u, s1.u, rtol=1e-12, atol=1e-18)
        np.testing.assert_allclose(s1b.p, s1.p, rtol=1e-12, atol=1e-9)

    def test_velocity_consistency(self):
        from poroperm.mesh import element_pressure_gradient
        cfg = quick_config()
        solver = BiotSolver(cfg)
        st = solver.step(solver.initial_state())
        grad = element_pressure_gradient(solver.mesh, st.p)
        expected = -(st.kappa_field / cfg.eta)[:, None] * grad
        np.testing.assert_allclose(st.v_field, expected, rtol=1e-12, atol=1e-18)

    def test_nodal_porosity_initial_state(self):
        cfg = quick_config()
        solver = BiotSolver(cfg)
        theta = solver.nodal_porosity(solver.initial_state())
        assert theta.shape == (solver.mesh.n_vertices,)
        np.testing.assert_allclose(theta, cfg.theta0, rtol=1e-14)

    def test_degenerate_compaction_flagged(self):
        cfg = quick_config(problem_kind=PROBLEM_SQUEEZE, p_pump=0.0,
                           sigma0=5e7, T=0.5, tau=0.5)
        solver = BiotSolver(cfg)
        st = solver.step(solver.initial_state())
        assert st.degenerate_elements > 0
        bad = st.theta_field <= 0.0
        assert np.all(st.kappa_field[bad] == 0.0)

    def test_picard_close_to_lagged(self):
        # both couplings settle on the same quasi-steady fixed point; only
        # the early transient carries a visible splitting error
        base = quick_config(T=10.0)
        lagged = run(base)
        picard = run(SolverConfig(**{**base.__dict__, "coupling": "picard"}))
        assert picard.diagnostics.q_out[-1] == pytest.approx(
            lagged.diagnostics.q_out[-1], rel=1e-4)


class TestRun:
    def test_deterministic(self):
        cfg = quick_config(T=3.0)
        r1, r2 = run(cfg), run(cfg)
        assert np.array_equal(r1.diagnostics.q_out, r2.diagnostics.q_out)
        assert np.array_equal(r1.final_state.u, r2.final_state.u)

    def test_snapshots_and_series_lengths(self):
        cfg = quick_config(T=3.0, tau=0.5)
        result = run(cfg, snapshot_times=[1.0, 2.0])
        assert len(result.diagnostics.times) == 6
        assert [s.t for s in result.snapshots] == [1.0, 2.0]

    def test_outflow_positive_for_injection(self):
        result = run(quick_config(T=3.0))
        assert result.diagnostics.q_out_avg > 0.0

    def test_mirror_symmetry(self):
        cfg = SolverConfig(relation=KozenyCarman(), dx=0.2, dy=0.1, T=3.0,
                           diagonal="alternating")
        solver = BiotSolver(cfg)
        result = solver.run()
        st = result.final_state
        mesh = solver.mesh
        coords = mesh.vertices
        lookup = {(round(x, 9), round(y, 9)): i for i, (x, y) in enumerate(coords)}
        mirror = np.array([lookup[(round(x, 9), round(cfg.H - y, 9))]
                           for x, y in coords])
        p_scale = np.abs(st.p).max()
        assert np.abs(st.p - st.p[mirror]).max() <= 1e-8 * p_scale
        n_u = mesh.n_p2_nodes
        ux = st.u[:n_u][: mesh.n_vertices]
        assert np.abs(ux - ux[mirror]).max() <= 1e-8 * np.abs(ux).max()


class TestSaddlePoint:
    def test_zero_loads_give_zero(self):
        cfg = quick_config(p_pump=0.0)
        solver = BiotSolver(cfg)
        u0, p0 = solve_saddle_point(solver.sys, cfg)
        assert np.abs(u0).max() == pytest.approx(0.0, abs=1e-16)
        assert np.abs(p0).max() == pytest.approx(0.0, abs=1e-9)

    def test_constraint_residual(self):
        cfg = quick_config()
        solver = BiotSolver(cfg)
        u0, _ = solve_saddle_point(solver.sys, cfg)
        resid = solver.B_pf @ u0[solver.free_u]
        scale = abs(solver.sys.B).max() * np.abs(u0).max()
        assert np.abs(resid).max() <= 1e-9 * scale

    def test_monotone_convergence_ladder(self):
        # ten-by-five-cell mesh; distances to the zero-permeability limit
        # must decrease monotonically and end three decades down
        kappa0 = KozenyCarman().kappa0
        cfg = SolverConfig(relation=ConstantRelation(kappa0), dx=0.2, dy=0.2,
                           T=0.5, tau=0.5, stabilization=False)
        solver = BiotSolver(cfg)
        u0, p0 = solve_saddle_point(solver.sys, cfg)
        errors_u, errors_p = [], []
        for factor in (1e-2, 1e-4, 1e-6):
            scaled = SolverConfig(**{**cfg.__dict__,
                                     "relation": ConstantRelation(kappa0 * factor)})
            s = BiotSolver(scaled, sys=solver.sys)
            st = s.step(s.initial_state())
            du = st.u - u0
            errors_u.append(float(np.sqrt(du @ (solver.sys.A @ du))))
            errors_p.append(float(np.linalg.norm(st.p - p0)))
        assert errors_u[0] > errors_u[1] > errors_u[2]
        assert errors_p[0] > errors_p[1] > errors_p[2]
        assert errors_u[2] <= 1e-3 * errors_u[0]
        assert errors_p[2] <= 1e-3 * errors_p[0]


class TestStabilization:
    def test_neutral_in_smooth_regime(self):
        kappa0 = KozenyCarman().kappa0
        base = dict(relation=ConstantRelation(kappa0), dx=0.1, dy=0.1, T=10.0)
        with_stab = run(SolverConfig(stabilization=True, **base))
        without = run(SolverConfig(stabilization=False, **base))
        assert with_stab.diagnostics.q_out_avg == pytest.approx(
            without.diagnostics.q_out_avg, rel=0.01)


class TestSweep:
    def test_rows_and_baseline(self):
        cfg = quick_config(T=1.0)
        rows = sweep_thresholds(cfg, [0.0, 0.5])
        assert len(rows) == 3
        assert rows[0].relation == "kozeny-carman"
        assert np.isnan(rows[0].p_c)
        assert all(np.isfinite(r.q_out_avg) for r in rows)
        assert rows[1].p_c == 0.0 and rows[2].p_c == 0.5

    def test_low_threshold_flows_more_than_baseline(self):
        cfg = quick_config(T=2.0, dx=0.125, dy=0.125)
        rows = sweep_thresholds(cfg, [0.0])
        assert rows[1].q_out_avg > rows[0].q_out_avg

    def test_grid_domain_checked(self):
        with pytest.raises(ConfigurationError):
            sweep_thresholds(quick_config(), [1.0])
