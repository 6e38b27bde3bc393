import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_banded

from cerom import BurgersConvection, ConfigError, NumericalError, assemble_matrices, build_mesh, dns_solve, initial_condition
from cerom.fe1d import _to_banded, smooth_exact_solution

from oracles import convection_load, mass_stiffness, trilinear


class TestMesh:
    def test_reference_resolution(self):
        mesh = build_mesh(2048)
        assert mesh.h == 1 / 2048
        assert mesh.interior_dof_count == 2047

    def test_smallest_mesh(self):
        mesh = build_mesh(2)
        np.testing.assert_array_equal(mesh.nodes, [0.0, 0.5, 1.0])
        assert mesh.interior_dof_count == 1

    def test_uniform_spacing(self):
        mesh = build_mesh(4)
        np.testing.assert_allclose(np.diff(mesh.nodes), 0.25)
        assert mesh.nodes[0] == 0.0 and mesh.nodes[-1] == 1.0

    @pytest.mark.parametrize("bad", [1, 0, -3, 2.5, True])
    def test_rejects_bad_cell_count(self, bad):
        with pytest.raises(ConfigError):
            build_mesh(bad)


class TestMatrices:
    def test_analytic_entries_h_quarter(self):
        mats = assemble_matrices(build_mesh(4))
        M, S = mats.mass.toarray(), mats.stiffness.toarray()
        np.testing.assert_allclose(np.diag(M), 1 / 6)
        np.testing.assert_allclose(np.diag(M, 1), 1 / 24)
        np.testing.assert_allclose(np.diag(S), 8.0)
        np.testing.assert_allclose(np.diag(S, -1), -4.0)

    def test_matches_dense_quadrature(self):
        M_ref, S_ref = mass_stiffness(12)
        mats = assemble_matrices(build_mesh(12))
        np.testing.assert_allclose(mats.mass.toarray(), M_ref, atol=1e-14)
        np.testing.assert_allclose(mats.stiffness.toarray(), S_ref, rtol=1e-12, atol=1e-12)

    def test_stiffness_annihilates_constants_inside(self):
        S = assemble_matrices(build_mesh(16)).stiffness
        row_sums = np.asarray(S.sum(axis=1)).ravel()
        np.testing.assert_allclose(row_sums[1:-1], 0.0, atol=1e-12)

    def test_symmetric_positive_definite(self, rng):
        mats = assemble_matrices(build_mesh(64))
        for mat in (mats.mass, mats.stiffness):
            assert abs(mat - mat.T).max() == 0.0
            x = rng.standard_normal((63, 100))
            assert np.all(np.einsum("ik,ik->k", x, mat @ x) > 0)

    def test_banded_layout_roundtrip(self, rng):
        mat = assemble_matrices(build_mesh(10)).stiffness
        b = rng.standard_normal(9)
        np.testing.assert_allclose(
            solve_banded((1, 1), _to_banded(mat), b), np.linalg.solve(mat.toarray(), b)
        )


class TestInitialCondition:
    def test_smooth_is_nodal_interpolant(self):
        mesh = build_mesh(16)
        np.testing.assert_allclose(
            initial_condition("smooth", 0.3, mesh),
            smooth_exact_solution(mesh.interior_nodes, 0.0, 0.3),
            rtol=1e-15,
        )

    def test_smooth_midpoint_value(self):
        u = initial_condition("smooth", 0.1, build_mesh(2))
        assert u[0] == pytest.approx(0.8 * np.pi / 5, rel=1e-14)
        assert u[0] == pytest.approx(0.502655, abs=1e-6)

    def test_smooth_zero_at_x0(self):
        assert smooth_exact_solution(0.0, 0.0, 0.1) == 0.0

    def test_step_values(self):
        mesh = build_mesh(4)
        np.testing.assert_array_equal(initial_condition("step", 0.1, mesh), [1.0, 1.0, 0.0])

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            initial_condition("ramp", 0.1, build_mesh(4))

    def test_smooth_needs_positive_viscosity(self):
        with pytest.raises(ConfigError):
            initial_condition("smooth", 0.0, build_mesh(4))


class TestConvection:
    n_cells = 9

    def test_matrix_matches_oracle(self, rng):
        conv = BurgersConvection(build_mesh(self.n_cells))
        w = rng.standard_normal(self.n_cells - 1)
        eye = np.eye(self.n_cells - 1)
        ref = trilinear(eye, w[:, None], eye, self.n_cells)[:, 0, :]
        np.testing.assert_allclose(conv.matrix(w).toarray(), ref, atol=1e-13)

    def test_load_matches_oracle_and_matrix(self, rng):
        conv = BurgersConvection(build_mesh(self.n_cells))
        u = rng.standard_normal(self.n_cells - 1)
        np.testing.assert_allclose(conv.load(u), convection_load(u, self.n_cells), atol=1e-13)
        np.testing.assert_allclose(conv.load(u), conv.matrix(u) @ u, atol=1e-13)

    def test_load_columnwise(self, rng):
        conv = BurgersConvection(build_mesh(self.n_cells))
        U = rng.standard_normal((self.n_cells - 1, 3))
        np.testing.assert_allclose(conv.load(U)[:, 1], conv.load(U[:, 1]))

    def test_tensor_matches_oracle(self, rng):
        conv = BurgersConvection(build_mesh(self.n_cells))
        P = rng.standard_normal((self.n_cells - 1, 3))
        np.testing.assert_allclose(
            conv.tensor(P, P, P), trilinear(P, P, P, self.n_cells), atol=1e-12
        )

    def test_skew_identity(self, rng):
        # (u u', u) = int (u^3/3)' = 0 under homogeneous Dirichlet conditions
        conv = BurgersConvection(build_mesh(32))
        u = rng.standard_normal(31)
        assert abs(u @ conv.load(u)) < 1e-12

    def test_wrong_length(self):
        conv = BurgersConvection(build_mesh(8))
        with pytest.raises(ValueError):
            conv.load(np.ones(5))


class TestDns:
    def test_zero_initial_state_stays_zero(self):
        mesh = build_mesh(32)
        snaps = dns_solve(mesh, 0.1, 1e-2, 0.1, np.zeros(31))
        assert snaps.n_snapshots == 11
        assert not np.any(snaps.Y)

    def test_snapshot_count_and_start(self, smooth_run):
        snaps = smooth_run.snapshots
        assert snaps.Y.shape == (2047, 1001)
        np.testing.assert_array_equal(
            snaps.Y[:, 0], initial_condition("smooth", 0.1, smooth_run.mesh)
        )

    def test_against_exact_solution(self, smooth_run):
        x = smooth_run.mesh.interior_nodes
        u = smooth_run.snapshots.Y[:, -1]
        err = u - smooth_exact_solution(x, 1.0, 0.1)
        M = smooth_run.snapshots.mass
        assert np.sqrt(err @ (M @ err)) < 1e-6

    def test_energy_non_increasing(self, smooth_run):
        Y, M = smooth_run.snapshots.Y, smooth_run.snapshots.mass
        energy = np.einsum("ij,ij->j", Y, M @ Y)
        assert np.all(np.diff(energy) <= 1e-14 * energy[:-1])

    def test_energy_matches_fine_backward_euler(self, smooth_run):
        # independent linearized backward Euler with dt = 1e-4
        mesh, nu = smooth_run.mesh, 0.1
        mats = assemble_matrices(mesh)
        conv = BurgersConvection(mesh)
        dt = 1e-4
        u = initial_condition("smooth", nu, mesh)
        M = mats.mass.tocsc()
        base = (M / dt + nu * mats.stiffness).tocsc()
        norms = [np.sqrt(u @ (M @ u))]
        for _ in range(10000):
            u = sp.linalg.spsolve((base + conv.matrix(u)).tocsc(), M @ u / dt)
            norms.append(np.sqrt(u @ (M @ u)))
        norms = np.array(norms)
        assert np.all(np.diff(norms) <= 0)
        Y = smooth_run.snapshots.Y
        bdf = np.sqrt(np.einsum("ij,ij->j", Y, M @ Y))
        np.testing.assert_allclose(bdf, norms[::10], rtol=1e-4)

    def test_second_order_in_time(self):
        mesh = build_mesh(2048)
        ic = initial_condition("smooth", 0.1, mesh)
        norms = []
        for dt in (4e-3, 2e-3, 1e-3):
            snaps = dns_solve(mesh, 0.1, dt, 1.0, ic)
            u = snaps.Y[:, -1]
            norms.append(np.sqrt(u @ (snaps.mass @ u)))
        order = np.log2(abs(norms[0] - norms[1]) / abs(norms[1] - norms[2]))
        assert abs(order - 2.0) <= 0.3

    def test_energy_check_mode(self):
        mesh = build_mesh(64)
        dns_solve(mesh, 0.1, 1e-2, 0.2, initial_condition("step", 0.1, mesh), check_energy=True)

    def test_non_finite_reports_step(self):
        mesh = build_mesh(8)
        ic = np.full(7, np.nan)
        with pytest.raises(NumericalError, match=r"\(step 1\)"):
            dns_solve(mesh, 0.1, 1e-2, 0.1, ic)

    @pytest.mark.parametrize("kw", [dict(nu=0.0), dict(dt=-1.0), dict(t_end=0.015)])
    def test_rejects_bad_parameters(self, kw):
        mesh = build_mesh(8)
        args = dict(nu=0.1, dt=1e-2, t_end=0.1)
        args.update(kw)
        with pytest.raises(ConfigError):
            dns_solve(mesh, args["nu"], args["dt"], args["t_end"], np.zeros(7))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(4, 40), st.floats(0.01, 1.0))
    def test_energy_decays_for_any_step_profile(self, n_cells, nu):
        mesh = build_mesh(n_cells)
        snaps = dns_solve(mesh, nu, 1e-2, 0.05, initial_condition("step", nu, mesh))
        energy = np.einsum("ij,ij->j", snaps.Y, snaps.mass @ snaps.Y)
        assert np.all(np.diff(energy) <= 1e-12 * energy[0])
