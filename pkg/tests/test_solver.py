import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cellgen import random_cell, random_point
from dynhom import (BoxSubregion, IsotropicMaterial, ReferenceMedium, SingularSystem,
                    SpectralGrid, UnitCell, assemble, effective_properties, eigenfields,
                    energy_reality_check, reconstruct_fields, solve_effective,
                    solve_influence, willis_self_adjointness_check)
from dynhom.demo import cubic_inclusion_cell, demo_point
from dynhom.solver import constraint_jacobian, energy, independent_constants
from dynhom.voigt import weight_diag

W = weight_diag()
EPOXY = IsotropicMaterial.from_young(1180.0, 3.5e9, 0.35)
STEEL = IsotropicMaterial.from_young(7800.0, 2.0e11, 0.29)


def schur_oracle(sys_):
    """Averaged influence matrices from the explicit two-bracket formulas."""
    ref = sys_.reference
    r = sys_.n_regions
    w_bar = np.diag(np.tile(W, r))
    d0_bar = np.kron(np.eye(r), ref.material.compliance)
    gam, phi = sys_.gamma_tilde, sys_.phi_tilde
    psi, theta = sys_.psi_hat, sys_.theta_hat
    f1, f2 = sys_.f1, sys_.f2
    inv = np.linalg.inv
    pre = inv(w_bar) @ inv(d0_bar)
    bracket1 = -pre @ gam @ w_bar + pre @ psi @ inv(phi) @ theta @ w_bar
    bracket2 = -phi / ref.rho + theta @ inv(gam) @ psi / ref.rho
    delta = f1.T @ inv(bracket1) @ f1
    lam = -f1.T @ inv(bracket1) @ pre @ psi @ inv(phi) * ref.rho @ f2
    xi = -f2.T @ inv(bracket2) @ (theta @ inv(gam) @ d0_bar @ w_bar / ref.rho) @ f1
    omega_m = f2.T @ inv(bracket2) @ f2
    return delta, lam, xi, omega_m


def rel(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


@pytest.fixture(scope="module")
def random_cases():
    rng = np.random.default_rng(77)
    out = []
    for _ in range(6):
        cell = random_cell(rng)
        q, omega = random_point(rng, cell)
        grid = SpectralGrid(n_max=4, q=q, omega=omega)
        sys_ = assemble(cell, grid)
        inf = solve_influence(sys_)
        out.append((cell, grid, sys_, inf, effective_properties(inf, sys_)))
    return out


class TestSchurOracle:
    def test_averaged_influence(self, random_cases):
        for _, _, sys_, inf, _ in random_cases:
            delta, lam, xi, omega_m = schur_oracle(sys_)
            assert rel(sys_.f1.T @ inf.delta, delta) < 1e-9
            assert rel(sys_.f1.T @ inf.lam, lam) < 1e-9
            assert rel(sys_.f2.T @ inf.xi, xi) < 1e-9
            assert rel(sys_.f2.T @ inf.omega_m, omega_m) < 1e-9


class TestExactLimits:
    def test_no_subregions_returns_reference(self):
        cell = UnitCell((1e-3, 2e-3, 3e-3), ReferenceMedium(EPOXY), EPOXY)
        eff = solve_effective(cell, SpectralGrid(n_max=3, q=(100.0, 0, 0), omega=1e4))
        np.testing.assert_allclose(eff.d_bar, EPOXY.compliance, rtol=1e-15)
        np.testing.assert_allclose(eff.rho_bar, EPOXY.rho * np.eye(3), rtol=1e-15)
        assert not np.any(eff.s1_bar) and not np.any(eff.s2_bar)

    @pytest.mark.parametrize("filler", [
        STEEL,
        IsotropicMaterial(rho=EPOXY.rho * 3.0, lam=EPOXY.lam, mu=EPOXY.mu),
        IsotropicMaterial(rho=EPOXY.rho, lam=EPOXY.lam * 2.0, mu=EPOXY.mu * 4.0),
    ], ids=["both", "density-only", "stiffness-only"])
    def test_full_cell_inclusion(self, filler):
        a = (2e-3, 3e-3, 2.5e-3)
        cell = UnitCell(a, ReferenceMedium(EPOXY), EPOXY,
                        (BoxSubregion(tuple(-v for v in a), a, filler),))
        eff = solve_effective(cell, SpectralGrid(n_max=4, q=(200.0, 50.0, -80.0), omega=3e4))
        np.testing.assert_allclose(eff.d_bar, filler.compliance,
                                   atol=1e-12 * np.max(np.abs(filler.compliance)))
        np.testing.assert_allclose(eff.rho_bar, filler.rho * np.eye(3), atol=1e-12 * filler.rho)
        scale = np.sqrt(np.max(np.abs(filler.compliance)) * filler.rho)
        assert np.max(np.abs(eff.s1_bar)) < 1e-12 * scale

    def test_split_full_cell_matches_single_box(self):
        a = 2e-3
        boxes = (BoxSubregion((-a, -a, -a), (0.0, a, a), STEEL, "left"),
                 BoxSubregion((0.0, -a, -a), (a, a, a), STEEL, "right"))
        cell = UnitCell((a, a, a), ReferenceMedium(EPOXY), EPOXY, boxes)
        eff = solve_effective(cell, SpectralGrid(n_max=4, q=(300.0, 0, 0), omega=5e4))
        np.testing.assert_allclose(eff.d_bar, STEEL.compliance,
                                   atol=1e-10 * np.max(np.abs(STEEL.compliance)))


class TestStructure:
    def test_residuals(self, random_cases):
        for *_, eff in random_cases:
            res = eff.residuals()
            assert max(res.values()) < 1e-12

    def test_energy_real(self, random_cases):
        rng = np.random.default_rng(5)
        for *_, eff in random_cases:
            v = np.sqrt(np.max(np.abs(eff.d_bar)) / np.max(np.abs(eff.rho_bar)))
            probes = [(rng.standard_normal(6) + 1j * rng.standard_normal(6),
                       v * (rng.standard_normal(3) + 1j * rng.standard_normal(3)))
                      for _ in range(5)]
            assert energy_reality_check(eff, probes) < 1e-12

    def test_energy_of_pure_stress_probe(self, random_cases):
        *_, eff = random_cases[0]
        s = np.zeros(6)
        s[0] = 1.0
        np.testing.assert_allclose(energy(eff, s, np.zeros(3)), 0.5 * eff.d_bar[0, 0].real)

    def test_permutation_invariance(self, random_cases):
        cell, grid, *_, eff = next(c for c in random_cases if c[0].n_regions >= 2)
        perm = UnitCell(cell.half_periods, cell.reference, cell.matrix_material,
                        cell.subregions[::-1])
        other = solve_effective(perm, grid)
        assert rel(other.d_bar, eff.d_bar) < 1e-10
        assert rel(other.s1_bar, eff.s1_bar) < 1e-8

    def test_worker_invariance(self):
        cell = cubic_inclusion_cell(divisions=2)
        q, omega = demo_point()
        grid = SpectralGrid(n_max=8, q=q, omega=omega)
        a = solve_effective(cell, grid, workers=1)
        b = solve_effective(cell, grid, workers=3)
        assert rel(b.d_bar, a.d_bar) < 1e-10
        assert rel(b.rho_bar, a.rho_bar) < 1e-10


class TestWillisForm:
    def test_inverse_relations(self, random_cases):
        rng = np.random.default_rng(9)
        for *_, eff in random_cases:
            assert eff.has_willis
            s = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            u = 1e-3 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
            eps, p = eff.strain_momentum(s, u)
            s_back, p_back = eff.stress_momentum(eps, u)
            np.testing.assert_allclose(s_back, s, atol=1e-9 * np.max(np.abs(s)))
            np.testing.assert_allclose(p_back, p, atol=1e-9 * np.max(np.abs(p)))

    def test_self_adjoint_coupling(self):
        rng = np.random.default_rng(11)
        cell = random_cell(rng, n_boxes=3)
        q, omega = random_point(rng, cell)
        assert willis_self_adjointness_check(cell, q, omega, n_max=4) < 1e-10

    def test_symmetric_cell_has_real_tensors(self):
        cell = cubic_inclusion_cell(divisions=2)
        q, omega = demo_point()
        eff = solve_effective(cell, SpectralGrid(n_max=4, q=q, omega=omega))
        for m in (eff.d_bar, eff.s1_bar, eff.rho_bar, eff.c_bar, eff.s_willis):
            assert np.max(np.abs(m.imag)) <= 1e-10 * np.max(np.abs(m))


class TestEigenfields:
    def test_linearity(self, random_cases):
        _, _, _, inf, _ = random_cases[1]
        rng = np.random.default_rng(3)
        s1, s2 = rng.standard_normal((2, 6))
        u1, u2 = rng.standard_normal((2, 3))
        e1 = eigenfields(inf, s1, u1)
        e2 = eigenfields(inf, s2, u2)
        e12 = eigenfields(inf, 2 * s1 - s2, 2 * u1 - u2)
        np.testing.assert_allclose(e12.sigma_eig, 2 * e1.sigma_eig - e2.sigma_eig, atol=1e-9)
        np.testing.assert_allclose(e12.u_eig, 2 * e1.u_eig - e2.u_eig, atol=1e-9)

    def test_subregion_consistency(self, random_cases):
        # the g-weighted system imposes the local laws on subregion averages
        nodes, weights = np.polynomial.legendre.leggauss(20)
        wt = np.einsum("i,j,k->ijk", weights, weights, weights).ravel() / 8.0
        for cell, grid, _, inf, _ in random_cases[:3]:
            rng = np.random.default_rng(0)
            eig = eigenfields(inf, rng.standard_normal(6), 1e-3 * rng.standard_normal(3))
            ref = cell.reference
            d0 = ref.material.compliance
            for a, box in enumerate(cell.subregions):
                axes = [box.center[k] + box.half_width[k] * nodes for k in range(3)]
                pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
                snap = reconstruct_fields(cell, grid, eig, pts)
                stress_avg = wt @ snap.stress
                vel_avg = wt @ snap.velocity
                expected_s = -np.linalg.solve(box.material.compliance - d0,
                                              d0 @ (W * eig.sigma_eig[a])) / W
                expected_v = -ref.rho / (box.material.rho - ref.rho) * eig.u_eig[a]
                assert rel(stress_avg, expected_s) < 1e-10
                assert rel(vel_avg, expected_v) < 1e-10

    def test_points_outside_cell(self, random_cases):
        cell, grid, _, inf, _ = random_cases[0]
        eig = eigenfields(inf, np.ones(6), np.zeros(3))
        with pytest.raises(ValueError):
            reconstruct_fields(cell, grid, eig, [[2 * cell.half_periods[0], 0, 0]])


class TestSingularity:
    def test_singular_system_reports_operator(self, monkeypatch):
        import dynhom.solver as solver_mod
        cell = cubic_inclusion_cell(divisions=1)
        q, omega = demo_point()
        sys_ = assemble(cell, SpectralGrid(n_max=3, q=q, omega=omega))
        monkeypatch.setattr(solver_mod, "PIVOT_THRESHOLD", 2.0)
        with pytest.raises(SingularSystem) as info:
            solve_influence(sys_)
        assert info.value.rcond is not None and "Gamma" in info.value.operator


class TestIndependentConstants:
    def test_counts(self):
        jac, _ = constraint_jacobian()
        assert jac.shape[1] == 162
        real_dof, constants = independent_constants()
        # hermitian 6x6: 36 reals, hermitian 3x3: 9, free complex 6x3: 36
        assert real_dof == 36 + 9 + 36
        assert constants == 45

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2 ** 31 - 1))
    def test_solutions_lie_in_null_space(self, seed):
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        d = d + d.conj().T
        rho = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        rho = rho + rho.conj().T
        s1 = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        parts = [d, s1, s1.conj().T, rho]
        x = np.concatenate([np.concatenate([p.ravel().real, p.ravel().imag]) for p in parts])
        jac, unpack = constraint_jacobian()
        np.testing.assert_allclose(jac @ x, 0.0, atol=1e-12)
        np.testing.assert_allclose(unpack(x)["s1"], s1)
