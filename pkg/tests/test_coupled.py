import numpy as np
import pytest

from kjflow.coupled import (
    CFLError,
    CoupledState,
    CoupledSystem,
    admissibility_constant,
    default_grid,
    evolve,
    picard_evolve,
)
from kjflow.flowmap import HalfPlaneGrid
from kjflow.plate import Berger, Kirchhoff

GRID = default_grid()
SMALL = HalfPlaneGrid(Lx=4.0, Lz=2.0, hx=0.25, hz=0.25)


def bump(t, a, b):
    s = (2 * t - a - b) / (b - a)
    out = np.zeros_like(t)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1 - s[inside] ** 2))
    return out


def sample_state(grid, U, amp=1.0):
    X, Z = np.meshgrid(grid.x, grid.z, indexing="ij")
    phi = amp * bump(X, -2, 2) * bump(Z, 0.2, 2 * grid.Lz - 0.4)
    psi = 0.5 * amp * bump(X, -0.9, 0.9) * bump(Z, -grid.Lz / 2, grid.Lz / 2)
    psi[~grid.omega_mask, 0] = 0.0
    xo = grid.x[grid.omega_mask]
    u = 0.3 * amp * (1 - xo**2) ** 2
    v = 0.1 * amp * xo * (1 - xo**2) ** 2
    return CoupledState(grid, U, phi, psi, u, v)


class TestState:
    def test_validation(self):
        with pytest.raises(ValueError):
            CoupledState.zero(GRID, 1.0)
        with pytest.raises(ValueError):
            CoupledState(GRID, 0.5, np.zeros((3, 3)), np.zeros((3, 3)),
                         np.zeros(15), np.zeros(15))

    def test_rejects_trace_violation(self):
        psi = np.ones(GRID.shape)
        with pytest.raises(ValueError):
            CoupledState(GRID, 0.5, np.zeros(GRID.shape), psi,
                         np.zeros(15), np.zeros(15))

    def test_pack_unpack_round_trip(self):
        y = sample_state(GRID, 0.5)
        system = CoupledSystem(GRID, 0.5)
        back = system.unpack(system.pack(y), 0.5, 0.0)
        assert np.array_equal(back.phi, y.phi)
        assert np.array_equal(back.psi, y.psi)
        assert np.array_equal(back.u, y.u)


class TestEvolve:
    def test_zero_stays_zero(self):
        traj = evolve(CoupledState.zero(SMALL, 0.5), 0.5, 0.01)
        assert traj.reports[-1].E_total == 0.0
        assert np.all(traj.final_state.phi == 0.0)

    def test_energy_conserved_at_rest(self):
        traj = evolve(sample_state(GRID, 0.0), 1.0, 1e-3)
        e0 = traj.reports[0].E_total
        drift = max(abs(r.E_total - e0) for r in traj.reports) / e0
        assert drift < 1e-10

    def test_energy_components(self):
        y = sample_state(GRID, 0.0)
        system = CoupledSystem(GRID, 0.0)
        e_pl, e_fl = system.energies(system.pack(y))
        assert e_pl > 0 and e_fl > 0
        # plate-only state
        yp = CoupledState(GRID, 0.0, np.zeros(GRID.shape), np.zeros(GRID.shape),
                          y.u, np.zeros_like(y.v))
        e_pl2, e_fl2 = system.energies(system.pack(yp))
        assert e_fl2 == 0.0
        assert abs(e_pl2 - 0.5 * y.u @ (system.A_m @ y.u)) < 1e-14

    def test_residual_second_order_in_dt(self):
        res = []
        for dt in (4e-3, 2e-3):
            traj = evolve(sample_state(GRID, 0.3), 0.5, dt)
            res.append(abs(traj.reports[-1].residual))
        slope = np.log2(res[0] / res[1])
        assert 1.8 < slope < 2.2

    def test_trace_constraint_exact(self):
        traj = evolve(sample_state(GRID, 0.5), 0.5, 2e-3)
        assert traj.final_state.kj_defect() == 0.0

    def test_cfl_rejected(self):
        with pytest.raises(CFLError):
            evolve(sample_state(SMALL, 0.5), 0.5, 0.5)

    def test_causal_window_rejected(self):
        with pytest.raises(ValueError):
            evolve(sample_state(SMALL, 0.5), 10.0, 0.01)

    def test_continuous_dependence_stable(self):
        system = CoupledSystem(GRID, 0.5)
        ratios = []
        for dt in (4e-3, 2e-3):
            a = evolve(sample_state(GRID, 0.5), 0.5, dt, system=system)
            b = evolve(sample_state(GRID, 0.5, amp=1.01), 0.5, dt, system=system)
            d0 = system.y_norm(system.pack(sample_state(GRID, 0.5))
                               - system.pack(sample_state(GRID, 0.5, amp=1.01)))
            dT = system.y_norm(system.pack(a.final_state) - system.pack(b.final_state))
            ratios.append(dT / d0)
        assert ratios[0] < 3.0
        assert abs(ratios[1] - ratios[0]) < 0.1 * ratios[0]


class TestNonlinear:
    @pytest.mark.parametrize("kind", [Kirchhoff(f=lambda s: s**3, F=lambda s: s**4 / 4),
                                      Berger(kappa=1.0, gamma=0.5)])
    def test_energy_relation_refines(self, kind):
        res = []
        for dt in (4e-3, 2e-3):
            traj = evolve(sample_state(GRID, 0.3), 0.5, dt, nonlinearity=kind)
            res.append(abs(traj.reports[-1].residual))
        assert np.log2(res[0] / res[1]) > 1.5

    def test_potential_tracked(self):
        kind = Berger(kappa=1.0, gamma=0.0)
        traj = evolve(sample_state(GRID, 0.0), 0.2, 2e-3, nonlinearity=kind)
        assert traj.reports[-1].potential >= 0.0
        e0 = traj.reports[0]
        eT = traj.reports[-1]
        drift = abs((eT.E_total + eT.potential) - (e0.E_total + e0.potential))
        assert drift < 1e-5 * (e0.E_total + e0.potential)


class TestPicard:
    def test_rest_converges_immediately(self):
        traj, rep = picard_evolve(sample_state(SMALL, 0.0), 0.5, 0.01)
        assert rep.converged
        assert rep.iterations == 0

    def test_contracts_and_matches_monolithic(self):
        y0 = sample_state(GRID, 0.5)
        ptraj, rep = picard_evolve(y0, 0.5, 2e-3)
        assert rep.converged
        assert all(r < 1 for r in rep.ratios)
        mono = evolve(sample_state(GRID, 0.5), 0.5, 2e-3)
        system = CoupledSystem(GRID, 0.5)
        diff = system.y_norm(system.pack(ptraj.final_state)
                             - system.pack(mono.final_state))
        assert diff / system.y_norm(system.pack(mono.final_state)) < 1e-5


class TestAdmissibility:
    def test_needs_samples(self):
        with pytest.raises(ValueError):
            admissibility_constant(1.0, 3)

    def test_zero_at_rest(self):
        assert admissibility_constant(1.0, 10, U=0.0) == 0.0

    def test_stable_under_refinement(self):
        c1 = admissibility_constant(1.0, 10, U=0.5, grid=SMALL.refine(),
                                    dt=5e-3, seed=1)
        c2 = admissibility_constant(1.0, 10, U=0.5, grid=SMALL.refine().refine(),
                                    dt=5e-3, seed=1)
        assert c1 > 0 and c2 > 0
        assert max(c1, c2) / min(c1, c2) < 2.0
