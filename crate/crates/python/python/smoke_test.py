"""Smoke test for the vpme extension module. Run after `maturin develop`."""

import math

import vpme


def check_field_solve():
    n = 64
    rho = [1.0 + 0.3 * math.cos(2 * math.pi * i / n) for i in range(n)]
    sol = vpme.vpme_field(rho, dim=1, n=n)
    assert abs(sol.electron_mass - 1.0) < 1e-10, sol.electron_mass
    assert sol.residual <= 1e-10
    lap = vpme.laplacian(sol.potential, 1, n)
    worst = max(abs(l - math.exp(u) + r) for l, u, r in zip(lap, sol.potential, rho))
    assert worst < 1e-9, worst
    smooth = vpme.mollify(rho, 1, n, 0.1)
    assert abs(sum(smooth) / n - 1.0) < 1e-12


def check_transport():
    a = [0.1, 0.4, 0.7]
    b = [x + 0.05 for x in a]
    assert abs(vpme.w2_1d(a, b) - 0.05) < 1e-12
    assert abs(vpme.w2_exact(a, b, dims=1) - 0.05) < 1e-12
    assert abs(vpme.w2_exact([0.05], [0.95], dims=1, periodic_dims=1) - 0.1) < 1e-12
    try:
        vpme.w2_exact([0.0, 1.0], [0.0], dims=1)
    except RuntimeError:
        pass
    else:
        raise AssertionError("size mismatch accepted")


def check_simulation():
    ens = vpme.sample_initial("perturbed_maxwellian", dim=1, n_grid=32, n_particles=2000, seed=3)
    assert len(ens) == 2000 and ens.dim == 1
    assert abs(sum(ens.weights) - 1.0) < 1e-12

    sim = vpme.Simulation(n_grid=32, n_particles=2000, scenario="perturbed_maxwellian")
    e0 = sim.energy()[3]
    sim.step(1e-3, steps=100)
    assert abs(sim.time - 0.1) < 1e-12
    drift = abs(sim.energy()[3] - e0) / abs(e0)
    assert drift < 1e-2, drift
    diag = sim.diagnostics()
    assert diag["hat_tail"] <= 0.1
    assert len(sim.rho()) == 32

    (w2, floor, exact) = vpme.ensemble_w2(sim.ensemble(), ens)
    assert exact and floor == 0.0 and w2 > 0.0

    try:
        vpme.Simulation(bogus=1)
    except ValueError as e:
        assert "unknown key" in str(e)
    else:
        raise AssertionError("unknown key accepted")


def main():
    check_field_solve()
    check_transport()
    check_simulation()
    assert abs(vpme.interpolation_constant(1) - 2.2894284851066637) < 1e-15
    print("vpme smoke test passed:", ", ".join(vpme.SCENARIOS))


if __name__ == "__main__":
    main()
