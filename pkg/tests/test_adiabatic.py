import numpy as np
import pytest
from nhgeom.adiabatic import (
    FastSystem,
    SpatialGrid,
    WaveGrid,
    adiabatic_potentials,
    evolve_effective,
    evolve_full,
    gaussian_packet,
    initial_state,
    moment_series,
    moments,
    project_slow,
    project_trajectory,
    relative_l2,
    spectral_filter,
    stationary_frame,
)
from nhgeom.errors import BandGapCollapse, CFLViolation, VanishingNorm
from nhgeom.models import fast_system
from nhgeom.qgt import ParamHamiltonian


def free_system(split=5.0):
    M = np.diag([0.0, split]).astype(complex)
    return FastSystem(
        hamiltonian=lambda x: M,
        potential=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        potentials=lambda x: (np.zeros(len(x), complex), np.zeros(len(x), complex), np.zeros(len(x), complex)),
        name="free",
    )


def hermitian_system():
    def H(x):
        return np.array([[-1.0, 0.5 * np.tanh(x)], [0.5 * np.tanh(x), 1.0]], dtype=complex)

    return FastSystem(
        hamiltonian=H,
        potential=lambda x: 0.5 * np.asarray(x) ** 2,
        param=ParamHamiltonian(lambda l: H(l[0]), 1, 2),
        name="herm",
    )


def test_moments_gaussian():
    grid = SpatialGrid(8.0, 1024)
    psi = WaveGrid(grid, gaussian_packet(grid, -2.0, 0.5))
    n, mean, var, skew = moments(psi)
    assert n == pytest.approx(1.0, abs=1e-6)
    assert mean == pytest.approx(-2.0, abs=1e-6)
    assert var == pytest.approx(0.25, abs=1e-6)
    assert skew == pytest.approx(0.0, abs=1e-6)
    n2, mean2, var2, skew2 = moments(WaveGrid(grid, (2 - 1j) * psi.samples))
    assert n2 == pytest.approx(5 * n)
    assert (mean2, var2) == pytest.approx((mean, var))


def test_moments_mixture_skew():
    grid = SpatialGrid(8.0, 1024)
    x = grid.x
    w, m, s = np.array([0.7, 0.3]), np.array([-1.0, 1.5]), np.array([0.4, 0.6])
    rho = sum(wi * np.exp(-((x - mi) ** 2) / (2 * si**2)) / np.sqrt(2 * np.pi * si**2) for wi, mi, si in zip(w, m, s))
    mu = np.sum(w * m)
    var = np.sum(w * ((m - mu) ** 2 + s**2))
    third = np.sum(w * ((m - mu) ** 3 + 3 * (m - mu) * s**2))
    n, mean, v, skew = moments(WaveGrid(grid, np.sqrt(rho)))
    assert mean == pytest.approx(mu, abs=1e-8)
    assert v == pytest.approx(var, abs=1e-8)
    assert skew == pytest.approx(third / var**1.5, abs=1e-8)


def test_vanishing_norm():
    grid = SpatialGrid(8.0, 64)
    with pytest.raises(VanishingNorm):
        moments(WaveGrid(grid, np.zeros(64)))


def test_grid_validation():
    with pytest.raises(ValueError):
        SpatialGrid(8.0, 1000)


def test_spectral_filter():
    k = np.linspace(-10, 10, 21)
    f = spectral_filter(k)
    assert f[10] == 1.0
    assert f.min() == pytest.approx(np.exp(-36))
    assert np.all(spectral_filter(k, strength=0.0) == 1.0)


@pytest.mark.parametrize("solver", ["full", "effective"])
def test_free_gaussian_spreading(solver):
    sysm = free_system()
    grid = SpatialGrid(16.0, 1024)
    full0, eff0 = initial_state(sysm, grid, 0.0, 0.5)
    T = 1.0
    if solver == "full":
        traj = project_trajectory(evolve_full(sysm, full0, 1e-3, T, 1000), sysm)
    else:
        traj = evolve_effective(sysm, eff0, 1e-3, T, 1000)
    n, mean, var, skew = moments(traj[-1])
    assert n == pytest.approx(1.0, abs=1e-8)
    assert mean == pytest.approx(0.0, abs=1e-8)
    assert var == pytest.approx(0.25 + (T / (2 * 0.5)) ** 2, abs=1e-6)


def test_full_solver_second_order():
    sysm = fast_system("hf1")
    grid = SpatialGrid(8.0, 256)
    full0, _ = initial_state(sysm, grid)
    T = 0.02
    finals = [evolve_full(sysm, full0, dt, T, 10**6, filter_strength=0.0).states[-1] for dt in (4e-4, 2e-4, 1e-4)]
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    assert 3.5 < e1 / e2 < 4.5


def test_spectral_convergence_in_points():
    sysm = free_system()
    res = []
    for M in (256, 512):
        grid = SpatialGrid(16.0, M)
        _, eff0 = initial_state(sysm, grid, 0.0, 0.5)
        res.append(moments(evolve_effective(sysm, eff0, 1e-3, 0.5, 1000)[-1]))
    assert np.allclose(res[0], res[1], atol=1e-8)


def test_hermitian_norm_conserved():
    sysm = hermitian_system()
    grid = SpatialGrid(8.0, 512)
    full0, _ = initial_state(sysm, grid)
    traj = evolve_full(sysm, full0, 1e-3, 1.0, 100)
    norms = moment_series(traj).norm
    assert np.abs(norms - norms[0]).max() < 1e-6


def test_potentials_analytic_vs_qgt():
    sysm = fast_system("hf1")
    grid = SpatialGrid(8.0, 256)
    x = grid.x
    a = adiabatic_potentials(sysm, x, "analytic")
    q = adiabatic_potentials(sysm, x, "qgt")
    for u, v in zip(a, q):
        assert np.allclose(u, v, atol=1e-6)
    _, eff0 = initial_state(sysm, grid)
    ta = evolve_effective(sysm, eff0, 1e-4, 1.0, 10**6, source="analytic")
    tq = evolve_effective(sysm, eff0, 1e-4, 1.0, 10**6, source="qgt")
    assert relative_l2(tq.states[-1], ta.states[-1]) < 1e-4


def test_hf1_stationary_frame_and_projection():
    sysm = fast_system("hf1")
    grid = SpatialGrid(8.0, 128)
    R, L, eps = stationary_frame(sysm, grid)
    assert np.allclose(np.einsum("xa,xa->x", L, R), 1.0)
    assert np.allclose(R[:, 0], 1.0)
    assert np.allclose(eps, [-80, 80 - 80j])
    full0, eff0 = initial_state(sysm, grid)
    assert np.allclose(project_slow(full0, sysm).samples, eff0.samples)


def test_short_cross_solver_hf1():
    sysm = fast_system("hf1")
    grid = SpatialGrid(8.0, 512)
    full0, eff0 = initial_state(sysm, grid)
    full = project_trajectory(evolve_full(sysm, full0, 1e-4, 0.5, 1000), sysm)
    eff = evolve_effective(sysm, eff0, 1e-4, 0.5, 1000)
    for a, b in zip(full.states, eff.states):
        assert relative_l2(a, b) < 0.02


def test_cfl_violation():
    sysm = fast_system("hf1")
    grid = SpatialGrid(8.0, 64)
    full0, _ = initial_state(sysm, grid)
    with pytest.raises(CFLViolation):
        evolve_full(sysm, full0, 1e-2, 0.1)


def test_gap_collapse():
    sysm = FastSystem(hamiltonian=lambda x: np.eye(2, dtype=complex), potential=lambda x: 0 * x)
    with pytest.raises(BandGapCollapse):
        stationary_frame(sysm, SpatialGrid(8.0, 64))
