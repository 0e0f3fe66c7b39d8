import numpy as np
import pytest
import sympy as sp
from conftest import random_matrix
from nhgeom.biortho import decompose
from nhgeom.models import hf_param_hamiltonian
from nhgeom.qgt import FLAVORS, ParamHamiltonian, alt_tensor, berry_connection, qgt_tensor

XS = [-2.0, -1.0, 0.0, 1.0, 2.0]


def smooth_family(rng, dim=2, min_gap=1.0):
    """Random smooth family, redrawn until the spectrum at the origin is well separated."""
    while True:
        A = [random_matrix(rng, dim) for _ in range(4)]
        w = np.linalg.eigvals(A[0])
        if min(abs(a - b) for i, a in enumerate(w) for b in w[i + 1 :]) > min_gap:
            break
    return ParamHamiltonian(
        lambda l: A[0] + l[0] * A[1] + l[1] * A[2] + np.sin(l[0] * l[1]) * A[3],
        param_dim=2,
        matrix_dim=dim,
        derivative=lambda l: [A[1] + l[1] * np.cos(l[0] * l[1]) * A[3], A[2] + l[0] * np.cos(l[0] * l[1]) * A[3]],
    )


def bloch_sphere():
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]])
    sz = np.diag([1.0, -1.0]).astype(complex)
    return ParamHamiltonian(
        lambda l: np.sin(l[0]) * np.cos(l[1]) * sx + np.sin(l[0]) * np.sin(l[1]) * sy + np.cos(l[0]) * sz,
        param_dim=2,
        matrix_dim=2,
    )


def symbolic_bloch_qgt():
    """Projector-based QGT of the lower Bloch-sphere state, differentiated symbolically."""
    th, ph = sp.symbols("theta phi", real=True)
    ket = sp.Matrix([sp.sin(th / 2) * sp.exp(-sp.I * ph), -sp.cos(th / 2)])
    P = ket * ket.H
    dP = [sp.diff(P, v) for v in (th, ph)]
    chi = sp.Matrix(2, 2, lambda i, j: sp.simplify((P * dP[i] * dP[j]).trace()))
    return sp.lambdify((th, ph), chi, "numpy")


@pytest.mark.parametrize("x", XS)
def test_hf1_closed_forms(x):
    H = hf_param_hamiltonian("hf1")
    res = qgt_tensor(H, [x], 0, "LR", 1e-4)
    assert res.connection[0] == pytest.approx(-(1 - 1j) * x / (1 + x * x), abs=1e-6)
    assert res.metric[0, 0] == pytest.approx(-2 * x * x / (1 + x * x) ** 2, abs=1e-6)


@pytest.mark.parametrize("x", XS)
def test_hf2_closed_forms(x):
    H = hf_param_hamiltonian("hf2")
    res = qgt_tensor(H, [x], 0, "LR", 1e-4)
    assert res.connection[0] == pytest.approx(-2 * x / (1 + x * x), abs=1e-6)
    assert res.metric[0, 0] == pytest.approx(-4 * (1 + 1j) * x * x / (1 + x * x) ** 2, abs=1e-6)


def test_bloch_sphere_against_symbolic():
    oracle = symbolic_bloch_qgt()
    H = bloch_sphere()
    for th, ph in [(0.4, 0.3), (1.1, -2.0), (2.5, 1.7)]:
        ref = np.array(oracle(th, ph), dtype=complex)
        assert np.allclose(ref.real[0, 0], 0.25)
        results = [qgt_tensor(H, [th, ph], 0, f, 1e-4, richardson=True) for f in FLAVORS]
        for r in results:
            assert np.allclose(r.qgt, ref, atol=1e-8)
            assert np.allclose(r.metric, np.diag([0.25, 0.25 * np.sin(th) ** 2]), atol=1e-8)
            assert np.abs(r.metric.imag).max() < 1e-8
            assert np.abs(r.curvature.imag).max() < 1e-8


def test_constant_hamiltonian(rng):
    M = random_matrix(rng, 3)
    H = ParamHamiltonian(lambda l: M, param_dim=2, matrix_dim=3)
    for f in FLAVORS:
        r = qgt_tensor(H, [0.1, 0.2], 1, f)
        assert np.abs(r.qgt).max() < 1e-10
        assert np.abs(r.connection).max() < 1e-10
    assert np.abs(alt_tensor(H, [0.1, 0.2], 0)).max() < 1e-10


def test_tensor_decomposition(rng):
    H = smooth_family(rng)
    r = qgt_tensor(H, [0.2, -0.3], 0, "RL")
    assert np.allclose(r.curvature, -r.curvature.T)
    assert np.allclose(r.metric, r.metric.T)
    assert np.allclose(r.metric - 0.5j * r.curvature, r.qgt, atol=1e-10)


def test_connection_conjugate_pair(rng):
    for _ in range(20):
        H = smooth_family(rng)
        lam = rng.uniform(-0.2, 0.2, size=2)
        a_lr = berry_connection(H, lam, 0, "LR", 1e-3, richardson=True)
        a_rl = berry_connection(H, lam, 0, "RL", 1e-3, richardson=True)
        assert np.allclose(a_rl.conj(), a_lr, atol=1e-8)


def test_fd_matches_analytic(rng):
    for _ in range(10):
        H = smooth_family(rng, dim=3)
        lam = rng.uniform(-0.2, 0.2, size=2)
        for f in FLAVORS:
            fd = qgt_tensor(H, lam, 1, f, 1e-4, richardson=True)
            an = qgt_tensor(H, lam, 1, f, method="analytic")
            assert np.allclose(fd.qgt, an.qgt, atol=1e-6)
            assert np.allclose(fd.connection, an.connection, atol=1e-6)


def test_fd_convergence_order(rng):
    ratios = []
    for _ in range(5):
        H = smooth_family(rng)
        lam = rng.uniform(-0.2, 0.2, size=2)
        exact = qgt_tensor(H, lam, 0, "LR", method="analytic").qgt
        e1 = np.abs(qgt_tensor(H, lam, 0, "LR", 1e-2).qgt - exact).max()
        e2 = np.abs(qgt_tensor(H, lam, 0, "LR", 5e-3).qgt - exact).max()
        ratios.append(e1 / e2)
    assert min(ratios) >= 3.5


def test_hermitian_flavors_agree(rng):
    for _ in range(10):
        A = [random_matrix(rng, 3) for _ in range(3)]
        A = [0.5 * (a + a.conj().T) for a in A]
        H = ParamHamiltonian(lambda l: A[0] + l[0] * A[1] + l[1] ** 2 * A[2], 2, 3)
        lam = rng.uniform(-0.2, 0.2, size=2)
        chis = [qgt_tensor(H, lam, 0, f, richardson=True).qgt for f in FLAVORS]
        for c in chis[1:]:
            assert np.allclose(c, chis[0], atol=1e-8)
        alt = alt_tensor(H, lam, 0, richardson=True)
        assert np.allclose(alt, chis[0], atol=1e-7)


def test_real_symmetric_connection_imaginary(rng):
    A = [rng.normal(size=(3, 3)) for _ in range(2)]
    A = [a + a.T for a in A]
    H = ParamHamiltonian(lambda l: A[0] + l[0] * A[1], 1, 3)
    for f in FLAVORS:
        a = berry_connection(H, [0.3], 1, f)
        assert abs(a.real).max() < 1e-8


def test_projector_qgt_gauge_free(rng):
    """Rescaling the stored eigenvectors of the evaluator does not change chi."""
    base = smooth_family(rng)
    D = np.diag([1.3 + 0.4j, -0.7 + 2j])
    H = ParamHamiltonian(lambda l: D @ base(l) @ np.linalg.inv(D), 2, 2)
    r1 = qgt_tensor(base, [0.1, 0.1], 0, "LR").qgt
    r2 = qgt_tensor(H, [0.1, 0.1], 0, "LR").qgt
    # a constant similarity is a change of frame; the LR tensor is invariant under it
    assert np.allclose(r1, r2, atol=1e-8)


def test_bad_flavor():
    with pytest.raises(ValueError):
        qgt_tensor(hf_param_hamiltonian("hf1"), [0.0], 0, "XY")


def test_rescaled_eigensystem_same_projectors(rng):
    sys = decompose(random_matrix(rng, 2))
    scaled = sys.rescaled([2 - 1j, 0.1j])
    from nhgeom.biortho import projector

    for a, b in [("L", "R"), ("R", "R"), ("L", "L")]:
        assert np.allclose(projector(sys, 0, a, b), projector(scaled, 0, a, b))
