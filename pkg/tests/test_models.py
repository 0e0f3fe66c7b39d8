import numpy as np
import pytest
from nhgeom.adiabatic import FastSystem
from nhgeom.biortho import decompose
from nhgeom.errors import UnknownModel
from nhgeom.models import (
    BUILTIN_MODELS,
    builtin_model,
    hf1_matrix,
    hf1_potentials,
    hf2_matrix,
    hf2_potentials,
    hxy_eigenvalues,
    hxy_ground_state,
    hxy_matrix,
    lin_resp_h0,
    lin_resp_h1,
)
from nhgeom.qgt import ParamHamiltonian
from nhgeom.wannier import PeriodicModel


def test_builtin_lookup():
    assert isinstance(builtin_model("hf1"), FastSystem)
    assert isinstance(builtin_model("hxy"), ParamHamiltonian)
    assert isinstance(builtin_model("lin-resp"), ParamHamiltonian)
    assert isinstance(builtin_model("mathieu"), PeriodicModel)
    assert set(BUILTIN_MODELS) == {"hf1", "hf2", "lin-resp", "hxy", "mathieu"}
    with pytest.raises(UnknownModel):
        builtin_model("nope")


@pytest.mark.parametrize("mat", [hf1_matrix, hf2_matrix])
def test_hf_constant_spectrum(mat):
    for x in np.linspace(-8, 8, 50):
        w = np.sort_complex(np.linalg.eigvals(mat(x)))
        assert np.allclose(w, [-80, 80 - 80j], atol=1e-9)


def test_hf_potentials_closed_form():
    x = np.array([-1.5, 0.0, 2.0])
    e1, A1, g1 = hf1_potentials(x)
    e2, A2, g2 = hf2_potentials(x)
    assert np.allclose(e1, -80) and np.allclose(e2, -80)
    assert np.allclose(A1, -(1 - 1j) * x / (1 + x**2))
    assert np.allclose(g1, -2 * x**2 / (1 + x**2) ** 2)
    assert np.allclose(A2, -2 * x / (1 + x**2))
    assert np.allclose(g2, -4 * (1 + 1j) * x**2 / (1 + x**2) ** 2)


def test_lin_resp():
    w = decompose(lin_resp_h0()).eigenvalues
    assert abs(w[0].imag) < 1e-14
    assert w[1].imag == pytest.approx(2 * np.sqrt(1 - 1j).imag)
    h1 = lin_resp_h1()
    assert np.allclose(h1, -h1.T)


@pytest.mark.parametrize("lam", [(0.0, 0.0), (-0.7, 0.4), (1.0, -1.0)])
def test_hxy(lam):
    H = hxy_matrix(lam)
    e0, e1 = hxy_eigenvalues(lam[1])
    assert abs(e0.imag) < 1e-14
    assert e0 == pytest.approx(-np.sqrt(1 - 1j * np.exp(2 * lam[1])).real)
    w = decompose(H).eigenvalues
    assert np.allclose(w, [e0, e1])
    psi = hxy_ground_state(lam)
    assert np.allclose(H @ psi, e0 * psi)
