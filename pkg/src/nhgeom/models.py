"""Built-in model Hamiltonians.

``hf1``/``hf2``
    Two-level fast systems in a harmonic trap with constant spectrum
    ``{-80, 80 - 80i}``.
``lin-resp``
    Two-level static Hamiltonian with a real stationary eigenvalue, plus the
    antisymmetric drive operator and its ground state.
``hxy``
    Two-parameter two-level family used for metric extraction sweeps.
``mathieu``
    Complex Mathieu potential ``0.3 e^{ix} + 0.1 e^{-ix}`` on a lattice of
    period ``2 pi``.

The identity shift in ``lin-resp`` and ``hxy`` is ``i Im sqrt(.)``, which
makes the stationary eigenvalue exactly real (principal square root).
"""
from __future__ import annotations

import numpy as np

from .adiabatic import FastSystem
from .errors import UnknownModel
from .qgt import ParamHamiltonian
from .wannier import PeriodicModel

_A = (1j - 1) / np.sqrt(2)

# The hf1 upper-right entry is -40(2-i)/(1+x^2); with -80(3+i) there (as for hf2)
# the spectrum would be {+-200 - 40i} instead of {-80, 80-80i}.
_HF1_UPPER = -40 * (2 - 1j)
_HF2_UPPER = -80 * (3 + 1j)
_LOWER = -80 * (2 - 1j)


def _hf_matrix(x, d1, d2, upper):
    f = 1.0 + x * x
    return np.array([[d1, upper / f], [_LOWER * f, d2]], dtype=complex)


def hf1_matrix(x: float) -> np.ndarray:
    return _hf_matrix(x, 40 * (1 + 1j), -40 * (1 + 3j), _HF1_UPPER)


def hf2_matrix(x: float) -> np.ndarray:
    return _hf_matrix(x, 160j, -240j, _HF2_UPPER)


def _hf_derivative(x, upper):
    f = 1.0 + x * x
    return np.array([[0, -upper * 2 * x / f**2], [_LOWER * 2 * x, 0]], dtype=complex)


# closed-form adiabatic potentials of the stationary band (pivot-0 gauge)
def hf1_potentials(x):
    x = np.asarray(x, dtype=float)
    f = 1 + x * x
    eps0 = np.full(x.shape, -80.0 + 0j)
    return eps0, -(1 - 1j) * x / f, (-2 * x**2 / f**2).astype(complex)


def hf2_potentials(x):
    x = np.asarray(x, dtype=float)
    f = 1 + x * x
    eps0 = np.full(x.shape, -80.0 + 0j)
    return eps0, (-2 * x / f).astype(complex), -4 * (1 + 1j) * x**2 / f**2


def lin_resp_h0() -> np.ndarray:
    s = np.sqrt(1 - 1j)
    return np.array([[_A, 1], [1, -_A]], dtype=complex) + 1j * s.imag * np.eye(2)


def lin_resp_h1() -> np.ndarray:
    return np.array([[0, -1], [1, 0]], dtype=complex)


def lin_resp_initial() -> np.ndarray:
    """Unnormalised ground state ``((1-i)/sqrt2 + sqrt(1-i), -1)``."""
    return np.array([(1 - 1j) / np.sqrt(2) + np.sqrt(1 - 1j), -1], dtype=complex)


def hxy_matrix(lam) -> np.ndarray:
    x, y = float(lam[0]), float(lam[1])
    s = np.sqrt(1 - 1j * np.exp(2 * y))
    ey = np.exp(y)
    return np.array([[_A * ey, np.exp(-x)], [np.exp(x), -_A * ey]], dtype=complex) + 1j * s.imag * np.eye(2)


def hxy_derivative(lam) -> list[np.ndarray]:
    x, y = float(lam[0]), float(lam[1])
    ey = np.exp(y)
    s = np.sqrt(1 - 1j * ey**2)
    # d/dy sqrt(1 - i e^{2y}) = -i e^{2y} / sqrt(1 - i e^{2y})
    ds = -1j * ey**2 / s
    dx = np.array([[0, -np.exp(-x)], [np.exp(x), 0]], dtype=complex)
    dy = np.array([[_A * ey, 0], [0, -_A * ey]], dtype=complex) + 1j * ds.imag * np.eye(2)
    return [dx, dy]


def hxy_eigenvalues(y: float) -> tuple[complex, complex]:
    s = np.sqrt(1 - 1j * np.exp(2 * y))
    return complex(-s.real), complex(s + 1j * s.imag)


def hxy_ground_state(lam) -> np.ndarray:
    x, y = float(lam[0]), float(lam[1])
    s = np.sqrt(1 - 1j * np.exp(2 * y))
    return np.array([(1 - 1j) / np.sqrt(2) * np.exp(y) + s, -np.exp(x)], dtype=complex)


def hf_param_hamiltonian(name: str) -> ParamHamiltonian:
    mat = hf1_matrix if name == "hf1" else hf2_matrix
    upper = _HF1_UPPER if name == "hf1" else _HF2_UPPER
    return ParamHamiltonian(
        lambda lam: mat(float(np.ravel(lam)[0])),
        param_dim=1,
        matrix_dim=2,
        derivative=lambda lam: [_hf_derivative(float(np.ravel(lam)[0]), upper)],
        gauge_pivot=0,
        name=name,
    )


def fast_system(name: str, mass: float = 1.0, analytic: bool = True) -> FastSystem:
    mat = hf1_matrix if name == "hf1" else hf2_matrix
    pots = hf1_potentials if name == "hf1" else hf2_potentials
    return FastSystem(
        hamiltonian=mat,
        potential=lambda x: 0.5 * np.asarray(x) ** 2,
        mass=mass,
        potentials=pots if analytic else None,
        param=hf_param_hamiltonian(name),
        gauge_pivot=0,
        name=name,
    )


def hxy_param_hamiltonian() -> ParamHamiltonian:
    return ParamHamiltonian(hxy_matrix, param_dim=2, matrix_dim=2, derivative=hxy_derivative, name="hxy")


def lin_resp_param_hamiltonian() -> ParamHamiltonian:
    """``H0 + lam * H1`` as a one-parameter family."""
    h0, h1 = lin_resp_h0(), lin_resp_h1()
    return ParamHamiltonian(
        lambda lam: h0 + float(np.ravel(lam)[0]) * h1,
        param_dim=1,
        matrix_dim=2,
        derivative=lambda lam: [h1],
        name="lin-resp",
    )


def mathieu_model(v_plus: complex = 0.3, v_minus: complex = 0.1, mass: float = 1.0) -> PeriodicModel:
    return PeriodicModel(v_coeffs={1: v_plus, -1: v_minus}, mass=mass, name="mathieu")


BUILTIN_MODELS = ("hf1", "hf2", "lin-resp", "hxy", "mathieu")


def builtin_model(name: str):
    """Look up a built-in model by name.

    Returns a :class:`FastSystem` for ``hf1``/``hf2``, a
    :class:`PeriodicModel` for ``mathieu`` and a :class:`ParamHamiltonian`
    otherwise.
    """
    if name in ("hf1", "hf2"):
        return fast_system(name)
    if name == "hxy":
        return hxy_param_hamiltonian()
    if name == "lin-resp":
        return lin_resp_param_hamiltonian()
    if name == "mathieu":
        return mathieu_model()
    raise UnknownModel(f"unknown model {name!r}; choose from {', '.join(BUILTIN_MODELS)}")
