"""Bloch bands and Wannier states of 1-D periodic non-Hermitian Hamiltonians.

The continuum Hamiltonian ``(p - A(x))^2 / 2m + V(x)`` with complex,
lattice-periodic ``A`` and ``V`` is diagonalised per crystal momentum in a
plane-wave basis ``u_k(x) = sum_G c_G(k) e^{iGx}``.  Left eigenvectors are
stored as coefficient rows ``l`` with ``l . c = 1``; as functions they are
``sum_G conj(l_G) e^{iGx}``.

Conventions
-----------
* k-grid: ``k_j = -pi/a + j 2 pi / (a N_k)``, ``j = 0 .. N_k - 1``.
* Inner products are cell averages, so ``<u|u>_RR = sum_G |c_G|^2``.
* Wannier functions live on a supercell of ``N_k`` cells with unwrapped
  coordinate ``x`` in ``[-N_k a/2, N_k a/2)``, home cell centred on 0, and
  are normalised so that ``<w|w>_RR = 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .biortho import BiorthogonalSystem, decompose, match_bands
from .errors import GaugeNotSmoothed, SpreadBelowBound, TruncationUnresolved, VanishingOverlap

TWO_PI = 2 * np.pi
TAIL_TOL = 1e-10
OVERLAP_TOL = 1e-8
PHASE_SNAP = 1e-9


@dataclass(frozen=True)
class PeriodicModel:
    """Fourier data of ``V(x)`` and ``A(x)``.

    ``v_coeffs[q]`` multiplies ``exp(2 pi i q x / a)``; likewise ``a_coeffs``.
    """

    v_coeffs: dict = field(default_factory=dict)
    a_coeffs: dict = field(default_factory=dict)
    lattice_constant: float = TWO_PI
    mass: float = 1.0
    name: str = ""

    def __post_init__(self):
        if self.lattice_constant <= 0 or self.mass <= 0:
            raise ValueError("lattice constant and mass must be positive")

    @property
    def reciprocal(self) -> float:
        return TWO_PI / self.lattice_constant

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        def real_fn(c):
            return all(abs(c.get(q, 0) - np.conj(c.get(-q, 0))) <= tol for q in set(c) | {-q for q in c})

        return real_fn(self.v_coeffs) and real_fn(self.a_coeffs)

    def potential(self, x) -> np.ndarray:
        return _synth(self.v_coeffs, x, self.reciprocal)

    def vector_potential(self, x) -> np.ndarray:
        return _synth(self.a_coeffs, x, self.reciprocal)

    def translated(self, shift: float) -> "PeriodicModel":
        """Model with ``V(x + shift)``, ``A(x + shift)``."""
        b = self.reciprocal
        ph = lambda c: {q: v * np.exp(1j * q * b * shift) for q, v in c.items()}
        return replace(self, v_coeffs=ph(self.v_coeffs), a_coeffs=ph(self.a_coeffs))


def _synth(coeffs: dict, x, b: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for q, c in coeffs.items():
        out += c * np.exp(1j * q * b * x)
    return out


def _toeplitz(coeffs: dict, n: int) -> np.ndarray:
    """Matrix ``T[i, j] = coeffs[i - j]`` on ``n`` plane waves."""
    T = np.zeros((n, n), dtype=complex)
    for q, c in coeffs.items():
        if abs(q) < n:
            T += c * np.eye(n, k=-q)
    return T


def bloch_matrix(model: PeriodicModel, k: float, g_max: int = 16) -> np.ndarray:
    """Plane-wave matrix of ``H_k = ((p + k) - A)^2 / 2m + V`` for ``|G| <= g_max`` harmonics."""
    n = 2 * g_max + 1
    b = model.reciprocal
    q = k + b * np.arange(-g_max, g_max + 1)
    Am = _toeplitz(model.a_coeffs, n)
    # A * A as a Fourier convolution, kept exact (not truncated through the basis)
    aa: dict = {}
    for q1, c1 in model.a_coeffs.items():
        for q2, c2 in model.a_coeffs.items():
            aa[q1 + q2] = aa.get(q1 + q2, 0) + c1 * c2
    kin = np.diag(q**2) - (q[:, None] * Am + Am * q[None, :]) + _toeplitz(aa, n)
    return kin / (2 * model.mass) + _toeplitz(model.v_coeffs, n)


def _band_sorted(sys: BiorthogonalSystem) -> BiorthogonalSystem:
    return sys.permuted(np.argsort(sys.eigenvalues.real, kind="stable"))


def bloch_solve(
    model: PeriodicModel, k: float, g_max: int = 16, check_bands: int = 1, tail_tol: float = TAIL_TOL
) -> BiorthogonalSystem:
    """Bi-orthogonal eigensystem of ``H_k``, bands in ascending real energy.

    Raises
    ------
    TruncationUnresolved
        If any of the lowest ``check_bands`` bands has relative weight above
        ``tail_tol`` on the outermost harmonics.
    NearDefective
        Propagated from :func:`nhgeom.biortho.decompose`.
    """
    sys = _band_sorted(decompose(bloch_matrix(model, k, g_max)))
    for n in range(min(check_bands, sys.dim)):
        c = sys.R(n)
        tail = max(abs(c[0]), abs(c[-1])) / np.linalg.norm(c)
        if tail > tail_tol:
            raise TruncationUnresolved(f"band {n} at k={k:.4f}: edge weight {tail:.2e} > {tail_tol:.0e}")
    return sys


@dataclass(frozen=True)
class BlochBundle:
    """Tracked bands on a uniform k-grid.

    Attributes
    ----------
    k : (N_k,) crystal momenta.
    energies : (N_k, nb) complex band energies.
    right : (N_k, dim, nb) right coefficient vectors (columns are bands).
    left : (N_k, nb, dim) left coefficient rows with ``left[j, n] @ right[j, :, n] = 1``.
    shift : integer embedding shift, ``c(k + b) = roll(c(k), -shift)``
        (1 for plane waves, 0 for k-independent orbital bases).
    periodic : whether the gauge closes across the zone boundary.
    smoothed : whether :func:`smooth_gauge` (or a smooth re-gauging) was applied.
    berry_phase : (nb,) accumulated RR transport phase distributed over the zone.
    """

    k: np.ndarray
    energies: np.ndarray
    right: np.ndarray
    left: np.ndarray
    cell: float
    shift: int = 1
    model: PeriodicModel | None = None
    g_max: int | None = None
    periodic: bool = True
    smoothed: bool = False
    berry_phase: np.ndarray | None = None

    @property
    def nk(self) -> int:
        return len(self.k)

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]

    @property
    def dk(self) -> float:
        return TWO_PI / (self.cell * self.nk)

    def embed(self, c: np.ndarray) -> np.ndarray:
        """Coefficients of the state at ``k + b`` given those at ``k`` (axis 0)."""
        if self.shift == 0:
            return c.copy()
        out = np.roll(c, -self.shift, axis=0)
        if self.shift > 0:
            out[-self.shift :] = 0
        else:
            out[: -self.shift] = 0
        return out


def k_grid(nk: int, cell: float = TWO_PI) -> np.ndarray:
    return -np.pi / cell + TWO_PI / (cell * nk) * np.arange(nk)


def _subsystem(sys: BiorthogonalSystem, nb: int) -> BiorthogonalSystem:
    return BiorthogonalSystem(sys.eigenvalues[:nb], sys.right[:, :nb], sys.left[:nb], sys.condition)


def _track(systems: list[BiorthogonalSystem], nb: int):
    E, Rs, Ls = [], [], []
    prev = None
    for sys in systems:
        sub = _subsystem(sys, nb)
        if prev is not None:
            sub = sub.permuted(match_bands(prev, sub))
        E.append(sub.eigenvalues)
        Rs.append(sub.right)
        Ls.append(sub.left)
        prev = sub
    return np.array(E), np.array(Rs), np.array(Ls)


def bloch_bundle(model: PeriodicModel, nk: int = 64, g_max: int = 16, n_bands: int = 2) -> BlochBundle:
    """Solve ``H_k`` on the k-grid and track the lowest ``n_bands`` bands."""
    ks = k_grid(nk, model.lattice_constant)
    systems = [bloch_solve(model, k, g_max, check_bands=n_bands) for k in ks]
    E, R, L = _track(systems, n_bands)
    return BlochBundle(ks, E, R, L, model.lattice_constant, 1, model, g_max)


def matrix_bundle(
    hamiltonian: Callable[[float], np.ndarray], nk: int = 64, cell: float = TWO_PI, n_bands: int | None = None
) -> BlochBundle:
    """Bundle of a finite-dimensional Bloch matrix ``H(k)`` (orbitals at the cell origin)."""
    ks = k_grid(nk, cell)
    systems = [_band_sorted(decompose(hamiltonian(k))) for k in ks]
    nb = systems[0].dim if n_bands is None else n_bands
    E, R, L = _track(systems, nb)
    return BlochBundle(ks, E, R, L, cell, 0)


def _normalised(bundle: BlochBundle, n: int):
    r = bundle.right[:, :, n]
    l = bundle.left[:, n, :]
    nrm = np.linalg.norm(r, axis=1)
    return r / nrm[:, None], l * nrm[:, None]


def smooth_gauge(bundle: BlochBundle, periodic: bool = True) -> BlochBundle:
    """RR parallel-transport gauge with the zone winding spread uniformly.

    Right vectors are RR-normalised, left vectors carry the inverse factor.
    The global phase is fixed by making the largest component at the first
    k-point real and positive.  With ``periodic=False`` the closure step is
    skipped (for bands that are not continuous across the zone boundary).

    Raises
    ------
    VanishingOverlap
        If adjacent RR-normalised states overlap by less than ``1e-8``.
    """
    R = bundle.right.copy()
    L = bundle.left.copy()
    phases = np.zeros(bundle.n_bands)
    for n in range(bundle.n_bands):
        r, l = _normalised(bundle, n)
        p = int(np.argmax(np.abs(r[0])))
        fix = np.exp(-1j * np.angle(r[0, p]))
        r[0] *= fix
        l[0] /= fix
        for j in range(1, bundle.nk):
            ov = np.vdot(r[j - 1], r[j])
            if abs(ov) < OVERLAP_TOL:
                raise VanishingOverlap(f"band {n}: |<u_k|u_k+dk>| = {abs(ov):.2e} at k={bundle.k[j]:.4f}")
            ph = ov / abs(ov)
            r[j] /= ph
            l[j] *= ph
        if periodic:
            ov = np.vdot(r[-1], bundle.embed(r[0]))
            if abs(ov) < OVERLAP_TOL:
                raise VanishingOverlap(f"band {n}: zone-boundary overlap {abs(ov):.2e}")
            theta = float(np.angle(ov))
            if abs(theta) > np.pi - PHASE_SNAP:
                theta = np.pi  # the +-pi branch choice would otherwise follow round-off
            ramp = np.exp(1j * theta * np.arange(bundle.nk) / bundle.nk)
            r *= ramp[:, None]
            l /= ramp[:, None]
            phases[n] = theta
        R[:, :, n] = r
        L[:, n, :] = l
    return replace(bundle, right=R, left=L, periodic=periodic, smoothed=True, berry_phase=phases)


def random_periodic_gauge(nk: int, rng: np.random.Generator, harmonics: int = 3, amplitude: float = 0.3, winding: int | None = None) -> np.ndarray:
    """Smooth complex factors ``f(k_j)`` periodic over the zone (unit-less ``k a``)."""
    theta = TWO_PI * np.arange(nk) / nk  # (k - k_0) a
    z = rng.normal(size=(2, harmonics)) + 1j * rng.normal(size=(2, harmonics))
    z *= amplitude / np.arange(1, harmonics + 1)
    q = np.arange(1, harmonics + 1)
    expo = (z[0] * np.exp(1j * np.outer(theta, q))).sum(1) + (z[1] * np.exp(-1j * np.outer(theta, q))).sum(1)
    w = int(rng.integers(-1, 2)) if winding is None else winding
    return np.exp(expo + 1j * w * theta) * np.exp(1j * rng.uniform(0, TWO_PI))


def apply_gauge(bundle: BlochBundle, factors: np.ndarray) -> BlochBundle:
    """``R -> f R``, ``L -> L / f`` per k (and optionally per band).

    The factors must be smooth and periodic over the zone for the result to
    stay a valid smooth gauge; the ``smoothed`` flag is carried over.
    """
    f = np.asarray(factors, dtype=complex)
    if f.ndim == 1:
        f = np.repeat(f[:, None], bundle.n_bands, axis=1)
    return replace(bundle, right=bundle.right * f[:, None, :], left=bundle.left / f[:, :, None])


def _require_smooth(bundle: BlochBundle):
    if not bundle.smoothed:
        raise GaugeNotSmoothed("call smooth_gauge on the bundle first")


# --------------------------------------------------------------------------
# real-space sampling

def _cell_points(bundle: BlochBundle, per_cell: int | None) -> int:
    if per_cell is not None:
        return per_cell
    need = 4 * (bundle.g_max or 0) + 8
    return int(2 ** np.ceil(np.log2(max(need, 16))))


def _cell_values(bundle: BlochBundle, coeffs: np.ndarray, nx: int) -> np.ndarray:
    """``u(x_c)`` on ``x_c = -a/2 + i a/nx`` for coefficient rows ``(N, dim)``."""
    g = bundle.g_max
    xc = -bundle.cell / 2 + bundle.cell * np.arange(nx) / nx
    G = (TWO_PI / bundle.cell) * np.arange(-g, g + 1)
    return coeffs @ np.exp(1j * np.outer(G, xc)), xc


def _bloch_cell(bundle: BlochBundle, n: int, side: str, nx: int):
    """``psi_k(x_c) = e^{ik x_c} u_k(x_c)`` (RR-normalised u), shape (N_k, nx)."""
    r, l = _normalised(bundle, n)
    coeffs = r if side == "R" else l.conj()
    u, xc = _cell_values(bundle, coeffs, nx)
    return u * np.exp(1j * np.outer(bundle.k, xc)), xc


def _cell_indices(nk: int) -> np.ndarray:
    return np.arange(-(nk // 2), nk - nk // 2)


@dataclass(frozen=True)
class WannierState:
    band: int
    R: float
    x: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def overlap(self, other: "WannierState", alpha: str = "L", beta: str = "R") -> complex:
        bra = self.left if alpha == "L" else self.right
        ket = other.right if beta == "R" else other.left
        return complex(np.sum(bra.conj() * ket) * self.dx)

    def moment(self, power: int) -> float:
        rho = np.abs(self.right) ** 2
        return float(np.sum(self.x**power * rho) * self.dx)


def wannier_state(bundle: BlochBundle, n: int = 0, R: float = 0.0, per_cell: int | None = None) -> WannierState:
    """Right and left Wannier functions of band ``n`` at lattice vector ``R``.

    ``w_R(x) = (1/(N_k sqrt a)) sum_k e^{-ikR} e^{ikx} u_k(x) / sqrt<u_k|u_k>_RR``;
    the left partner uses the left Bloch functions with the inverse factor.

    Raises
    ------
    GaugeNotSmoothed
        If the bundle has not been smoothed.
    """
    _require_smooth(bundle)
    if bundle.model is None:
        raise ValueError("real-space Wannier functions need a plane-wave bundle")
    nx = _cell_points(bundle, per_cell)
    m = _cell_indices(bundle.nk)
    a = bundle.cell
    C = 1.0 / (bundle.nk * np.sqrt(a))
    phase = np.exp(1j * np.outer(m * a - R, bundle.k))  # (cells, N_k)
    out = []
    for side in ("R", "L"):
        psi, xc = _bloch_cell(bundle, n, side, nx)
        out.append((C * phase @ psi).ravel())
    x = (m[:, None] * a + xc[None, :]).ravel()
    return WannierState(n, R, x, out[0], out[1])


def bloch_function(bundle: BlochBundle, n: int, j: int, x, side: str = "R") -> np.ndarray:
    """``e^{i k_j x} u_{k_j}(x)`` (RR-normalised) at arbitrary points ``x``."""
    r, l = _normalised(bundle, n)
    c = r[j] if side == "R" else l[j].conj()
    g = bundle.g_max
    G = (TWO_PI / bundle.cell) * np.arange(-g, g + 1)
    x = np.asarray(x, dtype=float)
    return np.exp(1j * bundle.k[j] * x) * (np.exp(1j * np.multiply.outer(x, G)) @ c)


# --------------------------------------------------------------------------
# Brillouin-zone route

@dataclass(frozen=True)
class BandGeometry:
    """RR connection and metric of one band on the k-grid."""

    k: np.ndarray
    connection: np.ndarray  # complex A^RR(k)
    metric: np.ndarray  # Tr g^RR(k)
    overlap_derivative: np.ndarray  # <d u|d u> of the RR-normalised state


def _kspectral_derivative(f: np.ndarray, k: np.ndarray, cell: float) -> np.ndarray:
    """Spectral d/dk along axis 0 of samples periodic over the zone.

    The Fourier variable conjugate to ``k`` is the cell position ``m a``,
    ``m`` in ``[-N/2, N/2)``; the unpaired ``m = -N/2`` term is dropped.
    """
    nk = len(k)
    m = _cell_indices(nk).astype(float)
    E = np.exp(1j * np.outer(k, m * cell))  # (N_k, cells)
    F = E.conj().T @ f / nk
    w = 1j * m * cell
    if nk % 2 == 0:
        w[0] = 0.0
    return E @ (w[:, None] * F if f.ndim > 1 else w * F)


def band_geometry(bundle: BlochBundle, n: int = 0, per_cell: int | None = None) -> BandGeometry:
    """RR Berry connection ``i<u|du>`` and ``Tr g^RR`` of RR-normalised states.

    Periodic plane-wave bundles are differentiated spectrally through the
    Bloch functions ``psi_k(x) = e^{ikx} u_k(x)`` (periodic in ``k``); this
    is algebraically the supercell quadrature with unwrapped coordinates.
    Non-periodic bundles use second-order central differences.
    """
    r, _ = _normalised(bundle, n)
    if not bundle.periodic:
        du = np.gradient(r, bundle.k, axis=0, edge_order=2)
        ov = np.einsum("ka,ka->k", r.conj(), du)
        dd = np.einsum("ka,ka->k", du.conj(), du).real
    elif bundle.shift == 0:
        du = _kspectral_derivative(r, bundle.k, bundle.cell)
        ov = np.einsum("ka,ka->k", r.conj(), du)
        dd = np.einsum("ka,ka->k", du.conj(), du).real
    else:
        nx = _cell_points(bundle, per_cell)
        psi, xc = _bloch_cell(bundle, n, "R", nx)
        dpsi = _kspectral_derivative(psi, bundle.k, bundle.cell)
        # e^{ikx} du/dk = dpsi/dk - i x psi
        du = dpsi - 1j * xc[None, :] * psi
        ov = np.mean(psi.conj() * du, axis=1)
        dd = np.mean(np.abs(du) ** 2, axis=1)
    A = 1j * ov
    return BandGeometry(bundle.k.copy(), A, dd - np.abs(ov) ** 2, dd)


def wannier_center(bundle: BlochBundle, n: int = 0) -> float:
    """Zone average of ``Re A^RR``."""
    _require_smooth(bundle)
    return float(np.mean(band_geometry(bundle, n).connection.real))


def position_matrix_element(bundle: BlochBundle, n: int = 0, R: float = 0.0) -> complex:
    """``<w_0|x|w_R>_RR = (1/N_k) sum_k e^{-ikR} A^RR(k)``.

    Generally complex off the diagonal; ``R = 0`` gives the centre.
    """
    _require_smooth(bundle)
    geo = band_geometry(bundle, n)
    return complex(np.mean(np.exp(-1j * bundle.k * R) * geo.connection))


@dataclass(frozen=True)
class SpreadResult:
    spread: float
    metric_bound: float
    connection_variance: float

    @property
    def gap(self) -> float:
        return self.spread - self.metric_bound


def wannier_spread(bundle: BlochBundle, n: int = 0, route: str = "quadrature", slack: float = 1e-6) -> SpreadResult:
    """Spread of the RR Wannier density and its quantum-metric lower bound.

    ``route='quadrature'`` evaluates ``<x^2> - <x>^2`` on the supercell;
    ``route='bz'`` uses the zone average of ``<du|du> - (avg Re A)^2``.
    ``metric_bound`` is the zone average of ``Tr g^RR``.

    Raises
    ------
    SpreadBelowBound
        If the spread undercuts the bound by more than ``slack``.
    """
    _require_smooth(bundle)
    geo = band_geometry(bundle, n)
    bound = float(np.mean(geo.metric))
    var_a = float(np.var(geo.connection.real))
    if route == "quadrature":
        w = wannier_state(bundle, n)
        spread = w.moment(2) - w.moment(1) ** 2
    elif route == "bz":
        spread = float(np.mean(geo.overlap_derivative) - np.mean(geo.connection.real) ** 2)
    else:
        raise ValueError("route must be 'quadrature' or 'bz'")
    if spread < bound - slack:
        raise SpreadBelowBound(f"spread {spread:.6g} below metric bound {bound:.6g}")
    return SpreadResult(float(spread), bound, var_a)


# --------------------------------------------------------------------------
# CSV export

def write_wannier_csv(path, state: WannierState) -> int:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "re_w_right", "im_w_right", "re_w_left", "im_w_left"])
        for x, r, l in zip(state.x, state.right, state.left):
            wr.writerow([f"{x:.12e}", f"{r.real:.12e}", f"{r.imag:.12e}", f"{l.real:.12e}", f"{l.imag:.12e}"])
    return len(state.x)


def write_summary_csv(path, rows) -> int:
    """``rows``: iterable of ``(band, center, spread, metric_bound)``."""
    rows = list(rows)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["band", "center", "spread", "metric_bound"])
        for b, c, s, m in rows:
            wr.writerow([int(b), f"{c:.12e}", f"{s:.12e}", f"{m:.12e}"])
    return len(rows)
