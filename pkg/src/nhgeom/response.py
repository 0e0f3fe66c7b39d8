"""Driven two-level (and few-level) non-Hermitian dynamics.

The unperturbed spectrum is written ``eps_n = omega_n - i gamma_n`` with the
stationary band ``n = 0`` first (largest imaginary part).  Occupations are
weights of the bi-orthogonal projection of the state onto RR-normalised
right eigenvectors.  Whenever the stationary band must be non-decaying the
Hamiltonian is shifted by ``i gamma_0`` and the shift is reported back; the
caller's matrix is never modified.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .biortho import BiorthogonalSystem, decompose, petermann_two_level
from .errors import CFLViolation, DegenerateSpectrum, NotSingleStationary, NotTwoLevel, StationaryDecays
from .qgt import ParamHamiltonian

CFL_LIMIT = 0.05
DEFAULT_T_A = 24.0


def cosine_envelope(omega: float, amplitude: float = 2.0) -> Callable[[float], float]:
    return lambda t: amplitude * np.cos(omega * t)


@dataclass(frozen=True)
class DriveProtocol:
    """Periodic drive ``eps f(t) H1``.

    Either ``h1`` is given directly or ``indices`` names the modulated
    parameters: ``(i,)`` for a single one, ``(i, j, +1)`` / ``(i, j, -1)``
    for the in-phase / anti-phase pair; :meth:`operator` then builds ``H1``
    from the parameter derivatives.
    """

    epsilon: float
    omega: float
    h1: np.ndarray | None = None
    indices: tuple | None = None
    amplitude: float = 2.0
    t_a: float = DEFAULT_T_A

    def __post_init__(self):
        if not self.epsilon > 0 or not self.omega > 0:
            raise ValueError("epsilon and omega must be positive")
        if (self.h1 is None) == (self.indices is None):
            raise ValueError("give exactly one of h1 or indices")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega

    @property
    def window(self) -> tuple[float, float]:
        return self.t_a, self.t_a + self.period

    def envelope(self, t):
        return self.amplitude * np.cos(self.omega * t)

    def operator(self, H: ParamHamiltonian | None = None, lam=None, h: float = 1e-6) -> np.ndarray:
        if self.h1 is not None:
            return np.asarray(self.h1, dtype=complex)
        grads = parameter_gradient(H, lam, h)
        if len(self.indices) == 1:
            return grads[self.indices[0]]
        i, j, sign = self.indices
        return grads[i] + np.sign(sign) * grads[j]


def parameter_gradient(H: ParamHamiltonian, lam, h: float = 1e-6) -> list[np.ndarray]:
    """``dH/dlam_j`` from the analytic derivative if present, else central differences."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if H.derivative is not None:
        return H.grad(lam)
    out = []
    for j in range(H.param_dim):
        e = np.zeros_like(lam)
        e[j] = h
        out.append((H(lam + e) - H(lam - e)) / (2 * h))
    return out


# --------------------------------------------------------------------------
# numerical oracle

@dataclass
class DrivenTrajectory:
    times: np.ndarray
    states: np.ndarray  # (n_t, ..., d)


def evolve_driven(
    H0,
    h1,
    envelope: Callable[[float], float],
    epsilon: float,
    psi0,
    dt: float,
    T: float,
    save_every: int = 1,
    cfl: float = CFL_LIMIT,
) -> DrivenTrajectory:
    """Classical RK4 for ``i dpsi/dt = (H0 + eps f(t) H1) psi``.

    ``H0``, ``h1`` and ``psi0`` may carry matching leading batch dimensions
    (``(..., d, d)`` and ``(..., d)``); all batch members share ``f``.

    Raises
    ------
    CFLViolation
        If ``dt (||H0|| + eps ||H1||) > cfl`` for any batch member.
    """
    H0 = np.asarray(H0, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    psi = np.array(psi0, dtype=complex)
    scale = np.max(np.linalg.norm(H0, ord=2, axis=(-2, -1)) + epsilon * np.linalg.norm(h1, ord=2, axis=(-2, -1)))
    if dt * scale > cfl:
        raise CFLViolation(f"dt*(|H0|+eps|H1|) = {dt * scale:.3g} > {cfl}")
    steps = int(round(T / dt))
    if steps < 1 or abs(steps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a positive integer multiple of dt")

    def rhs(t, v):
        M = H0 + (epsilon * envelope(t)) * h1
        return -1j * np.einsum("...ab,...b->...a", M, v)

    times = [0.0]
    states = [psi.copy()]
    t = 0.0
    for step in range(1, steps + 1):
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = step * dt
        if step % save_every == 0 or step == steps:
            times.append(t)
            states.append(psi.copy())
    return DrivenTrajectory(np.array(times), np.array(states))


def occupation(sys: BiorthogonalSystem, psi, m: int) -> np.ndarray:
    """``|L_m psi|^2 <m|m>_RR / |L_m R_m|^2``; ``psi`` may be a stack ``(..., d)``."""
    R, L = sys.R(m), sys.L(m)
    amp = np.asarray(psi) @ L
    return np.abs(amp) ** 2 * np.vdot(R, R).real / abs(L @ R) ** 2


# --------------------------------------------------------------------------
# first-order theory

@dataclass(frozen=True)
class ShiftedSpectrum:
    """Spectrum with the stationary band moved onto the real axis."""

    system: BiorthogonalSystem
    shift: float  # gamma_0 that was added as +i gamma_0

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.system.eigenvalues


def shifted_spectrum(H0) -> ShiftedSpectrum:
    """Decompose ``H0 + i gamma_0`` with ``gamma_0 = -Im eps_0``.

    Raises
    ------
    NotSingleStationary
        If more than one band has the maximal imaginary part.
    """
    sys = decompose(np.asarray(H0, dtype=complex))
    if not sys.stationary().is_unique:
        raise NotSingleStationary("several bands share the slowest decay; use multi_stationary_rates")
    g0 = -float(sys.eigenvalues[0].imag)
    shifted = BiorthogonalSystem(sys.eigenvalues + 1j * g0, sys.right, sys.left, sys.condition)
    return ShiftedSpectrum(shifted, g0)


def _cos_integral(z: complex, omega: float, t, amplitude: float = 2.0):
    """``int_0^t (amplitude cos w s) e^{z s} ds`` in closed form."""
    t = np.asarray(t, dtype=float)

    def part(r):
        if r == 0:
            return t.astype(complex)
        return np.expm1(r * t) / r

    return 0.5 * amplitude * (part(z + 1j * omega) + part(z - 1j * omega))


def transition_element(sys: BiorthogonalSystem, h1, m: int, n: int = 0) -> complex:
    """``<psi_m|H1|psi_n>_LR`` for bi-orthonormal ``L_m R_m = 1`` pairs."""
    Lm = sys.L(m) / (sys.L(m) @ sys.R(m))
    return complex(Lm @ np.asarray(h1, dtype=complex) @ sys.R(n))


def first_order_amplitude(H0, h1, m: int, t, epsilon: float = 1.0, omega: float | None = None, envelope=None, amplitude: float = 2.0):
    """First-order excited-state amplitude ``c_m(t)`` (interaction picture).

    ``c_m(t) = -i eps sqrt(<m|m>/<0|0>) <m|H1|0>_LR int_0^t f(s) e^{i(w_m - w_0)s} e^{gamma_m s} ds``

    The cosine envelope ``amplitude cos(omega s)`` is integrated in closed
    form; any other ``envelope`` is integrated by adaptive quadrature.

    Returns
    -------
    c : complex ndarray (shape of ``t``)
    shift : float, the ``gamma_0`` added to make the stationary band real.
    """
    spec = shifted_spectrum(H0)
    sys = spec.system
    R0, Rm = sys.R(0), sys.R(m)
    ratio = np.sqrt(np.vdot(Rm, Rm).real / np.vdot(R0, R0).real)
    V = transition_element(sys, h1, m, 0) * ratio
    z = 1j * (sys.eigenvalues[m].real - sys.eigenvalues[0].real) - sys.eigenvalues[m].imag
    if envelope is None:
        if omega is None:
            raise ValueError("give omega for the cosine envelope or an explicit envelope")
        I = _cos_integral(z, omega, t, amplitude)
    else:
        I = np.array([_quad_complex(lambda s: envelope(s) * np.exp(z * s), 0.0, float(tt)) for tt in np.ravel(t)]).reshape(np.shape(t))
    return -1j * epsilon * V * I, spec.shift


def _quad_complex(f, a, b):
    re = quad(lambda s: f(s).real, a, b, epsabs=1e-10, epsrel=1e-10, limit=500)[0]
    im = quad(lambda s: f(s).imag, a, b, epsabs=1e-10, epsrel=1e-10, limit=500)[0]
    return re + 1j * im


def first_order_occupation(H0, h1, m: int, t, epsilon: float, omega: float, amplitude: float = 2.0) -> np.ndarray:
    """``n_m^per(t) = |c_m(t)|^2 e^{-2 gamma_m t}`` (stationary state normalised to 1)."""
    c, _ = first_order_amplitude(H0, h1, m, t, epsilon, omega, amplitude=amplitude)
    gm = -shifted_spectrum(H0).eigenvalues[m].imag
    return np.abs(c) ** 2 * np.exp(-2 * gm * np.asarray(t))


def inverse_alpha_average(omega: float, omega0: float, omega1: float, gamma1: float) -> float:
    """Closed-form ``1 / <alpha(omega, t)>_T`` over one drive period in the long-time limit."""
    d2 = (omega0 - omega1) ** 2
    s = gamma1**2 + omega**2 + d2
    return s / (2 * (d2 + gamma1**2)) - 2 * omega**2 * d2 / (s * (d2 + gamma1**2))


def alpha_average(omega: float, eps0: complex, eps1: complex) -> float:
    return 1.0 / inverse_alpha_average(omega, eps0.real, eps1.real, -eps1.imag)


def averaged_response(H0, h1, epsilon: float, m: int = 1) -> float:
    """``<n_m>_T / <alpha>_T = eps^2 (<m|m>/<0|0>) |<m|H1|0>_LR|^2 / |(w_m - i g_m) - w_0|^2``."""
    sys = shifted_spectrum(H0).system
    R0, Rm = sys.R(0), sys.R(m)
    ratio = np.vdot(Rm, Rm).real / np.vdot(R0, R0).real
    V = transition_element(sys, h1, m, 0)
    den = abs(sys.eigenvalues[m] - sys.eigenvalues[0].real) ** 2
    return float(epsilon**2 * ratio * abs(V) ** 2 / den)


def window_average(f: Callable, t_a: float, period: float, samples: int = 4096) -> float:
    """Mean of ``f`` over ``[t_a, t_a + period)`` by the (periodic) rectangle rule."""
    ts = t_a + period * np.arange(samples) / samples
    return float(np.mean(f(ts)))


# --------------------------------------------------------------------------
# metric extraction

@dataclass(frozen=True)
class ExtractionResult:
    value: float  # g^RR estimate (diagonal or off-diagonal)
    petermann: float
    alpha: float
    occupations: tuple  # window-averaged occupations used
    shift: float
    window: tuple


def _window_plan(drive: DriveProtocol, H0s, h1s, per_period: int):
    scale = np.max(np.linalg.norm(H0s, ord=2, axis=(-2, -1)) + drive.epsilon * np.linalg.norm(h1s, ord=2, axis=(-2, -1)))
    n = max(per_period, int(np.ceil(drive.period * scale / CFL_LIMIT)))
    dt = drive.period / n
    start = int(np.ceil(drive.t_a / dt - 1e-9))
    return dt, start, n


def windowed_occupations(H0s, h1s, drive: DriveProtocol, per_period: int = 400, normalise: bool = True) -> np.ndarray:
    """Window-averaged excited occupation for a batch of 2x2 problems.

    Each problem starts in its RR-normalised stationary state.  The window
    starts at the first grid time ``>= t_a`` and covers one drive period.
    With ``normalise=True`` the average is of ``n_1(t) / n_0(t)``, which
    removes the slow second-order change of the stationary amplitude.
    """
    H0s = np.asarray(H0s, dtype=complex)
    h1s = np.asarray(h1s, dtype=complex)
    batch = H0s.shape[:-2]
    flatH = H0s.reshape(-1, 2, 2)
    flat1 = h1s.reshape(-1, 2, 2)
    systems = [decompose(h) for h in flatH]
    psi0 = np.array([s.R(0) / np.linalg.norm(s.R(0)) for s in systems])
    dt, start, n = _window_plan(drive, flatH, flat1, per_period)
    traj = evolve_driven(flatH, flat1, drive.envelope, drive.epsilon, psi0, dt, (start + n) * dt)
    win = traj.states[start : start + n]  # (n, B, 2)
    out = np.empty(len(systems))
    for b, s in enumerate(systems):
        n1 = occupation(s, win[:, b], 1)
        if normalise:
            n1 = n1 / occupation(s, win[:, b], 0)
        out[b] = np.mean(n1)
    return out.reshape(batch)


def _check_two_level(H: ParamHamiltonian):
    if H.matrix_dim != 2:
        raise NotTwoLevel("metric extraction works for two-band Hamiltonians only")


def _stationary_shift(H0, tol: float, allow_shift: bool):
    sys = decompose(H0)
    if not sys.stationary().is_unique:
        raise NotSingleStationary("no unique stationary state")
    g0 = -float(sys.eigenvalues[0].imag)
    if abs(g0) > tol * max(1.0, np.abs(sys.eigenvalues).max()):
        if not allow_shift:
            raise StationaryDecays(f"stationary band decays with gamma_0 = {g0:.3e}")
        return sys, g0
    return sys, 0.0


def extract_metric_batch(
    H: ParamHamiltonian,
    points: Sequence,
    indices: tuple,
    epsilon: float = 0.02,
    omega: float = 2.2,
    t_a: float = DEFAULT_T_A,
    per_period: int = 400,
    normalise: bool = True,
    allow_shift: bool = False,
    tol: float = 1e-9,
) -> list[ExtractionResult]:
    """Extract ``g^RR_ii`` (``indices=(i,)``) or ``g^RR_ij`` (``indices=(i, j)``) at many points.

    Diagonal: ``<n_1>_T / (<alpha>_T eps^2 K_0)``.  Off-diagonal: the in-phase
    and anti-phase protocols are both run and
    ``(<n_1^+>_T - <n_1^->_T) / (4 eps^2 K_0 <alpha>_T)`` is returned.

    Raises
    ------
    NotTwoLevel, NotSingleStationary, StationaryDecays
    """
    _check_two_level(H)
    protocols = [(indices[0],)] if len(indices) == 1 else [(indices[0], indices[1], 1), (indices[0], indices[1], -1)]
    H0s, shifts, h1s, Ks, alphas = [], [], [], [], []
    for lam in points:
        H0 = H(lam)
        sys, g0 = _stationary_shift(H0, tol, allow_shift)
        H0 = H0 + 1j * g0 * np.eye(2)
        eps = sys.eigenvalues + 1j * g0
        grads = parameter_gradient(H, lam)
        H0s.append(H0)
        shifts.append(g0)
        h1s.append([grads[p[0]] if len(p) == 1 else grads[p[0]] + p[2] * grads[p[1]] for p in protocols])
        Ks.append(petermann_two_level(sys))
        alphas.append(alpha_average(omega, eps[0], eps[1]))
    H0s = np.array(H0s)
    h1s = np.array(h1s)  # (P, n_protocols, 2, 2)
    drive = DriveProtocol(epsilon, omega, h1=np.zeros((2, 2)), t_a=t_a)
    occ = windowed_occupations(np.repeat(H0s[:, None], len(protocols), axis=1), h1s, drive, per_period, normalise)
    out = []
    for p in range(len(H0s)):
        denom = alphas[p] * epsilon**2 * Ks[p]
        if len(protocols) == 1:
            val = occ[p, 0] / denom
        else:
            val = (occ[p, 0] - occ[p, 1]) / (4 * denom)
        out.append(ExtractionResult(float(val), float(Ks[p]), float(alphas[p]), tuple(occ[p]), shifts[p], drive.window))
    return out


def extract_metric(H: ParamHamiltonian, lam, indices: tuple, **kw) -> ExtractionResult:
    """Single-point version of :func:`extract_metric_batch`."""
    return extract_metric_batch(H, [lam], indices, **kw)[0]


@dataclass
class SweepRow:
    x: float
    y: float
    measured: tuple  # g_xx, g_yy, g_xy
    exact: tuple
    petermann: float


def metric_sweep(H: ParamHamiltonian, xs, ys, exact: Callable, **kw) -> list[SweepRow]:
    """Extract all three RR metric components on the grid ``xs x ys``.

    ``exact(lam)`` returns the reference 2x2 metric for each point.
    """
    pts = [(float(x), float(y)) for y in ys for x in xs]
    gxx = extract_metric_batch(H, pts, (0,), **kw)
    gyy = extract_metric_batch(H, pts, (1,), **kw)
    gxy = extract_metric_batch(H, pts, (0, 1), **kw)
    rows = []
    for i, (x, y) in enumerate(pts):
        g = np.asarray(exact((x, y)))
        rows.append(
            SweepRow(x, y, (gxx[i].value, gyy[i].value, gxy[i].value), (g[0, 0].real, g[1, 1].real, g[0, 1].real), gxx[i].petermann)
        )
    return rows


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> int:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "g_xx_meas", "g_yy_meas", "g_xy_meas", "g_xx_exact", "g_yy_exact", "g_xy_exact", "K0"])
        for r in rows:
            wr.writerow([f"{r.x:.6f}", f"{r.y:.6f}"] + [f"{v:.10e}" for v in (*r.measured, *r.exact, r.petermann)])
    return len(rows)


def write_occupation_csv(path, times, n_num, n_per) -> int:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "n1_num", "n1_per", "delta"])
        for t, a, b in zip(times, n_num, n_per):
            wr.writerow([f"{t:.6f}", f"{a:.12e}", f"{b:.12e}", f"{a - b:.12e}"])
    return len(times)


# --------------------------------------------------------------------------
# several stationary states

def sinc_kernel(x, t: float) -> np.ndarray:
    """Finite-time delta function ``(2/(pi t)) sin^2(x t/2) / x^2`` (width ~ ``2 pi / t``)."""
    x = np.asarray(x, dtype=float)
    safe = np.where(np.abs(x) < 1e-12, 1.0, x)
    val = 2.0 / (np.pi * t) * np.sin(safe * t / 2) ** 2 / safe**2
    return np.where(np.abs(x) < 1e-12, t / (2 * np.pi), val)


@dataclass(frozen=True)
class RateResult:
    target: int
    stationary: bool
    rate_prefactor: float  # (pi eps^2 / 2) (<m|m>/<i|i>) |<m|H1|i>_LR|^2
    detuning: float  # omega - |omega_m - omega_i|
    kernel: float  # sinc-kernel value at the detuning
    predicted_rate: float  # prefactor * kernel (finite-time n_m / t)
    kernel_width: float


def multi_stationary_rates(H0, h1, omega: float, initial: int, epsilon: float, t: float, tol: float = 1e-9) -> list[RateResult]:
    """First-order transition data out of stationary state ``initial`` under ``eps cos(omega t) H1``.

    For stationary targets the finite-time occupation per unit time is
    ``n_m(t)/t ~ Gamma_m delta_t(omega - |omega_m - omega_i|)`` with the
    sinc-squared kernel; ``rate_prefactor`` is ``Gamma_m``.  Decaying
    targets are reported with ``stationary=False`` (their occupation
    saturates instead of growing).

    Raises
    ------
    DegenerateSpectrum
        If two eigenvalues coincide.
    """
    sys = decompose(np.asarray(H0, dtype=complex))
    w = sys.eigenvalues
    scale = max(1.0, np.abs(w).max())
    for a in range(len(w)):
        for b in range(a + 1, len(w)):
            if abs(w[a] - w[b]) < tol * scale:
                raise DegenerateSpectrum(f"eigenvalues {a} and {b} coincide")
    top = w.imag.max()
    Ri = sys.R(initial)
    out = []
    width = 2 * np.pi / t
    for m in range(sys.dim):
        if m == initial:
            continue
        Rm = sys.R(m)
        ratio = np.vdot(Rm, Rm).real / np.vdot(Ri, Ri).real
        V = transition_element(sys, h1, m, initial)
        pref = np.pi * epsilon**2 / 2 * ratio * abs(V) ** 2
        det = omega - abs(w[m].real - w[initial].real)
        ker = float(sinc_kernel(det, t))
        out.append(RateResult(m, bool(abs(w[m].imag - top) <= tol * scale), float(pref), float(det), ker, float(pref * ker), width))
    return out
