"""Non-Hermitian quantum geometric tensors of parameter-dependent matrices.

The tensor ``chi^{ab}_{ij} = Tr[P dP_i dP_j]`` is evaluated from the
gauge-invariant projector ``P^{ba}_n`` (flavour ``(a, b)`` selects the bra and
ket sides).  Only the Berry connection needs a gauge; we use the *pivot
gauge*: the right eigenvector is divided by one of its components (the
pivot, fixed at the central point) and the left vector follows from
``L R = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .biortho import BiorthogonalSystem, Side, decompose, track_band

FLAVORS = ("LR", "RL", "RR", "LL")


@dataclass(frozen=True)
class ParamHamiltonian:
    """Map from a real parameter vector to a complex square matrix.

    ``derivative`` (optional) returns the list ``[dH/dlam_j]``.
    ``gauge_pivot`` (optional) fixes the component used by the pivot gauge;
    by default the largest component of the right eigenvector at the
    evaluation point is used.
    """

    func: Callable[[np.ndarray], np.ndarray]
    param_dim: int
    matrix_dim: int
    derivative: Callable[[np.ndarray], Sequence[np.ndarray]] | None = None
    gauge_pivot: int | None = None
    name: str = ""

    def __call__(self, lam) -> np.ndarray:
        M = np.asarray(self.func(np.atleast_1d(np.asarray(lam, dtype=float))), dtype=complex)
        if M.shape != (self.matrix_dim, self.matrix_dim):
            raise ValueError(f"evaluator returned shape {M.shape}, expected {(self.matrix_dim,) * 2}")
        return M

    def grad(self, lam) -> list[np.ndarray]:
        if self.derivative is None:
            raise ValueError("no analytic derivative supplied")
        return [np.asarray(d, dtype=complex) for d in self.derivative(np.atleast_1d(np.asarray(lam, dtype=float)))]


@dataclass(frozen=True)
class GeometryResult:
    flavor: str
    band: int
    connection: np.ndarray
    qgt: np.ndarray
    curvature: np.ndarray
    metric: np.ndarray
    fd_step: float


def _split_flavor(flavor: str) -> tuple[Side, Side]:
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}, got {flavor!r}")
    return flavor[0], flavor[1]  # type: ignore[return-value]


def _ket_bra(R: np.ndarray, L: np.ndarray, alpha: Side, beta: Side):
    ket = R if beta == "R" else L.conj()
    bra = R.conj() if alpha == "R" else L
    return ket, bra


def _projector(R, L, alpha, beta):
    ket, bra = _ket_bra(R, L, alpha, beta)
    return np.outer(ket, bra) / (bra @ ket)


def _gauged_pair(sys: BiorthogonalSystem, n: int, pivot: int):
    R = sys.R(n)
    R = R / R[pivot]
    L = sys.L(n)
    return R, L / (L @ R)


def choose_pivot(H: ParamHamiltonian, sys: BiorthogonalSystem, n: int) -> int:
    if H.gauge_pivot is not None:
        return H.gauge_pivot
    return int(np.argmax(np.abs(sys.R(n))))


def _tracked(H: ParamHamiltonian, ref: BiorthogonalSystem, lam, n: int):
    sys = decompose(H(lam))
    return sys, track_band(ref, sys, n)


def _stencil_pairs(H, ref, lam, n, pivot, h):
    """Gauged (R, L) at lam +- h e_j for every j: list of ((R+,L+), (R-,L-))."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = []
    for j in range(H.param_dim):
        e = np.zeros_like(lam)
        e[j] = h
        sp, mp = _tracked(H, ref, lam + e, n)
        sm, mm = _tracked(H, ref, lam - e, n)
        out.append((_gauged_pair(sp, mp, pivot), _gauged_pair(sm, mm, pivot)))
    return out


def _fd_derivatives(H, lam, n, flavor, h, richardson):
    """Projector, dP_j, gauged (R, L) and their derivatives at lam."""
    alpha, beta = _split_flavor(flavor)
    ref = decompose(H(lam))
    pivot = choose_pivot(H, ref, n)
    R0, L0 = _gauged_pair(ref, n, pivot)
    P = _projector(R0, L0, alpha, beta)

    def diffs(step):
        pairs = _stencil_pairs(H, ref, lam, n, pivot, step)
        dP, dR, dL = [], [], []
        for (Rp, Lp), (Rm, Lm) in pairs:
            dP.append((_projector(Rp, Lp, alpha, beta) - _projector(Rm, Lm, alpha, beta)) / (2 * step))
            dR.append((Rp - Rm) / (2 * step))
            dL.append((Lp - Lm) / (2 * step))
        return np.array(dP), np.array(dR), np.array(dL)

    dP, dR, dL = diffs(h)
    if richardson:
        dP2, dR2, dL2 = diffs(h / 2)
        dP, dR, dL = (4 * dP2 - dP) / 3, (4 * dR2 - dR) / 3, (4 * dL2 - dL) / 3
    return ref, P, dP, R0, L0, dR, dL


def _analytic_vector_derivatives(sys: BiorthogonalSystem, dHs, n: int):
    """dR_n, dL_n in the gauge L_n dR_n = 0 = dL_n R_n, with L.R = 1 normalisation."""
    eps = sys.eigenvalues
    Rm = sys.right / np.einsum("ij,ji->i", sys.left, sys.right)[None, :]
    Lm = sys.left
    Rn, Ln = Rm[:, n], Lm[n]
    others = [m for m in range(sys.dim) if m != n]
    dR, dL = [], []
    for dH in dHs:
        r = np.zeros_like(Rn)
        l = np.zeros_like(Ln)
        for m in others:
            r = r + Rm[:, m] * (Lm[m] @ dH @ Rn) / (eps[n] - eps[m])
            l = l + (Ln @ dH @ Rm[:, m]) / (eps[n] - eps[m]) * Lm[m]
        dR.append(r)
        dL.append(l)
    return Rn, Ln, np.array(dR), np.array(dL)


def _analytic_derivatives(H, lam, n, flavor):
    alpha, beta = _split_flavor(flavor)
    sys = decompose(H(lam))
    pivot = choose_pivot(H, sys, n)
    Rn, Ln, dRs, dLs = _analytic_vector_derivatives(sys, H.grad(lam), n)
    # move to the pivot gauge: R~ = R / R_p, L~ = L R_p
    p = Rn[pivot]
    R0, L0 = Rn / p, Ln * p
    dR = np.array([dr / p - Rn * dr[pivot] / p**2 for dr in dRs])
    dL = np.array([dl * p + Ln * dr[pivot] for dl, dr in zip(dLs, dRs)])
    ket, bra = _ket_bra(R0, L0, alpha, beta)
    den = bra @ ket
    P = np.outer(ket, bra) / den
    dP = []
    for dr, dl in zip(dR, dL):
        dket, dbra = _ket_bra(dr, dl, alpha, beta)
        dden = dbra @ ket + bra @ dket
        dP.append((np.outer(dket, bra) + np.outer(ket, dbra)) / den - P * dden / den)
    return sys, P, np.array(dP), R0, L0, dR, dL


def _connection(R0, L0, dR, dL, alpha, beta):
    ket, bra = _ket_bra(R0, L0, alpha, beta)
    den = bra @ ket
    out = []
    for dr, dl in zip(dR, dL):
        dket, _ = _ket_bra(dr, dl, alpha, beta)
        out.append(1j * (bra @ dket) / den)
    return np.array(out)


def _derivatives(H, lam, n, flavor, h, richardson, method):
    if method == "fd":
        return _fd_derivatives(H, lam, n, flavor, h, richardson)
    if method == "analytic":
        return _analytic_derivatives(H, lam, n, flavor)
    raise ValueError(f"method must be 'fd' or 'analytic', got {method!r}")


def qgt_tensor(
    H: ParamHamiltonian,
    lam,
    n: int = 0,
    flavor: str = "LR",
    h: float = 1e-4,
    *,
    richardson: bool = False,
    method: str = "fd",
) -> GeometryResult:
    """Connection, tensor, curvature and metric of band ``n`` at ``lam``.

    Parameters
    ----------
    H : ParamHamiltonian
    lam : array_like
        Parameter point.
    n : int
        Band index in the spectral order of :func:`decompose`.
    flavor : {'LR', 'RL', 'RR', 'LL'}
        ``(alpha, beta)``; the projector used is ``P^{beta alpha}``.
    h : float
        Central-difference step.
    richardson : bool
        Combine steps ``h`` and ``h/2`` to cancel the ``O(h^2)`` error.
    method : {'fd', 'analytic'}
        ``'analytic'`` uses ``H.derivative`` and first-order perturbation theory.
    """
    alpha, beta = _split_flavor(flavor)
    _, P, dP, R0, L0, dR, dL = _derivatives(H, lam, n, flavor, h, richardson, method)
    chi = np.einsum("ab,ibc,jca->ij", P, dP, dP)
    A = _connection(R0, L0, dR, dL, alpha, beta)
    return GeometryResult(
        flavor=flavor,
        band=n,
        connection=A,
        qgt=chi,
        curvature=1j * (chi - chi.T),
        metric=0.5 * (chi + chi.T),
        fd_step=h,
    )


def berry_connection(H: ParamHamiltonian, lam, n: int = 0, flavor: str = "LR", h: float = 1e-4, **kw) -> np.ndarray:
    return qgt_tensor(H, lam, n, flavor, h, **kw).connection


def alt_tensor(H: ParamHamiltonian, lam, n: int = 0, h: float = 1e-4, **kw) -> np.ndarray:
    """Sum over other bands ``m`` of ``<d_i psi_n|psi_m>_RL <psi_m|d_j psi_n>_LR``.

    Bands are taken bi-orthonormal (``L_m R_m = 1``) and the right vectors
    are weighted by ``<m|m>_RR / <n|n>_RR``, which makes the result
    independent of how the eigenvectors are scaled.  Since ``L_m R_n = 0``
    the overlap ``L_m d_j R_n`` equals ``L_m (d_j P_n) R_n``.
    """
    method = kw.pop("method", "fd")
    sys, P, dP, R0, L0, dR, dL = _derivatives(H, lam, n, "LR", h, kw.pop("richardson", False), method)
    Rn = sys.R(n)
    nn = np.vdot(Rn, Rn).real
    chi = np.zeros((H.param_dim, H.param_dim), dtype=complex)
    for m in range(sys.dim):
        if m == n:
            continue
        Lm = sys.L(m) / (sys.L(m) @ sys.R(m))
        w = np.vdot(sys.R(m), sys.R(m)).real / nn
        d = np.array([Lm @ dPj @ Rn for dPj in dP])
        chi += w * np.outer(d.conj(), d)
    return chi
