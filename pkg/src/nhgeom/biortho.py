"""Bi-orthogonal eigen-decomposition of non-Hermitian matrices.

Right eigenvectors are stored as the columns of ``right`` and left
eigenvectors as the rows of ``left`` (covectors, so that ``left @ H`` is an
eigen-equation).  Nothing downstream assumes a particular normalisation of
either set; every exported quantity is built from ratios that cancel it.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Literal

import numpy as np
from scipy.linalg import eig
from scipy.optimize import linear_sum_assignment

from .errors import AmbiguousMatch, BandCrossing, NearDefective, NonFinite, SelfOrthogonal

Side = Literal["L", "R"]

DEFECTIVE_THRESHOLD = 1e8
SELF_ORTHOGONAL_TOL = 1e-12


@dataclass(frozen=True)
class StationaryLabel:
    indices: tuple[int, ...]
    degeneracy: int
    is_unique: bool


@dataclass(frozen=True)
class BiorthogonalSystem:
    """Paired left/right eigensystem of one complex square matrix.

    Attributes
    ----------
    eigenvalues : (n,) complex array, ``eps_n = omega_n - i gamma_n``.
    right : (n, n) complex array, column ``n`` is ``R_n``.
    left : (n, n) complex array, row ``n`` is ``L_n``.
    condition : 2-norm condition number of the unit-column right matrix.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    condition: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def R(self, n: int) -> np.ndarray:
        return self.right[:, n]

    def L(self, n: int) -> np.ndarray:
        return self.left[n, :]

    def stationary(self, tol: float = 1e-9) -> StationaryLabel:
        im = self.eigenvalues.imag
        top = im.max()
        scale = max(1.0, np.abs(self.eigenvalues).max())
        idx = tuple(int(i) for i in np.flatnonzero(im >= top - tol * scale))
        return StationaryLabel(idx, len(idx), len(idx) == 1)

    def rescaled(self, right_factors, left_factors=None) -> "BiorthogonalSystem":
        """Return a copy with ``R_n -> r_n R_n`` and ``L_n -> l_n L_n``.

        With ``left_factors`` omitted the left vectors take ``1/r_n`` so that
        the pairing ``L_n R_n`` is preserved.
        """
        r = np.asarray(right_factors, dtype=complex)
        l = 1.0 / r if left_factors is None else np.asarray(left_factors, dtype=complex)
        return BiorthogonalSystem(
            self.eigenvalues.copy(), self.right * r[None, :], self.left * l[:, None], self.condition
        )

    def permuted(self, perm) -> "BiorthogonalSystem":
        perm = np.asarray(perm)
        return BiorthogonalSystem(
            self.eigenvalues[perm], self.right[:, perm], self.left[perm, :], self.condition
        )


def _check_matrix(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise NonFinite("matrix has non-finite entries")
    return H


def _spectral_order(w: np.ndarray) -> np.ndarray:
    """Descending imaginary part, ties (to round-off) broken by ascending real part."""
    scale = max(1.0, float(np.abs(w).max()))
    tol = 1e-10 * scale
    order = np.argsort(-w.imag, kind="stable")
    out: list[int] = []
    start = 0
    for i in range(1, len(order) + 1):
        if i == len(order) or w.imag[order[i - 1]] - w.imag[order[i]] > tol:
            block = order[start:i]
            out.extend(block[np.argsort(w.real[block], kind="stable")])
            start = i
    return np.asarray(out, dtype=int)


def decompose(H, threshold: float = DEFECTIVE_THRESHOLD) -> BiorthogonalSystem:
    """Bi-orthogonal eigen-decomposition of ``H``.

    Right vectors come from ``eig(H)`` and are unit-normalised.  Left vectors
    are eigenvectors of ``H^dagger``, paired to the right ones through the
    conjugated spectrum and finally rescaled so that ``L @ R = 1``.

    Raises
    ------
    NonFinite
        If ``H`` has inf/nan entries.
    NearDefective
        If the eigenvector condition number exceeds ``threshold``.
    """
    H = _check_matrix(H)
    w, vr = eig(H)
    if not np.all(np.isfinite(w)):
        raise NonFinite("eigenvalue computation produced non-finite values")
    vr = vr / np.linalg.norm(vr, axis=0)[None, :]
    cond = float(np.linalg.cond(vr))
    if not np.isfinite(cond) or cond > threshold:
        raise NearDefective(f"eigenvector condition number {cond:.3e} exceeds {threshold:.1e}")

    wa, vl = eig(H.conj().T)
    cost = np.abs(w[:, None] - wa.conj()[None, :])
    _, cols = linear_sum_assignment(cost)
    left = vl[:, cols].conj().T
    # Bi-orthonormalise; inside (near-)degenerate clusters this also fixes the pairing.
    overlap = left @ vr
    left = np.linalg.solve(overlap, left)

    order = _spectral_order(w)
    return BiorthogonalSystem(w[order], vr[:, order], left[order, :], cond)


def _ket(sys: BiorthogonalSystem, n: int, side: Side) -> np.ndarray:
    return sys.R(n) if side == "R" else sys.L(n).conj()


def _bra(sys: BiorthogonalSystem, n: int, side: Side) -> np.ndarray:
    return sys.R(n).conj() if side == "R" else sys.L(n)


def inner(sys: BiorthogonalSystem, n: int, alpha: Side, beta: Side, m: int | None = None) -> complex:
    """``<psi_n|psi_m>_{alpha beta}`` (bra from side alpha, ket from side beta)."""
    m = n if m is None else m
    return complex(_bra(sys, n, alpha) @ _ket(sys, m, beta))


def projector(sys: BiorthogonalSystem, n: int, alpha: Side = "L", beta: Side = "R") -> np.ndarray:
    """Bi-orthogonal projector ``|psi_n>_beta <psi_n|_alpha / <psi_n|psi_n>_{alpha beta}``.

    ``alpha='L', beta='R'`` is the usual spectral projector ``R_n L_n / (L_n R_n)``.
    """
    ket = _ket(sys, n, beta)
    bra = _bra(sys, n, alpha)
    den = bra @ ket
    if abs(den) <= SELF_ORTHOGONAL_TOL * np.linalg.norm(bra) * np.linalg.norm(ket):
        raise SelfOrthogonal(f"band {n}: <psi|psi>_{alpha}{beta} vanishes")
    return np.outer(ket, bra) / den


def gramian(sys: BiorthogonalSystem) -> np.ndarray:
    """Gramian ``I_nm = <psi_n|psi_m>_RR`` of the stored right vectors."""
    return sys.right.conj().T @ sys.right


def petermann(sys: BiorthogonalSystem, n: int) -> float:
    r = sys.R(n)
    l = sys.L(n)
    lr = l @ r
    nr = np.linalg.norm(r)
    nl = np.linalg.norm(l)
    if abs(lr) <= SELF_ORTHOGONAL_TOL * nr * nl:
        raise SelfOrthogonal(f"band {n}: L.R vanishes")
    return float((nr * nl) ** 2 / abs(lr) ** 2)


def petermann_two_level(sys: BiorthogonalSystem, n: int = 0) -> float:
    """Two-band form ``I_00 I_11 / det I`` (identical for either band)."""
    if sys.dim != 2:
        raise ValueError("two-level formula needs a 2x2 system")
    I = gramian(sys)
    return float((I[0, 0].real * I[1, 1].real) / np.linalg.det(I).real)


def band_overlaps(sysA: BiorthogonalSystem, sysB: BiorthogonalSystem) -> np.ndarray:
    """``|Tr(P_A,n P_B,m)|`` for spectral projectors, as an (n, m) array."""
    LA, RA, LB, RB = sysA.left, sysA.right, sysB.left, sysB.right
    cross1 = LA @ RB  # L_A,n R_B,m
    cross2 = LB @ RA  # L_B,m R_A,n
    normA = np.einsum("ij,ji->i", LA, RA)
    normB = np.einsum("ij,ji->i", LB, RB)
    return np.abs(cross1 * cross2.T) / np.abs(normA[:, None] * normB[None, :])


def match_bands(sysA: BiorthogonalSystem, sysB: BiorthogonalSystem, tie_tol: float = 1e-6) -> np.ndarray:
    """Permutation ``perm`` with band ``n`` of A matched to band ``perm[n]`` of B."""
    if sysA.dim != sysB.dim:
        raise ValueError("systems have different dimensions")
    O = band_overlaps(sysA, sysB)
    rows, cols = linear_sum_assignment(-O)
    perm = cols[np.argsort(rows)]
    for i, j in combinations(range(len(perm)), 2):
        delta = O[i, perm[i]] + O[j, perm[j]] - O[i, perm[j]] - O[j, perm[i]]
        if delta < tie_tol:
            raise AmbiguousMatch(f"bands {i} and {j} cannot be told apart (margin {delta:.2e})")
    return perm


def track_band(ref: BiorthogonalSystem, sys: BiorthogonalSystem, n: int, tie_tol: float = 1e-6) -> int:
    """Index in ``sys`` of the band continuing band ``n`` of ``ref``."""
    O = band_overlaps(ref, sys)[n]
    order = np.argsort(-O)
    if len(order) > 1 and O[order[0]] - O[order[1]] < tie_tol:
        raise BandCrossing(f"band {n} overlaps two bands equally ({O[order[0]]:.3e})")
    return int(order[0])
