"""Diagonalization of the y-direction operator and the spectral machinery
that turns the 2D error equation into shifted 1D problems.

The eigenproblem  Q_y phi / h^2 = -lambda phi  is solved by symmetrizing
with P^{1/2} (P diagonal positive), running a symmetric eigensolver and
mapping back, Phi = P^{-1/2} Phi_hat.  This makes the spectrum real and
non-negative by construction and gives ||Phi|| = ||P^{-1/2}|| and
||Phi^{-1}|| = ||P^{1/2}|| exactly.
"""

from dataclasses import dataclass, field

import math
import numpy as np

from .sat_semidisc import SemiDiscretization1D, DIRICHLET, NEUMANN


class AssumptionViolation(RuntimeError):
    """The operator/norm pair fails the symmetric-negative-semidefinite
    prerequisite; diagonalization refuses to proceed."""


@dataclass
class Spectrum:
    """Eigen-decomposition Q_y/h^2 = -Phi Lambda Phi^{-1}, ascending."""

    lam: np.ndarray
    Phi: np.ndarray = field(repr=False)
    Phi_inv: np.ndarray = field(repr=False)
    cond: float
    residual: float
    norm_phi: float
    norm_phi_inv: float

    @property
    def n(self) -> int:
        return len(self.lam)


@dataclass(frozen=True)
class ShiftedDual:
    """Dual variable shifted by one transverse eigenvalue,
    s_plus = sqrt(s^2 + h^2 lambda), branch with Re >= 0."""

    s: complex
    lam: float
    h: float
    s_plus: complex


def shift(s: complex, lam: float, h: float) -> ShiftedDual:
    if lam < 0:
        raise ValueError(f"transverse eigenvalue must be non-negative, got {lam}")
    val = np.sqrt(complex(s) ** 2 + h * h * lam)
    if val.real < 0:
        val = -val
    return ShiftedDual(s=complex(s), lam=lam, h=h, s_plus=complex(val))


def continuous_eigen_reference(kind: str, r: int) -> float:
    """Eigenvalues of -d2/dy2 on the unit interval, 1-based mode index."""
    if r < 1:
        raise ValueError("mode index is 1-based")
    if kind == NEUMANN:
        return ((r - 1) * math.pi) ** 2
    if kind == DIRICHLET:
        return (r * math.pi) ** 2
    raise ValueError(f"unknown boundary kind {kind!r}")


def _phase_signs(Phi: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Deterministic sign per column: first significant component > 0."""
    signs = np.ones(Phi.shape[1])
    for c in range(Phi.shape[1]):
        col = Phi[:, c]
        idx = np.nonzero(np.abs(col) > tol * np.abs(col).max())[0]
        if len(idx) and col[idx[0]] < 0:
            signs[c] = -1.0
    return signs


def diagonalize(A: np.ndarray, P: np.ndarray, h: float = 1.0) -> Spectrum:
    """Diagonalize A = Q_y/h^2 under the norm P (diagonal, positive).

    A must satisfy the stability prerequisite: P A symmetric negative
    semi-definite (checked; raises AssumptionViolation otherwise).
    """
    P = np.asarray(P, dtype=float)
    if P.ndim == 2:
        P = np.diag(P)
    if np.any(P <= 0):
        raise AssumptionViolation("norm matrix must be positive")
    PA = P[:, None] * A
    scale = max(float(np.abs(PA).max()), 1e-300)
    sym_err = float(np.abs(PA - PA.T).max())
    if sym_err > 1e-8 * scale:
        raise AssumptionViolation(f"P*A asymmetry {sym_err:.3e} exceeds 1e-8*{scale:.3e}")

    sqrtP = np.sqrt(P)
    # symmetric similar problem: Ahat = P^{1/2} A P^{-1/2}
    Ahat = 0.5 * (PA + PA.T) / np.outer(sqrtP, sqrtP)
    w, V = np.linalg.eigh(-Ahat)
    eigmax_PA = float(-w.min())
    norm2 = float(np.abs(w).max())
    if eigmax_PA > 1e-10 * max(norm2, 1e-300):
        raise AssumptionViolation(
            f"P*A has positive part {eigmax_PA:.3e}; refusing to diagonalize"
        )
    order = np.argsort(w)
    lam = w[order]
    V = V[:, order]
    Phi = V / sqrtP[:, None]
    signs = _phase_signs(Phi)
    Phi = Phi * signs
    Phi_inv = ((V * sqrtP[:, None]) * signs).T
    residual = float(np.abs(A + (Phi * lam) @ Phi_inv).max())
    norm_phi = float(1.0 / math.sqrt(P.min()))
    norm_phi_inv = float(math.sqrt(P.max()))
    return Spectrum(
        lam=lam,
        Phi=Phi,
        Phi_inv=Phi_inv,
        cond=norm_phi * norm_phi_inv,
        residual=residual,
        norm_phi=norm_phi,
        norm_phi_inv=norm_phi_inv,
    )


def diagonalize_semidisc(sd: SemiDiscretization1D) -> Spectrum:
    """Spectrum of a SAT semi-discretization under its own norm P = H/h."""
    return diagonalize(sd.homogeneous_matrix(), sd.P, sd.h)


def classic_neumann_matrix(n: int, h: float) -> np.ndarray:
    """The textbook second-order Neumann-closure matrix scaled by 1/h^2:
    tridiagonal (1, -2, 1) with first row (-1, 1) and last row (1, -1).

    It equals -M of the second-order SBP operator and satisfies the
    stability prerequisite with P = I; its eigenvalues are exactly
    (4/h^2) sin^2(pi (r-1) / (2n)).
    """
    A = np.zeros((n, n))
    for i in range(1, n - 1):
        A[i, i - 1 : i + 2] = (1.0, -2.0, 1.0)
    A[0, :2] = (-1.0, 1.0)
    A[-1, -2:] = (1.0, -1.0)
    return A / h**2


def classic_neumann_eigenvalues(n: int, h: float) -> np.ndarray:
    r = np.arange(1, n + 1)
    return 4.0 / h**2 * np.sin(math.pi * (r - 1) / (2 * n)) ** 2


def spectral_transform(T0: np.ndarray, spectrum: Spectrum, h: float) -> dict:
    """Transform boundary-line data into eigen-components tau0 = Phi^{-1} T0.

    Reports the maximal component and its h^{-1/2}-scaled value, the
    quantities used to test the uncertainty-principle bound for corner
    (single-site) data.
    """
    T0 = np.asarray(T0, dtype=float)
    if T0.shape != (spectrum.n,):
        raise ValueError(f"boundary data has shape {T0.shape}, expected ({spectrum.n},)")
    tau0 = spectrum.Phi_inv @ T0
    max_abs = float(np.abs(tau0).max())
    return {
        "tau0": tau0,
        "max_abs": max_abs,
        "max_abs_scaled": max_abs / math.sqrt(h),
        "norm": float(np.linalg.norm(tau0)),
    }


def parseval_2d(field2d: np.ndarray, spectrum: Spectrum, h: float) -> dict:
    """Bookkeeping identity between the 2D norm of the transformed field
    and the h-weighted sum of per-mode 1D norms."""
    eps = spectrum.Phi_inv @ field2d
    total_2d = h**2 * float(np.sum(np.abs(eps) ** 2))
    per_mode = h * np.sum(np.abs(eps) ** 2, axis=1)
    return {"norm2d_sq": total_2d, "sum_modes": float(h * per_mode.sum())}
