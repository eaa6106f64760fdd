"""Energy-stable SAT semi-discretizations of the wave equation.

One-dimensional assembly produces the dimensionless matrix Q such that

    u_tt = Q u / h^2 + (boundary-data terms) + forcing,

with weak (penalty) imposition of Dirichlet or Neumann conditions on both
ends.  The Dirichlet penalty strength iota must stay at or above the
stability threshold iota_0, computed here by bisection on the smallest
eigenvalue of sym(P Q) with P = H/h.  Two-dimensional operators combine
two one-dimensional assemblies through the Kronecker structure

    (Q_x (x) I_y) / h^2 + (I_x (x) Q_y) / h^2,

applied matrix-free on fields stored as (n_y, n_x) arrays, column j
holding the grid line x = x_j.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .sbp_core import SbpD2Operator, SbpConstructionError

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

_IOTA0_CACHE: dict[tuple, float] = {}


def _zero(*_args):
    return 0.0


@dataclass
class BoundaryConditionSpec:
    """Boundary kind plus data traces for the two ends of one direction.

    Data callables take (t) for 1D problems and (tangential coords, t) for
    2D problems.  Dirichlet data is the solution trace; Neumann data is
    the outward normal derivative.
    """

    kind: str
    g_low: Callable = _zero
    g_high: Callable = _zero

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary kind {self.kind!r}")


def _one_sided_terms(op: SbpD2Operator, kind: str, side: str, iota: Optional[float]):
    """Homogeneous SAT matrix contribution (dimensionless) and the data
    response vector (dimensional) for one boundary."""
    n, h = op.n, op.h
    e = np.zeros(n)
    Hinv = 1.0 / op.H
    Q = np.zeros((n, n))
    if side == "low":
        e[0] = 1.0
        srow = op.s_first * h  # dimensionless first-derivative row
    else:
        e[-1] = 1.0
        srow = op.s_last * h

    if kind == DIRICHLET:
        if iota is None:
            raise ValueError("Dirichlet assembly needs a penalty parameter")
        # low:  -H^{-1}(S^T + (iota/h) I) restricted to the boundary value
        # high: +H^{-1}(S^T - (iota/h) I) restricted to the boundary value
        sgn = -1.0 if side == "low" else 1.0
        vec = sgn * srow - iota * e
        Q += np.outer(vec / (op.H / h), e)
        data = -(vec * Hinv) / h
    else:
        # low:  +H^{-1} e0 (S u - g),  high: -H^{-1} eN (S u - g);
        # with outward-normal data both sides reduce to data vector +H^{-1} e
        sgn = 1.0 if side == "low" else -1.0
        Q += sgn * np.outer(e / (op.H / h), srow)
        data = e * Hinv

    return Q, data


@dataclass
class SemiDiscretization1D:
    op: SbpD2Operator
    bc: BoundaryConditionSpec
    iota: Optional[float]
    Q: np.ndarray = field(repr=False)
    data_low: np.ndarray = field(repr=False)
    data_high: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.op.h

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def P(self) -> np.ndarray:
        """Norm matrix diagonal for the stability form, P = H/h."""
        return self.op.H / self.op.h

    def homogeneous_matrix(self) -> np.ndarray:
        return self.Q / self.h**2

    def homogeneous_action(self, u: np.ndarray) -> np.ndarray:
        return self.Q @ u / self.h**2

    def action(self, u: np.ndarray, t: float) -> np.ndarray:
        if u.shape != (self.n,):
            raise ValueError(f"state has shape {u.shape}, expected ({self.n},)")
        out = self.Q @ u / self.h**2
        out += self.data_low * self.bc.g_low(t)
        out += self.data_high * self.bc.g_high(t)
        return out

    def assumption1_report(self) -> dict:
        """Symmetry and negative semi-definiteness of P Q / h^2.

        ``eigmin_neg`` is the smallest eigenvalue of -sym(PQ), which must
        stay above -1e-10 ||PQ||_2 for the stability form to be admissible.
        """
        PA = self.P[:, None] * self.homogeneous_matrix()
        sym_err = float(np.abs(PA - PA.T).max())
        eigs = np.linalg.eigvalsh(0.5 * (PA + PA.T))
        norm2 = float(np.abs(eigs).max())
        eigmin_neg = float(-eigs[-1])
        return {
            "sym_error": sym_err,
            "max_abs": float(np.abs(PA).max()),
            "eigmin_neg": eigmin_neg,
            "norm2": norm2,
            "passed": sym_err <= 1e-10 * max(np.abs(PA).max(), 1e-300)
            and eigmin_neg >= -1e-10 * norm2,
        }


def _assemble_1d(op: SbpD2Operator, bc: BoundaryConditionSpec, iota: Optional[float]):
    Q = op.d2 * op.h**2
    Qlo, dlo = _one_sided_terms(op, bc.kind, "low", iota)
    Qhi, dhi = _one_sided_terms(op, bc.kind, "high", iota)
    return SemiDiscretization1D(op=op, bc=bc, iota=iota, Q=Q + Qlo + Qhi, data_low=dlo, data_high=dhi)


def compute_iota0(op: SbpD2Operator, tol: float = 1e-6) -> float:
    """Minimal Dirichlet penalty for which sym(PQ) is negative semi-definite.

    Bisection on the eigenvalue criterion eigmin >= -1e-10 ||PQ||_2; the
    criterion is monotone in iota because increasing the penalty adds a
    negative semi-definite rank-two term.
    """
    key = (op.order, op.n)
    if key in _IOTA0_CACHE:
        return _IOTA0_CACHE[key]

    bc = BoundaryConditionSpec(DIRICHLET)

    def passes(iota: float) -> bool:
        rep = _assemble_1d(op, bc, iota).assumption1_report()
        return rep["eigmin_neg"] >= -1e-10 * rep["norm2"]

    lo, hi = 0.0, 4.0
    tries = 0
    while not passes(hi):
        lo, hi = hi, 2.0 * hi
        tries += 1
        if tries > 24:
            raise SbpConstructionError(
                f"penalty bisection found no stable bracket up to iota={hi}"
            )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    _IOTA0_CACHE[key] = hi
    return hi


def assemble_dirichlet_1d(
    op: SbpD2Operator, iota: float, bc: Optional[BoundaryConditionSpec] = None
) -> SemiDiscretization1D:
    """SAT semi-discretization with Dirichlet conditions on both ends.

    Rejects iota below the stability threshold iota_0 (up to bisection
    tolerance).
    """
    bc = bc or BoundaryConditionSpec(DIRICHLET)
    if bc.kind != DIRICHLET:
        raise ValueError("boundary spec kind must be dirichlet")
    iota0 = compute_iota0(op)
    if iota < iota0 - 1e-6:
        raise ValueError(
            f"penalty iota={iota:.6g} below stability threshold iota0={iota0:.6g}"
        )
    return _assemble_1d(op, bc, iota)


def assemble_dirichlet_1d_unchecked(
    op: SbpD2Operator, iota: float, bc: Optional[BoundaryConditionSpec] = None
) -> SemiDiscretization1D:
    """Assembly without the stability gate (negative controls, analysis)."""
    bc = bc or BoundaryConditionSpec(DIRICHLET)
    return _assemble_1d(op, bc, iota)


def assemble_neumann_1d(
    op: SbpD2Operator, bc: Optional[BoundaryConditionSpec] = None
) -> SemiDiscretization1D:
    """SAT semi-discretization with Neumann conditions on both ends."""
    bc = bc or BoundaryConditionSpec(NEUMANN)
    if bc.kind != NEUMANN:
        raise ValueError("boundary spec kind must be neumann")
    return _assemble_1d(op, bc, None)


@dataclass
class SemiDiscretization2D:
    """Matrix-free 2D wave operator on the unit square.

    Fields are (n_y, n_x) arrays; the equivalent column-stacked vector has
    the n_y values on the line x = 0 first.
    """

    sdx: SemiDiscretization1D
    sdy: SemiDiscretization1D

    def __post_init__(self):
        if abs(self.sdx.h - self.sdy.h) > 1e-14 * self.sdx.h:
            raise ValueError("2D assembly requires the same spacing in both directions")
        self._actor = _make_actor(self.sdy.Q, self.sdx.Q)

    @property
    def h(self) -> float:
        return self.sdx.h

    @property
    def shape(self) -> tuple:
        return (self.sdy.n, self.sdx.n)

    def homogeneous_action(self, X: np.ndarray) -> np.ndarray:
        """(Q_x (x) I_y + I_x (x) Q_y) X / h^2 without data terms."""
        if X.shape != self.shape:
            raise ValueError(f"field has shape {X.shape}, expected {self.shape}")
        return self._actor(X) / self.h**2

    def action(self, X: np.ndarray, t: float) -> np.ndarray:
        out = self.homogeneous_action(X)
        ny, nx = self.shape
        x = self.sdx.op.grid().points
        y = self.sdy.op.grid().points
        # x-direction boundaries carry data along lines of constant x
        out += np.outer(np.asarray(self.sdx.bc.g_low(y, t)), self.sdx.data_low)
        out += np.outer(np.asarray(self.sdx.bc.g_high(y, t)), self.sdx.data_high)
        # y-direction boundaries
        out += np.outer(self.sdy.data_low, np.asarray(self.sdy.bc.g_low(x, t)))
        out += np.outer(self.sdy.data_high, np.asarray(self.sdy.bc.g_high(x, t)))
        return out

    def dense_matrix(self) -> np.ndarray:
        """Explicit Kronecker assembly of the homogeneous operator (small
        grids only; test oracle)."""
        ny, nx = self.shape
        Ax = self.sdx.Q / self.h**2
        Ay = self.sdy.Q / self.h**2
        return np.kron(Ax, np.eye(ny)) + np.kron(np.eye(nx), Ay)


def assemble_2d(
    opx: SbpD2Operator,
    opy: SbpD2Operator,
    bcx: BoundaryConditionSpec,
    bcy: BoundaryConditionSpec,
    iota: Optional[float] = None,
) -> SemiDiscretization2D:
    """Two one-dimensional SAT assemblies joined by the Kronecker lift."""

    def one(op, bc):
        if bc.kind == DIRICHLET:
            return assemble_dirichlet_1d(op, iota, bc)
        return assemble_neumann_1d(op, bc)

    return SemiDiscretization2D(sdx=one(opx, bcx), sdy=one(opy, bcy))


# -- fast matrix-free application ------------------------------------------

def _banded_split(Q: np.ndarray, rtol: float = 1e-12):
    """Split Q into interior stencil + corner blocks; returns None when the
    matrix does not have the banded-plus-border structure.  Entries below
    rtol * max|Q| count as structural zeros (SAT assembly can leave
    last-ulp dust in cancelled positions)."""
    n = Q.shape[0]
    tol = rtol * max(float(np.abs(Q).max()), 1e-300)
    mid = n // 2
    row = Q[mid]
    nz = np.nonzero(np.abs(row) > tol)[0]
    if len(nz) == 0 or nz.min() < 1 or nz.max() > n - 2:
        return None
    l = max(mid - nz.min(), nz.max() - mid)
    c = row[mid - l : mid + l + 1].copy()

    def is_interior(i):
        return (
            np.abs(Q[i, i - l : i + l + 1] - c).max() <= tol
            and np.abs(Q[i, : i - l]).max(initial=0.0) <= tol
            and np.abs(Q[i, i + l + 1 :]).max(initial=0.0) <= tol
        )

    J = next((i for i in range(l, n - l) if is_interior(i)), None)
    if J is None or J < 1:
        return None
    if not all(is_interior(i) for i in range(J, n - J)):
        return None
    W = J + l
    if np.abs(Q[:J, W:]).max(initial=0.0) > tol:
        return None
    if np.abs(Q[n - J :, : n - W]).max(initial=0.0) > tol:
        return None
    Bl = Q[:J, :W].copy()
    Br = Q[n - J :, n - W :][::-1, ::-1].copy()  # reflected, rows from the end
    Bl[np.abs(Bl) <= tol] = 0.0
    Br[np.abs(Br) <= tol] = 0.0
    return c, Bl, Br


try:
    from . import _kernels

    _HAVE_KERNELS = True
except Exception:  # pragma: no cover - numba missing or broken
    _HAVE_KERNELS = False


def _make_actor(Qy: np.ndarray, Qx: np.ndarray) -> Callable:
    """Return X -> Qy X + X Qx^T, using the fused banded kernel when both
    operators expose the banded-plus-border structure."""
    sy = _banded_split(Qy)
    sx = _banded_split(Qx)
    if _HAVE_KERNELS and sy is not None and sx is not None:
        cy, Bly, Bry = sy
        cx, Blx, Brx = sx

        def actor(X):
            out = np.empty_like(X)
            _kernels.stencil_action(X, cy, Bly, Bry, cx, Blx, Brx, out)
            return out

        return actor

    import scipy.sparse as sp

    Qys = sp.csr_matrix(Qy)
    QxTs = sp.csr_matrix(Qx.T)

    def actor(X):
        return Qys @ X + X @ QxTs

    return actor
