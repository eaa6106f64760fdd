"""Diagonal-norm SBP operators approximating the second derivative.

An operator of interior order 2p (p = 1, 2, 3) is the decomposition

    D = H^{-1} (-M + B S),

with H diagonal positive (the norm), M symmetric positive semi-definite,
B = diag(-1, 0, ..., 0, 1) and the first/last rows of S one-sided
approximations of the first derivative at the boundary points.  The
interior rows of D are the standard central stencil of width 2p+1; the
boundary closures are read from versioned coefficient tables shipped with
the package and re-verified at build time by ``verify_sbp_properties``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
import hashlib

import numpy as np

SUPPORTED_ORDERS = (2, 4, 6)

# boundary truncation order is p = order/2; closure widths per table
_TABLE_CACHE: dict[int, dict] = {}


class SbpConstructionError(ValueError):
    """Raised for unsupported orders, undersized grids or corrupt tables."""


@dataclass(frozen=True)
class Grid1D:
    """Equidistant grid x_i = (i-1)h, i = 1..n."""

    n: int
    h: float

    def __post_init__(self):
        if self.n < 2:
            raise SbpConstructionError(f"grid needs at least 2 points, got {self.n}")
        if not self.h > 0:
            raise SbpConstructionError(f"grid spacing must be positive, got {self.h}")

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    @classmethod
    def unit_interval(cls, n: int) -> "Grid1D":
        return cls(n=n, h=1.0 / (n - 1))


@dataclass(frozen=True)
class SbpD2Operator:
    """Second-derivative SBP operator on n points with spacing h.

    H is stored as the diagonal vector (scales with h), M densely (scales
    with 1/h), and the boundary-derivative rows s_first/s_last full-length
    (scale with 1/h).  ``d2`` is the assembled H^{-1}(-M+BS).
    """

    order: int
    n: int
    h: float
    H: np.ndarray
    M: np.ndarray
    s_first: np.ndarray
    s_last: np.ndarray
    interior_coeffs: np.ndarray
    closure_width: int
    d2: np.ndarray = field(repr=False, default=None)

    @property
    def p(self) -> int:
        return self.order // 2

    @property
    def B(self) -> np.ndarray:
        b = np.zeros(self.n)
        b[0], b[-1] = -1.0, 1.0
        return b

    def grid(self) -> Grid1D:
        return Grid1D(self.n, self.h)


def _load_table(order: int) -> dict:
    """Parse and checksum-validate the coefficient table for one order."""
    if order in _TABLE_CACHE:
        return _TABLE_CACHE[order]
    if order not in SUPPORTED_ORDERS:
        raise SbpConstructionError(
            f"unsupported order {order}; supported orders are {SUPPORTED_ORDERS}"
        )
    name = f"sbp_d2_order{order}.txt"
    text = resources.files("wavelab.coefficients").joinpath(name).read_text()
    payload_lines, checksum = [], None
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("checksum"):
            checksum = line.split()[-1]
        else:
            payload_lines.append(line)
    payload = "\n".join(payload_lines)
    digest = hashlib.sha256(payload.encode()).hexdigest()
    if checksum != digest:
        raise SbpConstructionError(f"coefficient table {name} failed checksum validation")

    table: dict = {"m_rows": {}}
    for line in payload_lines:
        key, *rest = line.split()
        if key == "m_row":
            table["m_rows"][int(rest[0])] = [Fraction(x) for x in rest[1:]]
        elif key in ("order", "boundary_rows", "block_cols", "format"):
            table[key] = int(rest[0])
        else:
            table[key] = [Fraction(x) for x in rest]
    if table["order"] != order:
        raise SbpConstructionError(f"table {name} declares order {table['order']}")
    _TABLE_CACHE[order] = table
    return table


def minimum_points(order: int) -> int:
    """Smallest n for which left and right closures do not overlap."""
    table = _load_table(order)
    return 2 * table["boundary_rows"] + 1


def build_sbp_d2(order: int, n: int, h: float) -> SbpD2Operator:
    """Construct the diagonal-norm SBP operator D ~ d2/dx2 of interior
    order ``order`` on n points with spacing h.

    Raises SbpConstructionError for unsupported orders or when n is below
    the minimum admissible size (closures would overlap).
    """
    table = _load_table(order)
    n_min = 2 * table["boundary_rows"] + 1
    if n < n_min:
        raise SbpConstructionError(
            f"n={n} too small for order {order}; minimum admissible n is {n_min}"
        )
    if not h > 0:
        raise SbpConstructionError(f"spacing must be positive, got {h}")

    J = table["boundary_rows"]
    W = table["block_cols"]
    a = np.array([float(x) for x in table["interior"]])
    l = (len(a) - 1) // 2
    hb = [float(x) for x in table["h_diag"]]
    s = [float(x) for x in table["s_row"]]

    Hdiag = np.ones(n)
    Hdiag[:J] = hb
    Hdiag[-J:] = hb[::-1]
    Hdiag *= h

    M = np.zeros((n, n))
    for i in range(J, n - J):
        M[i, i - l : i + l + 1] = -a
    block = np.array([[float(table["m_rows"][i][c]) for c in range(W)] for i in range(J)])
    M[:J, :W] = block
    M[n - J :, n - W :] = block[::-1, ::-1]
    M /= h

    s_first = np.zeros(n)
    s_first[: len(s)] = s
    s_last = np.zeros(n)
    s_last[-len(s) :] = [-x for x in s[::-1]]
    s_first /= h
    s_last /= h

    BS = np.zeros((n, n))
    BS[0] = -s_first
    BS[-1] = s_last
    d2 = (-M + BS) / Hdiag[:, None]

    return SbpD2Operator(
        order=order,
        n=n,
        h=h,
        H=Hdiag,
        M=M,
        s_first=s_first,
        s_last=s_last,
        interior_coeffs=a,
        closure_width=J,
        d2=d2,
    )


def apply_d2(op: SbpD2Operator, v: np.ndarray) -> np.ndarray:
    """Apply D to a grid function. Deterministic dense product."""
    v = np.asarray(v, dtype=float)
    if v.shape != (op.n,):
        raise ValueError(f"grid function has shape {v.shape}, expected ({op.n},)")
    return op.d2 @ v


@dataclass
class SbpPropertyReport:
    """Outcome of the SBP verification suite; carries failures, never raises."""

    order: int
    n: int
    h_positive: bool
    h_min: float
    m_symmetry_error: float
    m_norm_max: float
    m_eigmin: float
    m_norm2: float
    b_pattern_ok: bool
    exactness: dict  # degree -> (interior max scaled residual, boundary max scaled residual)
    s_exactness: dict  # degree -> |s_first x^k - k x^(k-1)| at x=0
    passed: bool


def verify_sbp_properties(
    op: SbpD2Operator,
    sym_rtol: float = 1e-12,
    eig_rtol: float = 1e-10,
    exact_tol: float = 1e-8,
) -> SbpPropertyReport:
    """Check the SBP decomposition invariants and polynomial exactness.

    Exactness residuals are scaled by max(1, max|d2 x^k / dx2|) over the
    grid; interior rows must be exact through degree 2p+1 and boundary
    rows through degree p+1.
    """
    x = op.grid().points
    J = op.closure_width
    p = op.p

    h_positive = bool(np.all(op.H > 0))
    sym_err = float(np.abs(op.M - op.M.T).max())
    m_norm_max = float(np.abs(op.M).max())
    Msym = 0.5 * (op.M + op.M.T)
    eigs = np.linalg.eigvalsh(Msym)
    m_eigmin = float(eigs[0])
    m_norm2 = float(np.abs(eigs).max())

    # reconstruction: d2 must equal H^{-1}(-M+BS) with B = diag(-1,0,...,0,1)
    BS = np.zeros((op.n, op.n))
    BS[0] = -op.s_first
    BS[-1] = op.s_last
    recon = (-op.M + BS) / op.H[:, None]
    b_pattern_ok = bool(np.abs(recon - op.d2).max() <= 1e-12 * max(np.abs(op.d2).max(), 1.0))

    exactness = {}
    ok_exact = True
    for k in range(0, 2 * p + 2):
        exact = k * (k - 1) * x ** (k - 2) if k >= 2 else np.zeros_like(x)
        resid = np.abs(apply_d2(op, x**k) - exact)
        scale = max(1.0, float(np.abs(exact).max()))
        interior = float(resid[J : op.n - J].max() / scale)
        boundary = float(np.concatenate([resid[:J], resid[op.n - J :]]).max() / scale)
        exactness[k] = (interior, boundary)
        if interior > exact_tol:
            ok_exact = False
        if k <= p + 1 and boundary > exact_tol:
            ok_exact = False

    s_exactness = {}
    for k in range(0, p + 1):
        # first derivative of x^k at x=0 is 1 for k=1, else 0
        target = 1.0 if k == 1 else 0.0
        s_exactness[k] = float(abs(op.s_first @ x**k - target))

    passed = (
        h_positive
        and b_pattern_ok
        and sym_err <= sym_rtol * max(m_norm_max, 1e-300)
        and m_eigmin >= -eig_rtol * max(m_norm2, 1e-300)
        and ok_exact
        and all(v <= exact_tol for v in s_exactness.values())
    )
    return SbpPropertyReport(
        order=op.order,
        n=op.n,
        h_positive=h_positive,
        h_min=float(op.H.min()),
        m_symmetry_error=sym_err,
        m_norm_max=m_norm_max,
        m_eigmin=m_eigmin,
        m_norm2=m_norm2,
        b_pattern_ok=b_pattern_ok,
        exactness=exactness,
        s_exactness=s_exactness,
        passed=passed,
    )
