"""Numerical normal-mode accuracy analyzer for the half-line problem.

The Laplace-transformed error equation of a stable semi-discretization is
closed near the boundary by a small linear system C(s) Sigma = h^{p+2} T_C
(the boundary system): away from the closure the general decaying solution
is a combination of the l admissible characteristic roots kappa_m(s) with
|kappa| < 1 for Re(s) > 0, and the closure rows couple d boundary values
with the l mode coefficients sigma.  The behavior of C near s = 0 (the
integer w below) determines how much of the optimal convergence gain
survives; singularities on the imaginary axis away from the origin only
add temporal derivatives (exponents alpha, beta).
"""

from dataclasses import dataclass, field
from typing import Optional

import math
import numpy as np

from .sbp_core import build_sbp_d2
from .sat_semidisc import (
    _assemble_1d,
    _banded_split,
    compute_iota0,
    BoundaryConditionSpec,
    DIRICHLET,
    NEUMANN,
)


class BoundarySystemError(RuntimeError):
    """Root classification or closure extraction failed."""


# -- characteristic equation -------------------------------------------------

@dataclass(frozen=True)
class CharacteristicProblem:
    """Interior-stencil characteristic equation sum_j a_j k^j = s^2 k^l."""

    coeffs: np.ndarray  # a_0..a_{2l}, symmetric, summing to zero

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if len(a) % 2 != 1:
            raise ValueError("central stencil needs an odd number of coefficients")
        if not np.allclose(a, a[::-1], rtol=0, atol=1e-14 * np.abs(a).max()):
            raise ValueError("central stencil must be symmetric")
        if abs(a.sum()) > 1e-12 * np.abs(a).max():
            raise ValueError("central stencil must be consistent (zero sum)")

    @property
    def l(self) -> int:
        return (len(self.coeffs) - 1) // 2


@dataclass
class RootSet:
    s: complex
    roots: np.ndarray  # all 2l roots
    admissible: np.ndarray  # the l admissible ones, tracked order
    geometric_factors: np.ndarray  # 1/(1-|kappa|^2) per admissible root

    @property
    def principal(self) -> complex:
        """Admissible root closest to the unit circle."""
        return self.admissible[np.argmax(np.abs(self.admissible))]


def _all_roots(cp: CharacteristicProblem, s: complex) -> np.ndarray:
    a = np.asarray(cp.coeffs, dtype=complex)
    c = a.copy()
    c[cp.l] -= complex(s) ** 2
    roots = np.roots(c[::-1])
    if len(roots) != 2 * cp.l:
        raise BoundarySystemError(
            f"characteristic polynomial degenerated at s={s} ({len(roots)} roots)"
        )
    return roots


def _match(prev: np.ndarray, new: np.ndarray) -> np.ndarray:
    """Reorder new roots to follow prev greedily (small sets)."""
    remaining = list(range(len(new)))
    out = np.empty_like(new)
    for i, p in enumerate(prev):
        j = min(remaining, key=lambda k: abs(new[k] - p))
        out[i] = new[j]
        remaining.remove(j)
    return out


_REF_RE = 0.3  # reference abscissa for unambiguous modulus classification


def _tracked_roots(cp: CharacteristicProblem, s: complex, steps: int = 60) -> np.ndarray:
    """All roots at s, ordered so the first l entries continue the
    admissible branches from the reference point Re = _REF_RE.

    The walk is uniform followed by a geometrically refined tail: near
    s = 0 (and near band edges) colliding branches separate only like the
    distance to the collision point, so the step size must shrink with it.
    """
    s0 = complex(_REF_RE, s.imag if abs(s.imag) < 4.0 else 0.0)
    r = _all_roots(cp, s0)
    order = np.argsort(np.abs(r))
    r = r[order]
    if not (np.abs(r[: cp.l]) < 1).all() or not (np.abs(r[cp.l :]) > 1).all():
        raise BoundarySystemError(f"reference point s={s0} fails modulus split")
    s = complex(s)
    path = [s0 + (s - s0) * (k / steps) for k in range(1, steps)]
    path += [s + (s0 + (s - s0) * ((steps - 1) / steps) - s) * 0.5**k for k in range(1, 26)]
    path.append(s)
    for sk in path:
        r = _match(r, _all_roots(cp, sk))
    return r


def characteristic_roots(cp: CharacteristicProblem, s: complex,
                         modulus_margin: float = 1e-2) -> RootSet:
    """All 2l roots with the admissible subset (|kappa| < 1 for Re(s) > 0).

    For Re(s) >= modulus_margin the split is by modulus; closer to the
    imaginary axis roots collide with the unit circle and the admissible
    branches are selected by continuity from a reference point.
    """
    s = complex(s)
    if s.real >= modulus_margin:
        roots = _all_roots(cp, s)
        adm = roots[np.abs(roots) < 1.0 - 1e-12]
        if len(adm) != cp.l:
            raise BoundarySystemError(
                f"expected {cp.l} admissible roots at s={s}, found {len(adm)}"
            )
        ordered = np.concatenate([adm, roots[np.abs(roots) >= 1.0 - 1e-12]])
    else:
        ordered = _tracked_roots(cp, s)
        adm = ordered[: cp.l]
    mod2 = np.abs(adm) ** 2
    with np.errstate(divide="ignore"):
        geo = 1.0 / (1.0 - mod2)
    return RootSet(s=s, roots=ordered, admissible=adm, geometric_factors=geo)


_FACT = [math.factorial(k) for k in range(12)]


def dispersion_f(l: int, theta: float) -> float:
    """Symbol of the 2l-order central second-derivative stencil on the
    mode exp(i w x): D e^{iwx} = f(l, wh)/h^2 e^{iwx}."""
    z = 4.0 * math.sin(theta / 2.0) ** 2
    return -sum(
        2.0 * _FACT[n] ** 2 / _FACT[2 * n + 2] * z ** (n + 1) for n in range(l)
    )


# -- half-line scheme extraction ---------------------------------------------

@dataclass
class HalfLineScheme:
    """Left closure of a SAT scheme plus its interior stencil and the
    leading truncation structure of the closure rows."""

    order: int
    bc: str
    iota: Optional[float]
    closure: np.ndarray  # J x W dimensionless closure rows of Q
    cp: CharacteristicProblem
    J: int
    d: int
    T: np.ndarray  # truncation values per closure row (x^{p+2} probe)
    taylor_a: np.ndarray  # T / (p+2)!

    @property
    def p(self) -> int:
        return self.order // 2

    @property
    def l(self) -> int:
        return self.cp.l

    @property
    def size(self) -> int:
        return self.J


def half_line_scheme(order: int, bc: str, iota: Optional[float] = None,
                     penalty_factor: float = 1.2) -> HalfLineScheme:
    """Extract the left-boundary closure of the SAT scheme.

    Closure rows are found by comparing rows of Q with the shifted
    interior stencil; the unknown split is d = J - l, so the boundary
    system has exactly one equation per closure row.
    """
    table_rows = {2: 1, 4: 4, 6: 6}[order]
    n = 4 * table_rows + 9
    op = build_sbp_d2(order, n, 1.0)
    if bc == DIRICHLET and iota is None:
        iota = penalty_factor * compute_iota0(op)
    sd = _assemble_1d(op, BoundaryConditionSpec(bc), iota if bc == DIRICHLET else None)
    split = _banded_split(sd.Q)
    if split is None:
        raise BoundarySystemError("assembled operator is not banded-plus-border")
    a, Bl, _ = split
    J, W = Bl.shape
    cp = CharacteristicProblem(a)
    l = cp.l
    if J < l:
        raise BoundarySystemError(f"closure width {J} below half stencil {l}")
    p = order // 2

    # truncation of closure rows on the monomial x^{p+2} (unit spacing);
    # boundary data of that monomial vanishes at x=0, so the homogeneous
    # rows carry the full residual
    j = np.arange(W, dtype=float)
    i = np.arange(J, dtype=float)
    T = Bl @ j ** (p + 2) - (p + 2) * (p + 1) * i**p
    return HalfLineScheme(
        order=order,
        bc=bc,
        iota=iota if bc == DIRICHLET else None,
        closure=Bl,
        cp=cp,
        J=J,
        d=J - l,
        T=T,
        taylor_a=T / math.factorial(p + 2),
    )


# -- boundary system ----------------------------------------------------------

@dataclass
class BoundarySystem:
    s: complex
    C: np.ndarray = field(repr=False)
    T_C: np.ndarray
    kappa: np.ndarray
    d: int
    k_last: int  # index of last nonzero truncation row

    @property
    def size(self) -> int:
        return self.C.shape[0]

    def det(self) -> complex:
        return complex(np.linalg.det(self.C))


def _system_from_roots(scheme: HalfLineScheme, s: complex, kappa: np.ndarray) -> BoundarySystem:
    J, W, d, l = scheme.J, scheme.closure.shape[1], scheme.d, scheme.l
    s2 = complex(s) ** 2
    C = np.zeros((J, J), dtype=complex)
    for i in range(J):
        row = -scheme.closure[i].astype(complex)
        if i < W:
            row[i] += s2
        C[i, :d] = row[:d]
        powers = np.vander(kappa, W - d, increasing=True).T  # (W-d, l)
        C[i, d:] = row[d:] @ powers
    nz = np.nonzero(np.abs(scheme.T) > 1e-9 * max(np.abs(scheme.T).max(), 1.0))[0]
    k_last = int(nz.max()) if len(nz) else 0
    return BoundarySystem(s=complex(s), C=C, T_C=scheme.taylor_a.astype(complex),
                          kappa=kappa.copy(), d=d, k_last=k_last)


def build_boundary_system(scheme: HalfLineScheme, s: complex) -> BoundarySystem:
    """Assemble C(s) by substituting the decaying-mode ansatz into the
    closure rows; unknowns are (zeta_0..zeta_{d-1}, sigma_1..sigma_l)."""
    rs = characteristic_roots(scheme.cp, s)
    return _system_from_roots(scheme, s, rs.admissible)


def solve_boundary_system(bs: BoundarySystem, h: float, p: int) -> dict:
    """Solve C Sigma = h^{p+2} T_C and assemble the L2 profile of the
    half-line error: h (sum |zeta_i|^2 + sum |sigma_j|^2 / (1-|kappa_j|^2))."""
    rhs = h ** (p + 2) * bs.T_C
    sigma = np.linalg.solve(bs.C, rhs)
    zeta = sigma[: bs.d]
    mode_coeffs = sigma[bs.d :]
    mod2 = np.abs(bs.kappa) ** 2
    with np.errstate(divide="ignore"):
        geo = 1.0 / (1.0 - mod2)
    l2_sq = h * (np.sum(np.abs(zeta) ** 2) + np.sum(np.abs(mode_coeffs) ** 2 * geo))
    return {
        "Sigma": sigma,
        "zeta": zeta,
        "sigma": mode_coeffs,
        "geometric_factors": geo,
        "l2_sq": float(l2_sq.real),
        "sigma_max": float(np.abs(sigma).max()),
        "cinv_max": float(np.abs(np.linalg.inv(bs.C)).max()),
    }


# -- Taylor coefficients of C at the origin -----------------------------------

def _taylor_ring(scheme: HalfLineScheme, radius: float = 0.05, K: int = 64,
                 n_terms: int = 8):
    """Taylor coefficients of the analytic continuation of C at s = 0 via
    FFT on a ring, with the admissible branches tracked continuously
    around it."""
    cp = scheme.cp
    thetas = 2.0 * math.pi * np.arange(K) / K
    s_ring = radius * np.exp(1j * thetas)
    roots = _tracked_roots(cp, s_ring[0])
    values = np.empty((K, scheme.J, scheme.J), dtype=complex)
    for k, s in enumerate(s_ring):
        roots = _match(roots, _all_roots(cp, s))
        values[k] = _system_from_roots(scheme, s, roots[: cp.l]).C
    # Taylor coefficient of s^m sits at the +m frequency: forward FFT / K
    coeffs = np.fft.fft(values, axis=0) / K
    out = [coeffs[m] / radius**m for m in range(n_terms)]
    return out


# -- singularity classification ------------------------------------------------

@dataclass
class SingularityReport:
    order: int
    bc: str
    iota: Optional[float]
    w: int
    w_capped: bool
    sigma_slope: float  # empirical |Sigma|_max slope in h, ~ p+2-w
    alpha: list
    beta: list
    sites: list  # imaginary-axis singular points xi
    det_min_right_half: float
    predicted_gain: float
    predicted_rate_q: float
    det_scan: list = field(default_factory=list, repr=False)


def _w_from_taylor(taylor, T_C, cap=6):
    """Decision tree on the SVD of C(0) and the higher s-derivatives.

    The rank decision uses an absolute scale built from the boundary
    system itself (its entries are O(1) dimensionless stencil values), so
    that a numerically-zero C(0) is treated as singular.
    """
    C0 = taylor[0]
    nn = C0.shape[0]
    U, S, Vh = np.linalg.svd(C0)
    scale = max(float(S[0]) if len(S) else 0.0, 1.0)
    rank = int(np.sum(S > 1e-8 * scale))
    if rank == nn:
        return 0, False
    if rank < nn - 1:
        return cap, True  # beyond the rank-(n-1) machinery
    mstar = None
    for m in range(1, min(cap, len(taylor) - 1) + 1):
        Cm = taylor[m] * math.factorial(m)
        g = (U.conj().T @ Cm @ Vh.conj().T)[nn - 1, nn - 1]
        if abs(g) > 1e-6 * max(1.0, float(np.abs(Cm).max())):
            mstar = m
            break
    if mstar is None:
        return cap, True
    # membership of the truncation vector in the numerical column space
    Ur = U[:, :rank]
    resid = np.linalg.norm(T_C - Ur @ (Ur.conj().T @ T_C))
    in_col = resid <= 1e-8 * max(np.linalg.norm(T_C), 1e-300)
    return (mstar - 1 if in_col else mstar), False


def _sigma_slope(scheme: HalfLineScheme, eta: float = 1.0) -> float:
    """Empirical growth exponent of |Sigma|_max for s = eta h."""
    hs = 2.0 ** -np.arange(4, 13)
    vals = []
    for h in hs:
        bs = build_boundary_system(scheme, complex(eta * h, 0.0))
        vals.append(solve_boundary_system(bs, h, scheme.p)["sigma_max"])
    logs = np.log2(vals)
    slopes = -(np.diff(logs))
    return float(np.median(slopes))


def _axis_scan(scheme: HalfLineScheme, n_points: int = 4096, site_rtol: float = 1e-4):
    """|det C| on s = i xi, xi in (0, pi]; every local minimum is refined
    by trisection and kept as a singular site when the refined value
    drops below site_rtol relative to the scan median (a sharp root-type
    cusp refines to ~0, a smooth nonzero dip does not)."""
    xis = np.linspace(0.0, math.pi, n_points + 1)[1:]
    cp = scheme.cp
    roots = _tracked_roots(cp, 1j * xis[0])
    dets = np.empty(n_points)
    for k, xi in enumerate(xis):
        roots = _match(roots, _all_roots(cp, 1j * xi))
        C = _system_from_roots(scheme, 1j * xi, roots[: cp.l]).C
        dets[k] = abs(np.linalg.det(C))
    scale = max(float(np.median(dets)), 1e-300)

    def det_at(xi):
        return abs(np.linalg.det(build_boundary_system(scheme, 1j * xi).C))

    sites = []
    for k in range(1, n_points - 1):
        if not (dets[k] <= dets[k - 1] and dets[k] <= dets[k + 1]):
            continue
        if dets[k] > 0.5 * scale:
            continue  # shallow wiggle, not a candidate
        lo, hi = xis[k - 1], xis[k + 1]
        for _ in range(70):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if det_at(m1) < det_at(m2):
                hi = m2
            else:
                lo = m1
        xi_star = 0.5 * (lo + hi)
        if det_at(xi_star) < site_rtol * scale:
            if not sites or abs(xi_star - sites[-1]) > 1e-3:
                sites.append(xi_star)
    return xis, dets, sites


def _fit_exponent(scheme: HalfLineScheme, xi: float, eta: float = 1.0):
    """Exponents at an imaginary-axis singular site: alpha from the growth
    of ||C^{-1}||_max and beta from near-unit admissible roots, both along
    s = i xi + eta h, rounded up to integers."""
    hs = 2.0 ** -np.arange(4, 13)
    cinv, geo = [], []
    for h in hs:
        bs = build_boundary_system(scheme, complex(eta * h, xi))
        cinv.append(np.abs(np.linalg.inv(bs.C)).max())
        geo.append(float((1.0 / (1.0 - np.abs(bs.kappa) ** 2)).max()))
    alpha_slope = float(np.median(np.diff(np.log2(cinv))))
    beta_slope = float(np.median(np.diff(np.log2(geo))))
    alpha = max(0, math.ceil(alpha_slope - 1e-6))
    beta = max(0, math.ceil(beta_slope - 1e-6))
    return alpha, beta


def _det_right_half_min(scheme: HalfLineScheme, n_samples: int = 200, seed: int = 1234,
                        re_min: float = 1e-2) -> float:
    rng = np.random.default_rng(seed)
    res = re_min + (1.0 - re_min) * rng.random(n_samples)
    ims = -math.pi + 2 * math.pi * rng.random(n_samples)
    dmin = math.inf
    for re, im in zip(res, ims):
        bs = build_boundary_system(scheme, complex(re, im))
        dmin = min(dmin, abs(bs.det()))
    return dmin


def singularity_analysis(order: int, bc: str, iota: Optional[float] = None,
                         penalty_factor: float = 1.2, scan_points: int = 4096,
                         w_cap: int = 6) -> SingularityReport:
    """Full classification of the boundary system: w at the origin, the
    imaginary-axis sites with their (alpha, beta), and the derived rate
    prediction q = min(2p, p + 2 - w)."""
    scheme = half_line_scheme(order, bc, iota, penalty_factor)
    taylor = _taylor_ring(scheme, n_terms=w_cap + 2)
    w, capped = _w_from_taylor(taylor, scheme.taylor_a.astype(complex), cap=w_cap)
    slope = _sigma_slope(scheme)
    xis, dets, sites = _axis_scan(scheme, n_points=scan_points)
    alphas, betas = [], []
    for xi in sites:
        al, be = _fit_exponent(scheme, xi)
        alphas.append(al)
        betas.append(be)
    p = order // 2
    gain = 2.0 - w
    q = min(2.0 * p, p + 2.0 - w)
    stride = max(1, len(xis) // 256)
    return SingularityReport(
        order=order,
        bc=bc,
        iota=scheme.iota,
        w=int(w),
        w_capped=capped,
        sigma_slope=slope,
        alpha=alphas,
        beta=betas,
        sites=[float(x) for x in sites],
        det_min_right_half=_det_right_half_min(scheme),
        predicted_gain=gain,
        predicted_rate_q=q,
        det_scan=[(float(x), float(d)) for x, d in zip(xis[::stride], dets[::stride])],
    )


def report_to_dict(rep: SingularityReport) -> dict:
    return {
        "scheme": "sbp-sat-wave",
        "order": rep.order,
        "bc": rep.bc,
        "iota": rep.iota,
        "w": rep.w,
        "w_capped": rep.w_capped,
        "sigma_slope": rep.sigma_slope,
        "alpha": rep.alpha,
        "beta": rep.beta,
        "singular_sites": rep.sites,
        "det_min_right_half": rep.det_min_right_half,
        "predicted_gain": rep.predicted_gain,
        "predicted_rate_q": rep.predicted_rate_q,
        "det_scan": rep.det_scan,
    }


# -- root-bound sweeps ---------------------------------------------------------

def kappa_bound_sweep(order: int, eta: float = 1.0, h_list=None) -> dict:
    """Track eta h / (1 - |kappa_1|^2) along s = eta h; bounded uniformly
    (factor-2 band) by the principal-root estimate, while the secondary
    admissible roots keep O(1) geometric factors."""
    if h_list is None:
        h_list = [2.0**-k for k in range(4, 11)]
    cp = CharacteristicProblem(
        build_sbp_d2(order, 4 * {2: 1, 4: 4, 6: 6}[order] + 9, 1.0).interior_coeffs
    )
    principal_scaled, secondary_max = [], []
    for h in h_list:
        rs = characteristic_roots(cp, complex(eta * h, 0.0))
        k1 = rs.principal
        principal_scaled.append(eta * h / (1.0 - abs(k1) ** 2))
        others = rs.admissible[np.abs(rs.admissible - k1) > 1e-14]
        if len(others):
            secondary_max.append(float((1.0 / (1.0 - np.abs(others) ** 2)).max()))
    return {
        "h": list(h_list),
        "principal_scaled": [float(v) for v in principal_scaled],
        "band_ratio": float(max(principal_scaled) / min(principal_scaled)),
        "secondary_max": secondary_max,
    }


def corner_log_bound(spectrum, order: int, eta: float = 1.0, delta: float = 0.5,
                     h: Optional[float] = None, bc: str = NEUMANN) -> dict:
    """Corner-error machinery for one transverse spectrum: split modes at
    sqrt(h^2 lambda) = delta, sum h/(1-|kappa_1|^2) over the small-r set
    (expected ~ K log(1/h)), and verify O(1) bounds for the rest."""
    if h is None:
        h = 1.0 / (spectrum.n - 1)
    lam = np.asarray(spectrum.lam)
    scheme = half_line_scheme(order, bc)
    cp = scheme.cp
    s_plus = h * np.sqrt(eta**2 + np.clip(lam, 0.0, None))
    small = np.sqrt(h * h * np.clip(lam, 0.0, None)) <= delta
    r_delta = int(small.sum())

    small_sum = 0.0
    for s in s_plus[small]:
        rs = characteristic_roots(cp, complex(s, 0.0))
        small_sum += h / (1.0 - abs(rs.principal) ** 2)

    large_geo_max = 0.0
    large_cinv_max = 0.0
    for s in s_plus[~small]:
        rs = characteristic_roots(cp, complex(s, 0.0))
        large_geo_max = max(large_geo_max, float(np.abs(rs.geometric_factors).max()))
        bs = _system_from_roots(scheme, complex(s, 0.0), rs.admissible)
        large_cinv_max = max(large_cinv_max, float(np.abs(np.linalg.inv(bs.C)).max()))

    return {
        "h": h,
        "r_delta": r_delta,
        "small_sum": float(small_sum),
        "large_geo_max": large_geo_max,
        "large_cinv_max": large_cinv_max,
    }
