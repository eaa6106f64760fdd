"""Refinement studies, corner-truncation-error experiments and rate
computation against the predicted convergence rates.

The corner experiment perturbs the boundary data of the x = 0 side at the
first and last five grid points in y (ten sites at every resolution):
multiplicatively, g -> (1 + nu) g with nu = c_p h^p, for Dirichlet, and
additively, g -> g + nu with nu = c_p h^{p-1}, for Neumann.  Either way
the penalty scaling turns the data error into an O(h^{p-2}) truncation
error localized at the corners.
"""

from dataclasses import dataclass, field
from typing import Optional
import math
import os
import json

import numpy as np

from .sbp_core import build_sbp_d2
from .sat_semidisc import (
    assemble_2d,
    assemble_dirichlet_1d,
    assemble_neumann_1d,
    compute_iota0,
    BoundaryConditionSpec,
    DIRICHLET,
    NEUMANN,
)
from .wave_solver import (
    SOLUTIONS,
    SimulationConfig,
    boundary_spec,
    rk4_integrate,
    _residual_field,
)
from . import normal_mode


def convergence_rate(err_coarse: float, err_fine: float) -> float:
    """Rate between successive refinements, q = log(e_h / e_2h) / log(1/2)."""
    return math.log(err_fine / err_coarse) / math.log(0.5)


_TABLE_RATES = {
    (DIRICHLET, "at_threshold"): {2: 1.5, 4: 2.5, 6: 3.5},
    (DIRICHLET, "above_threshold"): {2: 2.0, 4: 4.0, 6: 5.5},
    (NEUMANN, "above_threshold"): {2: 2.0, 4: 4.0, 6: 5.5},
}

# expected corner rates: truncation O(h^{p-2}) at O(1) sites gains p+3-w
# orders relative to that truncation, i.e. observed exponent p+1-w
_CORNER_W = {DIRICHLET: 0, NEUMANN: 1}


def predicted_rate(order: int, bc: str, regime: str = "above_threshold") -> float:
    """Predicted overall rate q for the standard experiment, or the corner
    exponent p+1-w for regime='corner'."""
    p = order // 2
    if regime == "corner":
        return float(p + 1 - _CORNER_W[bc])
    key = (bc, regime)
    if key not in _TABLE_RATES or order not in _TABLE_RATES[key]:
        raise ValueError(f"unsupported combination {bc}/{regime}/order {order}")
    return _TABLE_RATES[key][order]


@dataclass
class CornerPerturbation:
    """Ten-site boundary-data perturbation at the x = 0 corners."""

    bc: str
    order: int
    c_p: Optional[float] = None  # None: calibrate from the closure truncation
    sites_per_corner: int = 5

    def resolve_cp(self) -> float:
        if self.c_p is not None:
            return self.c_p
        scheme = normal_mode.half_line_scheme(self.order, self.bc)
        return float(np.abs(scheme.taylor_a).max())

    def nu(self, h: float) -> float:
        p = self.order // 2
        power = p if self.bc == DIRICHLET else p - 1
        return self.resolve_cp() * h**power

    def wrap(self, g_low, h: float):
        """Wrap the x-low data callable with the ten-site perturbation."""
        nu = self.nu(h)
        m = self.sites_per_corner
        if self.bc == DIRICHLET:
            def g(coords, t):
                vals = np.array(g_low(coords, t), dtype=float, copy=True)
                vals[:m] *= 1.0 + nu
                vals[-m:] *= 1.0 + nu
                return vals
        else:
            def g(coords, t):
                vals = np.array(g_low(coords, t), dtype=float, copy=True)
                vals[:m] += nu
                vals[-m:] += nu
                return vals
        return g


@dataclass
class ConvergenceReport:
    experiment: str
    rows: list  # (n, h, l2_error, rate or nan)
    headline_rate: float
    predicted: float
    metadata: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["N,h,l2_error,rate"]
        for n, h, e, q in self.rows:
            lines.append(f"{n:d},{h:.17g},{e:.17g},{q:.17g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        payload = {
            "experiment": self.experiment,
            "rows": [
                {"N": n, "h": h, "l2_error": e, "rate": q} for n, h, e, q in self.rows
            ],
            "headline_rate": self.headline_rate,
            "predicted_rate": self.predicted,
            "metadata": self.metadata,
        }
        return json.dumps(payload, indent=2, default=float)


def build_simulation(cfg: SimulationConfig):
    """Operators, boundary data and manufactured solution for one run.

    Dimension 1 integrates the x-profile of the same separable family
    (transverse wavenumber zero); corner perturbations are 2D-only.
    """
    if cfg.solution not in SOLUTIONS:
        raise ValueError(f"unknown solution {cfg.solution!r}")
    ms = SOLUTIONS[cfg.solution]()
    h = 1.0 / (cfg.n - 1)
    op = build_sbp_d2(cfg.order, cfg.n, h)
    iota = cfg.penalty_factor * compute_iota0(op) if cfg.bc == DIRICHLET else None

    if cfg.dimension == 1:
        if cfg.corner is not None:
            raise ValueError("corner perturbations are defined for 2D runs")
        from .wave_solver import cosine_solution

        kx = 4.0 if cfg.solution == "wavenumber4" else 10 * math.pi
        ms1 = cosine_solution(kx, 0.0, label=cfg.solution + "-1d")
        if cfg.bc == DIRICHLET:
            bc = BoundaryConditionSpec(
                DIRICHLET,
                g_low=lambda t: float(ms1.u(0.0, 0.0, t)),
                g_high=lambda t: float(ms1.u(1.0, 0.0, t)),
            )
            sd = assemble_dirichlet_1d(op, iota, bc)
        else:
            bc = BoundaryConditionSpec(
                NEUMANN,
                g_low=lambda t: float(-ms1.ux(0.0, 0.0, t)),
                g_high=lambda t: float(ms1.ux(1.0, 0.0, t)),
            )
            sd = assemble_neumann_1d(op, bc)
        return sd, ms1, iota

    bcx = boundary_spec(ms, cfg.bc, "x")
    bcy = boundary_spec(ms, cfg.bc, "y")
    if cfg.corner is not None:
        pert = cfg.corner if isinstance(cfg.corner, CornerPerturbation) else (
            CornerPerturbation(bc=cfg.bc, order=cfg.order, **cfg.corner)
        )
        bcx = BoundaryConditionSpec(
            kind=bcx.kind, g_low=pert.wrap(bcx.g_low, h), g_high=bcx.g_high
        )
    sd = assemble_2d(op, op, bcx, bcy, iota)
    return sd, ms, iota


def _run_level(cfg_dict: dict, n: int):
    cfg = SimulationConfig(**{**cfg_dict, "n": n})
    sd, ms, iota = build_simulation(cfg)
    res = rk4_integrate(sd, ms, cfg)
    return n, sd.h, res.error, iota


def _worker_count() -> int:
    env = os.environ.get("WAVELAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return max(1, (os.cpu_count() or 1) // 2)


def _cfg_dict(cfg: SimulationConfig) -> dict:
    d = dict(cfg.__dict__)
    return d


def run_refinement_study(cfg: SimulationConfig, levels, experiment: str = "",
                         predicted: Optional[float] = None) -> ConvergenceReport:
    """One solve per level; the rate of the last refinement pair is
    reported as the headline."""
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError("need at least two refinement levels")
    base = _cfg_dict(cfg)
    workers = min(_worker_count(), len(levels))
    results = []
    if workers > 1:
        import concurrent.futures as cf
        import multiprocessing as mp

        # spawn: forking after BLAS/numba threads have started is unsafe
        with cf.ProcessPoolExecutor(
            max_workers=workers, mp_context=mp.get_context("spawn")
        ) as ex:
            futs = [ex.submit(_run_level, base, n) for n in levels]
            results = [f.result() for f in futs]
    else:
        results = [_run_level(base, n) for n in levels]
    results.sort(key=lambda r: r[0])

    rows = []
    prev_err = None
    for n, h, err, iota in results:
        q = convergence_rate(prev_err, err) if prev_err is not None else float("nan")
        rows.append((n, h, err, q))
        prev_err = err
    regime = "above_threshold"
    if cfg.bc == DIRICHLET and abs(cfg.penalty_factor - 1.0) < 1e-12:
        regime = "at_threshold"
    if cfg.corner is not None:
        regime = "corner"
    pred = predicted if predicted is not None else predicted_rate(cfg.order, cfg.bc, regime)
    meta = {
        "order": cfg.order,
        "bc": cfg.bc,
        "t_f": cfg.t_f,
        "cfl": cfg.cfl,
        "penalty_factor": cfg.penalty_factor,
        "solution": cfg.solution,
        "regime": regime,
        "iota": results[0][3],
        "corner": None,
    }
    if cfg.corner is not None:
        pert = cfg.corner if isinstance(cfg.corner, CornerPerturbation) else (
            CornerPerturbation(bc=cfg.bc, order=cfg.order, **cfg.corner)
        )
        meta["corner"] = {
            "c_p": pert.resolve_cp(),
            "sites": 2 * pert.sites_per_corner,
        }
    return ConvergenceReport(
        experiment=experiment or f"{cfg.bc}-order{cfg.order}-{regime}",
        rows=rows,
        headline_rate=rows[-1][3],
        predicted=pred,
        metadata=meta,
    )


def run_corner_experiment(cfg: SimulationConfig, levels) -> ConvergenceReport:
    """Refinement study with the ten-site corner perturbation active."""
    if cfg.corner is None:
        cfg = SimulationConfig(**{**_cfg_dict(cfg), "corner": {}})
    return run_refinement_study(cfg, levels)


def truncation_probe(cfg: SimulationConfig) -> dict:
    """Per-point truncation residual of the semi-discretization on the
    exact solution, split into interior / closure / corner bands."""
    sd, ms, _ = build_simulation(cfg)
    t_star = -ms.time_phase / ms.time_omega
    gx = sd.sdx.op.grid()
    gy = sd.sdy.op.grid()
    U0 = ms.spatial_profile(gx.points[None, :], gy.points[:, None]).copy()
    R = _residual_field(sd, U0, t_star, 0.0, ms.time_omega, True)
    Jx = sd.sdx.op.closure_width
    Jy = sd.sdy.op.closure_width
    ny, nx = R.shape
    m = 5
    corner_mask = np.zeros_like(R, dtype=bool)
    corner_mask[:m, :Jx] = True
    corner_mask[-m:, :Jx] = True
    closure_mask = np.zeros_like(R, dtype=bool)
    closure_mask[:, :Jx] = True
    closure_mask[:, -Jx:] = True
    closure_mask[:Jy, :] = True
    closure_mask[-Jy:, :] = True
    closure_mask &= ~corner_mask
    interior_mask = ~(closure_mask | corner_mask)
    return {
        "field": R,
        "h": sd.h,
        "interior_max": float(np.abs(R[interior_mask]).max()),
        "closure_max": float(np.abs(R[closure_mask]).max()),
        "corner_max": float(np.abs(R[corner_mask]).max()),
    }


def probe_slopes(cfg: SimulationConfig, n_pair=(41, 81)) -> dict:
    """Two-level slope fit of the truncation bands: interior ~ 2p,
    closure ~ p, perturbed corners ~ p-2."""
    out = {}
    probes = []
    for n in n_pair:
        c = SimulationConfig(**{**_cfg_dict(cfg), "n": n})
        probes.append(truncation_probe(c))
    for band in ("interior_max", "closure_max", "corner_max"):
        ratio = probes[0][band] / probes[1][band]
        out[band.replace("_max", "_slope")] = math.log2(ratio)
    return out
