"""Quasi-convex controller synthesis over fFRF data.

For fixed gamma the constraint set

    Re{D_p(w, theta)} >= gamma^{-1} |W_c(w) N_p^c(w, theta)| + eps

is second-order-cone representable in the controller parameters theta (both
D_p and the channel numerators are affine in theta).  Feasibility subproblems
are solved as linear programs over tangent half-planes of each disc
constraint: either a fixed fan of M planes shrunk by cos(pi/M) (a sound inner
approximation), or adaptively, starting from an outer relaxation and adding
exact-phase cuts until the returned theta verifies against the true cone
constraints or the relaxation certifies infeasibility.  An outer bisection
over gamma yields the performance level.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .exceptions import SolverFailureError, SynthesisInfeasibleError
from .factorization import CHANNELS, CoprimeFrfPair, assemble_closed_loop
from .frfdata import FrequencyGrid, FrfResponse, SchedulingGrid
from .obf import ObfBasis, SchedulingBasis, basis_rational, eval_basis, scheduling_eval
from .rational import RationalTf


@dataclass(frozen=True, eq=False)
class WeightSet:
    """Stable shaping weights for the four closed-loop channels."""

    s: object
    gs: object
    ks: object
    t: object

    def __post_init__(self):
        for name in ("s", "gs", "ks", "t"):
            w = getattr(self, name)
            if isinstance(w, RationalTf):
                if not w.is_stable():
                    raise ValueError(f"weight W_{name.upper()} must be stable")
            elif not isinstance(w, FrfResponse):
                raise ValueError("weights must be RationalTf or FrfResponse")

    def on_grid(self, grid: FrequencyGrid) -> dict:
        out = {}
        for channel, name in zip(CHANNELS, ("s", "gs", "ks", "t")):
            w = getattr(self, name)
            vals = w.on_grid(grid) if isinstance(w, RationalTf) else np.asarray(w.values)
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"weight for channel {channel} is not finite on the grid")
            out[channel] = vals
        return out


@dataclass(frozen=True, eq=False)
class ControllerParameters:
    """OBF coefficient tensors defining the controller factors.

    ``wbar[i, l]`` weighs basis function i of the numerator bank against the
    scheduling function l; ``vbar`` likewise for the denominator bank, with
    the normalization vbar[0] = [1, 0, ..., 0] so the denominator feedthrough
    is identically one.
    """

    wbar: np.ndarray
    vbar: np.ndarray
    basis_n: ObfBasis
    basis_d: ObfBasis
    sched: SchedulingBasis

    def __post_init__(self):
        wbar = np.asarray(self.wbar, dtype=float)
        vbar = np.asarray(self.vbar, dtype=float)
        m = self.sched.m
        if wbar.shape != (self.basis_n.size, m):
            raise ValueError(f"wbar must have shape {(self.basis_n.size, m)}")
        if vbar.shape != (self.basis_d.size, m):
            raise ValueError(f"vbar must have shape {(self.basis_d.size, m)}")
        if not (np.all(np.isfinite(wbar)) and np.all(np.isfinite(vbar))):
            raise ValueError("controller parameters must be finite")
        expected = np.zeros(m)
        expected[0] = 1.0
        if not np.array_equal(vbar[0], expected):
            raise ValueError("normalization requires vbar[0] = [1, 0, ..., 0]")
        object.__setattr__(self, "wbar", wbar)
        object.__setattr__(self, "vbar", vbar)
        wbar.flags.writeable = False
        vbar.flags.writeable = False


class ParameterLayout:
    """Flattening of the free controller parameters into one vector.

    Order: all wbar entries (basis-major), then vbar rows 1..n_D; the fixed
    normalization row of vbar is not a decision variable.
    """

    def __init__(self, basis_n: ObfBasis, basis_d: ObfBasis, sched: SchedulingBasis):
        self.basis_n = basis_n
        self.basis_d = basis_d
        self.sched = sched
        self.m = sched.m
        self.n_w = basis_n.size * sched.m
        self.n_v = basis_d.n * sched.m
        self.size = self.n_w + self.n_v

    def w_index(self, i: int, l: int) -> int:
        return i * self.m + l

    def v_index(self, i: int, l: int) -> int:
        if i < 1:
            raise ValueError("vbar row 0 is fixed by normalization")
        return self.n_w + (i - 1) * self.m + l

    def pack(self, params: ControllerParameters) -> np.ndarray:
        return np.concatenate([params.wbar.ravel(), params.vbar[1:].ravel()])

    def unpack(self, theta: np.ndarray) -> ControllerParameters:
        theta = np.asarray(theta, dtype=float)
        wbar = theta[:self.n_w].reshape(self.basis_n.size, self.m)
        vbar = np.zeros((self.basis_d.size, self.m))
        vbar[0, 0] = 1.0
        if self.n_v:
            vbar[1:] = theta[self.n_w:].reshape(self.basis_d.n, self.m)
        return ControllerParameters(wbar, vbar, self.basis_n, self.basis_d, self.sched)


def evaluate_factors(params: ControllerParameters, p: float, grid: FrequencyGrid):
    """Controller factor data (nk, dk) on the grid; linear in the parameters."""
    psi = scheduling_eval(params.sched, p)
    nk = (params.wbar @ psi) @ eval_basis(params.basis_n, grid)
    dk = (params.vbar @ psi) @ eval_basis(params.basis_d, grid)
    return nk, dk


def factor_rationals(params: ControllerParameters, p: float):
    """Frozen (N_K, D_K) as rational transfer functions at operating point p."""
    psi = scheduling_eval(params.sched, p)
    nums_n, den_n = basis_rational(params.basis_n)
    nums_d, den_d = basis_rational(params.basis_d)
    w = params.wbar @ psi
    v = params.vbar @ psi
    num_n = np.zeros(den_n.size)
    for wi, ni in zip(w, nums_n):
        num_n[den_n.size - ni.size:] += wi * ni
    num_d = np.zeros(den_d.size)
    for vi, ni in zip(v, nums_d):
        num_d[den_d.size - ni.size:] += vi * ni
    return (RationalTf(num_n, den_n), RationalTf(num_d, den_d))


def frozen_controller_tf(params: ControllerParameters, p: float,
                         sample_rate: float = 1.0) -> RationalTf:
    """K(z, p) = N_K / D_K as one rational transfer function."""
    nk, dk = factor_rationals(params, p)
    num = np.convolve(nk.num, dk.den)
    den = np.convolve(nk.den, dk.num)
    return RationalTf(num, den, sample_rate)


# ---------------------------------------------------------------------------
# problem definition
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SynthesisOptions:
    eps: float | None = None
    gamma_lo: float = 1e-3
    gamma_hi: float = 1e3
    gamma_rtol: float = 1e-3
    gamma_atol: float | None = None
    integral_action: bool = False
    planes: object = "adaptive"   # "adaptive" or an int M for a fixed fan
    theta_bound: float = 1e4
    max_cut_rounds: int = 50


@dataclass(frozen=True, eq=False)
class SynthesisProblem:
    pairs: dict                      # operating point -> CoprimeFrfPair
    weights: WeightSet
    grid: FrequencyGrid
    scheduling_grid: SchedulingGrid
    basis_n: ObfBasis
    basis_d: ObfBasis
    sched_basis: SchedulingBasis
    options: SynthesisOptions = field(default_factory=SynthesisOptions)

    def __post_init__(self):
        if self.basis_d.n < self.basis_n.n:
            raise ValueError("denominator basis order must be >= numerator order")
        if self.options.eps is not None and not self.options.eps > 0:
            raise ValueError("certified output needs a strictness margin eps > 0")
        for p in self.scheduling_grid.points:
            pair = self.pairs.get(float(p))
            if pair is None:
                raise ValueError(f"no coprime data at operating point {p}")
            if not np.array_equal(pair.grid.omegas, self.grid.omegas):
                raise ValueError(f"coprime data at p={p} uses a different grid")
        if self.options.integral_action and self.grid.omegas[0] <= 0.0:
            raise ValueError("integral action requires omega = 0 off the grid")

    @property
    def layout(self) -> ParameterLayout:
        return ParameterLayout(self.basis_n, self.basis_d, self.sched_basis)


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    theta: ControllerParameters
    gamma: float
    margins: dict                    # (p, channel) -> per-frequency margin array
    re_dp_min: float
    telemetry: dict

    def margin_min(self) -> float:
        return min(float(np.min(v)) for v in self.margins.values())


class ConstraintBlock:
    """Affine maps for one (operating point, channel) disc constraint family.

    Over the frequency grid: Re{d_coef theta + d_off} >= gamma^{-1} |n_coef
    theta + n_off| + eps, with the D_p map shared across the four channels of
    one operating point.
    """

    def __init__(self, p, channel, d_coef, d_off, n_coef, n_off):
        self.p = p
        self.channel = channel
        self.d_coef = d_coef
        self.d_off = d_off
        self.n_coef = n_coef
        self.n_off = n_off

    def true_margins(self, theta: np.ndarray, gamma_inv: float, eps: float) -> np.ndarray:
        d = self.d_coef @ theta + self.d_off
        n = self.n_coef @ theta + self.n_off
        return d.real - gamma_inv * np.abs(n) - eps


def _problem_blocks(problem: SynthesisProblem) -> list:
    """Gamma-independent constraint data for every (operating point, channel)."""
    layout = problem.layout
    w_grid = problem.weights.on_grid(problem.grid)
    n_freq = len(problem.grid)
    phi_n = eval_basis(problem.basis_n, problem.grid)
    phi_d = eval_basis(problem.basis_d, problem.grid)
    blocks = []
    for p in problem.scheduling_grid.points:
        p = float(p)
        pair = problem.pairs[p]
        psi = scheduling_eval(problem.sched_basis, p)
        cn = np.einsum("iw,l->wil", phi_n, psi).reshape(n_freq, layout.n_w)
        cd = np.einsum("iw,l->wil", phi_d[1:], psi).reshape(n_freq, layout.n_v)
        dk_off = phi_d[0]
        n_g = pair.n_g.values[:, None]
        d_g = pair.d_g.values[:, None]
        zeros_w = np.zeros((n_freq, layout.n_w), dtype=complex)
        zeros_v = np.zeros((n_freq, layout.n_v), dtype=complex)
        d_coef = np.hstack([n_g * cn, d_g * cd])
        d_off = pair.d_g.values * dk_off
        channel_maps = {
            "S": (np.hstack([zeros_w, d_g * cd]), pair.d_g.values * dk_off),
            "GS": (np.hstack([zeros_w, n_g * cd]), pair.n_g.values * dk_off),
            "KS": (np.hstack([d_g * cn, zeros_v]), np.zeros(n_freq, dtype=complex)),
            "T": (np.hstack([n_g * cn, zeros_v]), np.zeros(n_freq, dtype=complex)),
        }
        for channel in CHANNELS:
            w = w_grid[channel]
            n_coef, n_off = channel_maps[channel]
            blocks.append(ConstraintBlock(p, channel, d_coef, d_off,
                                          w[:, None] * n_coef, w * n_off))
    return blocks


def default_eps(problem: SynthesisProblem) -> float:
    mags = np.concatenate([np.abs(problem.pairs[float(p)].d_g.values)
                           for p in problem.scheduling_grid.points])
    return 1e-6 * float(np.median(mags))


def assemble_constraints(problem: SynthesisProblem, gamma: float) -> list:
    """Cone constraints of the synthesis condition at performance level gamma.

    Each entry is (block, gamma_inv, eps): Re{D_p} >= gamma_inv |W_c N_p^c| +
    eps over the grid, affine in theta.  gamma = inf yields the
    stability-only constraints Re{D_p} >= eps.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    eps = problem.options.eps if problem.options.eps is not None else default_eps(problem)
    gamma_inv = 0.0 if math.isinf(gamma) else 1.0 / gamma
    return [(block, gamma_inv, eps) for block in _problem_blocks(problem)]


def add_integral_action(problem: SynthesisProblem):
    """Equality constraints D_K(z=1, p_tau) = 0 for every grid operating point.

    Because the normalization pins v_0(p) = 1, the constraints read
    sum_{i>=1} v_i(p_tau) phi_i(1) = -phi_0(1); with n_D = 0 they are
    unsatisfiable and feasibility reports infeasible.
    """
    layout = problem.layout
    phi1 = eval_basis_at_one(problem.basis_d)
    rows = []
    rhs = []
    for p in problem.scheduling_grid.points:
        psi = scheduling_eval(problem.sched_basis, float(p))
        row = np.zeros(layout.size)
        for i in range(1, problem.basis_d.size):
            for l in range(layout.m):
                row[layout.v_index(i, l)] = float(phi1[i].real) * psi[l]
        rows.append(row)
        rhs.append(-float(phi1[0].real))
    return np.array(rows), np.array(rhs)


def eval_basis_at_one(basis: ObfBasis) -> np.ndarray:
    from .obf import eval_basis_at
    return eval_basis_at(basis, np.array([1.0 + 0j]))[:, 0]


# ---------------------------------------------------------------------------
# feasibility and bisection
# ---------------------------------------------------------------------------

@dataclass
class FeasibilityOutcome:
    status: str                      # "feasible" | "infeasible"
    theta: np.ndarray | None
    margin: float
    telemetry: dict


_BASE_ANGLES = np.array([0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi])


def _lp_rows(block, angles_cos, angles_sin, gamma_inv, eps, factor):
    """Stack tangent-plane rows for one block and one set of angles."""
    re_n = block.n_coef.real
    im_n = block.n_coef.imag
    rows = []
    rhs = []
    for ca, sa in zip(angles_cos, angles_sin):
        a = gamma_inv * factor * (ca * re_n + sa * im_n) - block.d_coef.real
        b = (block.d_off.real - gamma_inv * factor *
             (ca * block.n_off.real + sa * block.n_off.imag) - eps)
        rows.append(a)
        rhs.append(b)
    return np.vstack(rows), np.concatenate(rhs)


def feasibility_solve(constraints: list, equalities=None,
                      options: SynthesisOptions | None = None) -> FeasibilityOutcome:
    """Find theta satisfying every cone constraint strictly, or certify
    infeasibility.

    Solves max-margin linear programs over tangent half-planes.  In adaptive
    mode the LP is an outer relaxation refined with exact-phase cuts at
    violated points, so "infeasible" is a certificate; a returned theta is
    verified against the true cone constraints.  Numerical solver failures
    raise, distinct from infeasibility.
    """
    options = options or SynthesisOptions()
    blocks = [c[0] for c in constraints]
    gamma_invs = [c[1] for c in constraints]
    epss = [c[2] for c in constraints]
    n_theta = blocks[0].d_coef.shape[1] if blocks else 0
    adaptive = options.planes == "adaptive"
    if adaptive:
        angles = _BASE_ANGLES
        factor = 1.0
    else:
        m_planes = int(options.planes)
        angles = 2.0 * math.pi * np.arange(m_planes) / m_planes
        factor = 1.0 / math.cos(math.pi / m_planes)

    base = [_lp_rows(b, np.cos(angles), np.sin(angles), gi, ep, factor)
            for b, gi, ep in zip(blocks, gamma_invs, epss)]
    a_rows = [r for r, _ in base]
    b_rows = [r for _, r in base]

    a_eq = b_eq = None
    if equalities is not None:
        a_eq_theta, b_eq = equalities
        a_eq = np.hstack([a_eq_theta, np.zeros((a_eq_theta.shape[0], 1))])

    bounds = [(-options.theta_bound, options.theta_bound)] * n_theta + [(None, None)]
    cost = np.zeros(n_theta + 1)
    cost[-1] = -1.0

    lp_solves = 0
    cuts_added = 0
    for round_idx in range(options.max_cut_rounds):
        a_ub = np.vstack(a_rows)
        b_ub = np.concatenate(b_rows)
        a_ub = np.hstack([a_ub, np.ones((a_ub.shape[0], 1))])
        res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
                      bounds=bounds, method="highs")
        lp_solves += 1
        if res.status == 2:
            return FeasibilityOutcome("infeasible", None, -math.inf,
                                      {"lp_solves": lp_solves, "cuts": cuts_added,
                                       "rows": int(b_ub.size), "plane_factor": factor})
        if res.status != 0:
            raise SolverFailureError(f"LP solver failure: {res.message}")
        t_star = -res.fun
        theta = res.x[:-1]
        tel = {"lp_solves": lp_solves, "cuts": cuts_added, "rows": int(b_ub.size),
               "plane_factor": factor, "lp_margin": t_star}
        if t_star < 0.0:
            return FeasibilityOutcome("infeasible", None, t_star, tel)
        true_min = math.inf
        violated = False
        for blk, gi, ep in zip(blocks, gamma_invs, epss):
            marg = blk.true_margins(theta, gi, ep)
            true_min = min(true_min, float(marg.min()))
            if not adaptive:
                continue
            bad = np.flatnonzero(marg < -1e-12)
            if bad.size:
                violated = True
                n_val = blk.n_coef[bad] @ theta + blk.n_off[bad]
                phases = np.angle(n_val)
                re_n = blk.n_coef[bad].real
                im_n = blk.n_coef[bad].imag
                ca = np.cos(phases)[:, None]
                sa = np.sin(phases)[:, None]
                a_new = gi * (ca * re_n + sa * im_n) - blk.d_coef[bad].real
                b_new = (blk.d_off[bad].real - gi *
                         (np.cos(phases) * blk.n_off[bad].real
                          + np.sin(phases) * blk.n_off[bad].imag) - ep)
                a_rows.append(a_new)
                b_rows.append(b_new)
                cuts_added += bad.size
        tel["margin"] = true_min
        if not adaptive:
            if true_min < -1e-12:
                raise SolverFailureError(
                    "fixed-plane solution violates the cone constraints")
            return FeasibilityOutcome("feasible", theta, true_min, tel)
        if not violated:
            return FeasibilityOutcome("feasible", theta, true_min, tel)
    raise SolverFailureError("cutting-plane refinement did not converge")


def _converged(lo: float, hi: float, options: SynthesisOptions) -> bool:
    if options.gamma_atol is not None:
        return (hi - lo) <= options.gamma_atol
    return (hi - lo) <= options.gamma_rtol * hi


def bisect_gamma(problem: SynthesisProblem) -> SynthesisResult:
    """Minimize gamma by bisection over cone-feasibility subproblems."""
    options = problem.options
    eps = options.eps if options.eps is not None else default_eps(problem)
    blocks = _problem_blocks(problem)
    equalities = add_integral_action(problem) if options.integral_action else None
    layout = problem.layout

    t_start = time.perf_counter()
    lp_solves = 0

    def solve_at(gamma: float) -> FeasibilityOutcome:
        nonlocal lp_solves
        gamma_inv = 0.0 if math.isinf(gamma) else 1.0 / gamma
        out = feasibility_solve([(b, gamma_inv, eps) for b in blocks],
                                equalities, options)
        lp_solves += out.telemetry["lp_solves"]
        return out

    hi = options.gamma_hi
    lo = options.gamma_lo
    out_hi = solve_at(hi)
    if out_hi.status != "feasible":
        raise SynthesisInfeasibleError(
            f"infeasible at the gamma upper bound {hi}",
            diagnostics={"gamma": hi, "lp_margin": out_hi.margin,
                         **out_hi.telemetry})
    best = (hi, out_hi.theta)

    out_lo = solve_at(lo)
    bisect_steps = 0
    if out_lo.status == "feasible":
        best = (lo, out_lo.theta)
    else:
        while not _converged(lo, hi, options):
            mid = 0.5 * (lo + hi)
            out_mid = solve_at(mid)
            bisect_steps += 1
            if out_mid.status == "feasible":
                hi, best = mid, (mid, out_mid.theta)
            else:
                lo = mid

    gamma_star, theta_star = best
    params = layout.unpack(theta_star)
    gamma_inv = 1.0 / gamma_star
    margins = {}
    re_dp_min = math.inf
    for blk in blocks:
        margins[(blk.p, blk.channel)] = blk.true_margins(theta_star, gamma_inv, eps)
        re_dp = (blk.d_coef @ theta_star + blk.d_off).real
        re_dp_min = min(re_dp_min, float(re_dp.min()))
    worst = min(float(np.min(v)) for v in margins.values())
    if worst < -1e-9 or re_dp_min < eps - 1e-9:
        raise SolverFailureError(
            f"recomputed margins are negative (min {worst:.3e}); "
            "solver responses were not monotone")
    telemetry = {
        "bisect_steps": bisect_steps,
        "lp_solves": lp_solves,
        "eps": eps,
        "planes": options.planes,
        "plane_factor": (1.0 if options.planes == "adaptive"
                         else 1.0 / math.cos(math.pi / int(options.planes))),
        "wall_time_s": time.perf_counter() - t_start,
        "gamma_bracket": (lo, hi),
    }
    return SynthesisResult(theta=params, gamma=gamma_star, margins=margins,
                           re_dp_min=re_dp_min, telemetry=telemetry)


def closed_loop_data(problem: SynthesisProblem, params: ControllerParameters) -> dict:
    """Per operating point closed-loop factor data for the given controller."""
    out = {}
    for p in problem.scheduling_grid.points:
        p = float(p)
        nk, dk = evaluate_factors(params, p, problem.grid)
        out[p] = assemble_closed_loop(problem.pairs[p], nk, dk)
    return out
