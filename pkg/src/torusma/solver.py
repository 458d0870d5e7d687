"""Newton-continuity solver for the torus Monge-Ampere problem.

Solves, for a pair (u, b) with u a real function on the torus and b a
constant,

    log det G(u) = log det h + t * Fhat + b,        G(u) > 0,

where G(u) = h + ((Delta u) g - Hess u)/(n-1) is the updated metric and
Fhat = F + log det g - log det h.  At t = 1 this is exactly

    (omega_h + ((Delta u) omega - i ddbar u)/(n-1))^n = e^{F+b} omega^n,

while at t = 0 the pair (0, 0) is an exact solution, which makes t a clean
continuation parameter.  Each t-step is solved by damped Newton iteration;
the linearized operator W^{jk} v_{jk} - db is inverted by conjugate
gradients on the preconditioned normal equations, with the constant
coefficient operator (inverted exactly through its Fourier symbol) as the
preconditioner.

Gauge: u is kept grid-mean-zero internally (a linear constraint compatible
with the Fourier basis); shifting u by a constant changes neither the
updated metric nor b, and the sup-zero normalization is applied only when
reporting.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import forms
from .fields import MatrixField, ScalarField, TorusGrid, spectral_hessian

__all__ = [
    "ProblemSpec",
    "SolverState",
    "StepRecord",
    "ConeViolation",
    "LinearSolveError",
    "ContinuationError",
    "residual",
    "linearized_apply",
    "newton_solve_linear",
    "continuity_solve",
    "newton_refine",
    "manufacture",
    "estimate_b_bounds",
    "sup_gauge",
    "write_diagnostics_csv",
    "bandlimit_tail_ratio",
]

DEFAULT_TOL = 1e-10
DEFAULT_INNER_TOL = 1e-3
DEFAULT_CONE_FLOOR = 1e-8
MIN_DT = 1e-4
MAX_KRYLOV = 500
MAX_HALVINGS = 30
MANUFACTURE_MARGIN = 0.1


class ConeViolation(ValueError):
    """The candidate state left the admissible positivity cone."""


class LinearSolveError(RuntimeError):
    pass


class ContinuationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    """Problem data: constant Kahler metric g, Hermitian metric field h, datum F."""

    grid: TorusGrid
    g: np.ndarray
    h: MatrixField
    F: ScalarField

    def __post_init__(self):
        g = forms.hermitize(self.g)
        if g.shape != (self.grid.n, self.grid.n):
            raise ValueError("metric g has wrong shape")
        forms.check_metric(g)
        object.__setattr__(self, "g", g)
        if self.h.grid != self.grid or self.F.grid != self.grid:
            raise ValueError("h and F must live on the problem grid")
        if np.min(np.linalg.eigvalsh(forms.hermitize(self.h.values))) <= 0.0:
            raise ValueError("h must be pointwise positive definite")

    def bandlimit_warnings(self):
        """Soft check that F is spectrally resolved (top third of modes tiny)."""
        ratio = bandlimit_tail_ratio(self.F)
        if ratio > 1e-10:
            return [f"F spectral tail ratio {ratio:.2e} exceeds 1e-10; data may be under-resolved"]
        return []


def bandlimit_tail_ratio(f: ScalarField) -> float:
    """max |Fourier coefficient| over the top third of modes, relative to the peak."""
    grid = f.grid
    fhat = np.abs(np.fft.fftn(f.values))
    peak = float(fhat.max())
    if peak == 0.0:
        return 0.0
    cut = grid.N / 3.0
    mask = np.zeros(grid.shape, dtype=bool)
    for p in range(len(grid.axes)):
        k = np.abs(np.fft.fftfreq(grid.N) * grid.N)
        shape = [1] * len(grid.axes)
        shape[p] = grid.N
        mask |= k.reshape(shape) > cut
    if not mask.any():
        return 0.0
    return float(fhat[mask].max() / peak)


@dataclass(frozen=True)
class SolverState:
    u: ScalarField          # mean-zero gauge
    b: float
    t: float
    residual_inf: float
    cone_margin_min: float
    newton_iters: int


@dataclass
class StepRecord:
    step: int
    t: float
    newton_iters: int
    residual_inf: float
    cone_margin: float
    b: float
    residual_history: list = dc_field(default_factory=list, repr=False)


def sup_gauge(u: ScalarField) -> ScalarField:
    """The sup-zero representative of the gauge orbit (b is unchanged by the shift)."""
    return ScalarField(u.grid, u.values - np.max(u.values))


class _Prepared:
    """Per-problem caches: inverse metric, log-determinants, Fourier symbols."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.grid = spec.grid
        self.n = spec.grid.n
        self.g = np.asarray(spec.g, dtype=complex)
        self.ginv = np.linalg.inv(self.g)
        self.cinv = np.linalg.inv(np.linalg.cholesky(self.g))
        self.logdet_g = float(np.linalg.slogdet(self.g)[1])
        self.hvals = spec.h.values
        self.logdet_h = np.linalg.slogdet(self.hvals)[1].real
        self.fhat = spec.F.values + self.logdet_g - self.logdet_h
        c = self.grid.dz_symbols()
        self.c = c
        self.hess_sym = [[-c[a] * np.conj(c[b]) for b in range(self.n)] for a in range(self.n)]

    def updated_metric(self, u_values):
        hess = _hessian_values(self.grid, u_values)
        rev = forms.trace_reverse(self.g, hess)
        return self.hvals + rev / (self.n - 1)

    def margin_field(self, gt):
        m = np.einsum("ab,...bc,dc->...ad", self.cinv, gt, np.conj(self.cinv))
        return np.linalg.eigvalsh(forms.hermitize(m))[..., 0]

    def residual_values(self, gt, b, t):
        return np.linalg.slogdet(gt)[1].real - self.logdet_h - t * self.fhat - b


def _hessian_values(grid, u_values):
    return spectral_hessian(ScalarField(grid, u_values)).values


def _mean(values):
    return float(np.sum(values) / values.size)


def residual(spec: ProblemSpec, u: ScalarField, b: float, t: float) -> ScalarField:
    """Pointwise residual log det G(u) - log det h - t*Fhat - b.

    Identically zero exactly at a solution of the t-member of the family;
    raises ConeViolation if the updated metric is not positive definite
    somewhere.
    """
    prep = _Prepared(spec)
    gt = prep.updated_metric(u.values)
    if float(np.min(prep.margin_field(gt))) <= 0.0:
        raise ConeViolation("left cone of (n-1)-PSH admissibility")
    return ScalarField(spec.grid, prep.residual_values(gt, b, t))


def linearized_apply(spec: ProblemSpec, state: SolverState, v: ScalarField, db: float) -> ScalarField:
    """Gateaux derivative of the residual at (state.u, state.b) in direction (v, db)."""
    prep = _Prepared(spec)
    gt = prep.updated_metric(state.u.values)
    w = forms.linearization_coefficients(prep.g, gt)
    hv = _hessian_values(spec.grid, v.values)
    lin = np.einsum("...ab,...ba->...", w, hv).real - db
    return ScalarField(spec.grid, lin)


class _LinearOperator:
    """The variable-coefficient elliptic operator L v = sum W_{ab} (Hess v)_{ba}."""

    def __init__(self, prep: _Prepared, w):
        self.prep = prep
        self.w = w
        n = prep.n
        w0 = forms.hermitize(w.reshape(-1, n, n).mean(axis=0))
        sym = np.zeros(prep.grid.shape)
        for a in range(n):
            for b in range(n):
                sym = sym + (np.conj(prep.c[a]) * w0[a, b] * prep.c[b]).real
        self.bsym = sym  # symbol of -L0, positive away from the zero mode

    def apply(self, v):
        vhat = np.fft.fftn(v)
        n = self.prep.n
        out = np.zeros(self.prep.grid.shape)
        for a in range(n):
            for b in range(a, n):
                comp = np.fft.ifftn(self.prep.hess_sym[a][b] * vhat)
                if a == b:
                    out += self.w[..., a, a].real * comp.real
                else:
                    out += 2.0 * (np.conj(self.w[..., a, b]) * comp).real
        return out

    def apply_adjoint(self, y):
        n = self.prep.n
        acc = np.zeros(self.prep.grid.shape, dtype=complex)
        for a in range(n):
            for b in range(n):
                acc = acc + self.prep.hess_sym[a][b] * np.fft.fftn(self.w[..., b, a] * y)
        return np.fft.ifftn(acc).real

    def precond_inv(self, f):
        fhat = np.fft.fftn(f)
        out = np.zeros_like(fhat)
        np.divide(fhat, self.bsym, out=out, where=self.bsym > 0)
        return np.fft.ifftn(out).real

    def precond_apply_norm(self, f):
        """RMS norm of (-L0) f, evaluated in Fourier space."""
        fhat = np.fft.fftn(f)
        return float(np.sqrt(np.sum(np.abs(self.bsym * fhat) ** 2)) / f.size)


def _project(v):
    return v - np.sum(v) / v.size


def _solve_linear(prep, w, rhs_values, inner_tol=DEFAULT_INNER_TOL, maxiter=MAX_KRYLOV):
    """Solve L v - db = -rhs with mean(v) = 0.

    Conjugate gradients on the normal equations of Binv L, where B is the
    grid-mean constant-coefficient operator inverted by Fourier symbol.  The
    mean component of the equation is matched exactly by db.
    """
    op = _LinearOperator(prep, w)
    rhs_rms = float(np.sqrt(np.sum(rhs_values**2)) / np.sqrt(rhs_values.size))
    if rhs_rms == 0.0:
        return np.zeros_like(rhs_values), 0.0, 0
    b0 = -_project(rhs_values)

    def a_hat(v):
        return op.precond_inv(_project(op.apply(v)))

    def a_hat_adj(y):
        return _project(op.apply_adjoint(op.precond_inv(y)))

    bhat = op.precond_inv(b0)
    x = np.zeros_like(rhs_values)
    rhat = bhat.copy()
    d = a_hat_adj(rhat)
    dd = float(np.sum(d * d))
    p = d.copy()
    target = inner_tol * rhs_rms
    iters = 0
    converged = False
    while iters < maxiter and dd > 0.0:
        q = a_hat(p)
        qq = float(np.sum(q * q))
        if qq == 0.0:
            break
        alpha = dd / qq
        x = x + alpha * p
        rhat = rhat - alpha * q
        iters += 1
        # true residual of the projected equation: B rhat = b0 - P L x
        if op.precond_apply_norm(rhat) <= target:
            converged = True
            break
        dnew = a_hat_adj(rhat)
        ddnew = float(np.sum(dnew * dnew))
        p = dnew + (ddnew / dd) * p
        d, dd = dnew, ddnew
    lx = op.apply(x)
    true_res = float(np.sqrt(np.sum(_project(lx + rhs_values) ** 2) / x.size))
    if not converged and true_res > max(target, 1e-13):
        raise LinearSolveError("linear solve stagnated")
    db = _mean(lx) + _mean(rhs_values)
    return _project(x), db, iters


def newton_solve_linear(spec: ProblemSpec, state: SolverState, rhs: ScalarField):
    """Solve linearized_apply(v, db) = -rhs at the given state; returns (v, db)."""
    prep = _Prepared(spec)
    gt = prep.updated_metric(state.u.values)
    w = forms.linearization_coefficients(prep.g, gt)
    v, db, _ = _solve_linear(prep, w, rhs.values)
    return ScalarField(spec.grid, v), db


def _newton(prep, u_values, b, t, tol, inner_tol, max_iters=40,
            cone_floor=DEFAULT_CONE_FLOOR):
    """Damped Newton at fixed t.  Returns (ok, u, b, rinf, margin, iters, history)."""
    gt = prep.updated_metric(u_values)
    margin = float(np.min(prep.margin_field(gt)))
    if margin <= 0.0:
        raise ConeViolation("left cone of (n-1)-PSH admissibility")
    r = prep.residual_values(gt, b, t)
    rinf = float(np.max(np.abs(r)))
    history = [rinf]
    iters = 0
    while rinf > tol and iters < max_iters:
        w = forms.linearization_coefficients(prep.g, gt)
        v, db, _ = _solve_linear(prep, w, r, inner_tol)
        s = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS + 1):
            u_try = _project(u_values + s * v)
            b_try = b + s * db
            gt_try = prep.updated_metric(u_try)
            m_try = float(np.min(prep.margin_field(gt_try)))
            if m_try > max(cone_floor, 0.01 * margin):
                r_try = prep.residual_values(gt_try, b_try, t)
                rinf_try = float(np.max(np.abs(r_try)))
                if rinf_try < rinf:
                    u_values, b, gt, margin = u_try, b_try, gt_try, m_try
                    r, rinf = r_try, rinf_try
                    accepted = True
                    break
            s *= 0.5
        if not accepted:
            return False, u_values, b, rinf, margin, iters, history
        iters += 1
        history.append(rinf)
    return rinf <= tol, u_values, b, rinf, margin, iters, history


def continuity_solve(spec: ProblemSpec, schedule=None, tol=DEFAULT_TOL,
                     inner_tol=DEFAULT_INNER_TOL, cone_floor=DEFAULT_CONE_FLOOR,
                     min_dt=MIN_DT, max_newton=40):
    """March t from 0 to 1, solving each family member by damped Newton.

    Returns (state, records): the SolverState at t = 1 with u in mean-zero
    gauge, and the per-step diagnostic records.  The t = 0 member is solved
    exactly by (0, 0) by construction of Fhat.  On Newton failure the step is
    bisected; steps below ``min_dt`` abort with ContinuationError.
    """
    prep = _Prepared(spec)
    if schedule is None:
        schedule = [(k + 1) / 8 for k in range(8)]
    schedule = [float(t) for t in schedule]
    if not schedule or abs(schedule[-1] - 1.0) > 1e-14:
        raise ValueError("schedule must end at t = 1")
    if any(t2 <= t1 for t1, t2 in zip([0.0] + schedule[:-1], schedule)):
        raise ValueError("schedule must be strictly increasing in (0, 1]")
    schedule[-1] = 1.0

    u = np.zeros(spec.grid.shape)
    b = 0.0
    t_cur = 0.0
    gt0 = prep.updated_metric(u)
    margin0 = float(np.min(prep.margin_field(gt0)))
    if margin0 <= 0.0:
        raise ConeViolation("left cone of (n-1)-PSH admissibility")
    r0 = float(np.max(np.abs(prep.residual_values(gt0, b, 0.0))))
    records = [StepRecord(step=0, t=0.0, newton_iters=0, residual_inf=r0,
                          cone_margin=margin0, b=b, residual_history=[r0])]
    pending = list(schedule)
    total_iters = 0
    step = 0
    last = records[0]
    while pending:
        t_next = pending[0]
        ok, u_new, b_new, rinf, margin, iters, history = _newton(
            prep, u, b, t_next, tol, inner_tol, max_iters=max_newton,
            cone_floor=cone_floor)
        total_iters += iters
        if not ok:
            if (t_next - t_cur) / 2.0 < min_dt:
                raise ContinuationError("continuation failed")
            pending.insert(0, 0.5 * (t_cur + t_next))
            continue
        u, b, t_cur = u_new, b_new, t_next
        pending.pop(0)
        step += 1
        last = StepRecord(step=step, t=t_cur, newton_iters=iters, residual_inf=rinf,
                          cone_margin=margin, b=b, residual_history=history)
        records.append(last)
    state = SolverState(u=ScalarField(spec.grid, _project(u)), b=b, t=1.0,
                        residual_inf=last.residual_inf,
                        cone_margin_min=last.cone_margin, newton_iters=total_iters)
    return state, records


def newton_refine(spec: ProblemSpec, u: ScalarField, b: float, t: float = 1.0,
                  tol=DEFAULT_TOL, inner_tol=DEFAULT_INNER_TOL):
    """Damped Newton from a warm start at fixed t; returns a converged SolverState.

    The start must be admissible; raises ContinuationError if Newton stalls.
    """
    prep = _Prepared(spec)
    ok, uv, bv, rinf, margin, iters, _ = _newton(
        prep, _project(np.asarray(u.values, dtype=float)), float(b), t, tol, inner_tol)
    if not ok:
        raise ContinuationError("continuation failed")
    return SolverState(u=ScalarField(spec.grid, _project(uv)), b=bv, t=t,
                       residual_inf=rinf, cone_margin_min=margin, newton_iters=iters)


def manufacture(grid: TorusGrid, g, h: MatrixField, u_star: ScalarField,
                margin_min=MANUFACTURE_MARGIN):
    """Datum F for which (u_star, 0) is an exact discrete solution at t = 1.

    F = log det G(u_star) - log det g.  The caller is expected to scale
    u_star until the admissibility margin clears ``margin_min``.
    """
    g = forms.hermitize(g)
    forms.check_metric(g)
    hess = _hessian_values(grid, np.asarray(u_star.values, dtype=float))
    gt = forms.updated_metric(g, h.values, hess)
    margin = float(np.min(forms.cone_margin(g, gt)))
    if margin < margin_min:
        raise ValueError("scale down u_star")
    fvals = np.linalg.slogdet(gt)[1].real - float(np.linalg.slogdet(g)[1])
    return ScalarField(grid, fvals), 0.0


def estimate_b_bounds(spec: ProblemSpec):
    """Maximum-principle bracket for the constant b of any solution.

    At an extremum of u the update term has a sign, so
    b <= sup(log det h - log det g - F) and b >= inf of the same field.
    """
    prep = _Prepared(spec)
    fld = prep.logdet_h - prep.logdet_g - spec.F.values
    return float(np.min(fld)), float(np.max(fld))


def write_diagnostics_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "newton_iters", "residual_inf", "cone_margin", "b"])
        for rec in records:
            writer.writerow([rec.step, repr(rec.t), rec.newton_iters,
                             repr(rec.residual_inf), repr(rec.cone_margin), repr(rec.b)])
