"""Alternating linearized proximal minimization for spherical PCA.

Each iteration takes one proximal-linearized step in ``U`` over the Stiefel
set, followed by one in every column of ``V`` over the unit sphere. Both
subproblems have closed forms:

* ``U(k+1)`` is the polar factor of ``M = 2 (X - U V) V^T + mu U``, the
  maximizer of ``<U, M>`` over orthonormal ``U``;
* ``v_j(k+1) = q / ||q||`` with ``q = 2 U(k+1)^T x_j + (lam - 2) v_j(k)``.

With ``mu, lam > L_c`` the objective decreases by at least
``(min(mu, lam) - L_c) / 2 * ||W(k) - W(k-1)||_F**2`` per iteration, and
``dist(0, subdiff f(W(k))) <= (2 L_c + mu + lam) ||W(k) - W(k-1)||_F``. Every
iteration records both quantities so a run can be audited after the fact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from spca._rng import stream
from spca.errors import DataFormatError, NumericalError, RankError
from spca.model import (
    DataMatrix,
    feasibility_report,
    lipschitz_constant,
    objective,
    unit_columns,
)
from spca.numkit import orthonormalize, thin_svd

INITS = ("svd_of_data", "random_orthonormal")
STEP_RULES = ("fixed", "auto_1p1_lc")
AUTO_STEP_FACTOR = 1.1
# sigma_r(M) / sigma_1(M) below this makes the polar factor non-unique
DEGENERACY_TOL = 1e-12

TRACE_HEADER = (
    "k", "f", "du", "dv", "slack", "criticality_bound", "orth_residual", "colnorm_err",
)


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of one run.

    Under ``step_rule="auto_1p1_lc"`` both proximal weights are set to
    ``1.1 * L_c`` at fit time and ``mu``/``lam`` must be left unset. Under
    ``"fixed"`` both must be given.
    """

    rank: int
    mu: float | None = None
    lam: float | None = None
    max_iters: int = 5000
    stop_tol: float = 1e-7
    seed: int = 0
    init: str = "svd_of_data"
    step_rule: str = "auto_1p1_lc"

    def __post_init__(self):
        if not isinstance(self.rank, (int, np.integer)) or self.rank < 1:
            raise RankError(f"rank must be a positive integer, got {self.rank!r}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.stop_tol >= 0:
            raise ValueError(f"stop_tol must be nonnegative, got {self.stop_tol}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if self.step_rule == "fixed":
            for name in ("mu", "lam"):
                val = getattr(self, name)
                if val is None or not val > 0 or not math.isfinite(val):
                    raise ValueError(f"fixed step rule needs a positive finite {name}, got {val!r}")
        elif self.mu is not None or self.lam is not None:
            raise ValueError("mu/lam are derived under auto_1p1_lc; use step_rule='fixed' to set them")

    def step_sizes(self, l_c: float) -> tuple[float, float]:
        if self.step_rule == "auto_1p1_lc":
            return AUTO_STEP_FACTOR * l_c, AUTO_STEP_FACTOR * l_c
        return float(self.mu), float(self.lam)


@dataclass(frozen=True)
class IterateRecord:
    k: int
    f: float
    du: float
    dv: float
    sufficient_decrease_slack: float
    criticality_bound: float
    orth_residual: float
    worst_column_norm_error: float

    @property
    def gap(self) -> float:
        return math.hypot(self.du, self.dv)


@dataclass(frozen=True)
class FitResult:
    u: np.ndarray
    v: np.ndarray
    trace: tuple[IterateRecord, ...]
    converged: bool
    iters_run: int
    mu: float
    lam: float
    l_c: float
    # iterations whose U-step polar factor was not unique
    degenerate_u_steps: tuple[int, ...] = ()
    # (iteration, column) pairs where q_j = 0 and v_j was retained
    degenerate_v_columns: tuple[tuple[int, int], ...] = ()

    @property
    def objective(self) -> float:
        return self.trace[-1].f


class UStep(NamedTuple):
    u: np.ndarray
    m_k: np.ndarray
    degenerate: bool


class VStep(NamedTuple):
    v: np.ndarray
    degenerate_columns: tuple[int, ...]


class RateEstimate(NamedTuple):
    regime: str
    parameter: float


def _x(x) -> np.ndarray:
    return x.x if isinstance(x, DataMatrix) else DataMatrix(x).x


def u_step(x, u_prev: np.ndarray, v_prev: np.ndarray, mu: float) -> UStep:
    """U-update with its linearization matrix and a degeneracy flag."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    x = _x(x)
    m_k = 2.0 * (x - u_prev @ v_prev) @ v_prev.T + mu * u_prev
    svd = thin_svd(m_k)
    s = svd.singulars
    # thin SVD of an m x r matrix already supplies r orthonormal left vectors,
    # so a rank-deficient M still yields a valid (non-unique) maximizer
    degenerate = bool(s[0] == 0.0 or s[-1] < DEGENERACY_TOL * s[0])
    return UStep(svd.left @ svd.right.T, m_k, degenerate)


def update_u(x, u_prev: np.ndarray, v_prev: np.ndarray, mu: float) -> np.ndarray:
    return u_step(x, u_prev, v_prev, mu).u


def v_step(x, u_next: np.ndarray, v_prev: np.ndarray, lam: float) -> VStep:
    """V-update for all columns; a column with ``q_j = 0`` keeps its previous value."""
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    x = _x(x)
    q = 2.0 * u_next.T @ x + (lam - 2.0) * v_prev
    norms = np.linalg.norm(q, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        q[:, zero] = v_prev[:, zero]
        norms[zero] = np.linalg.norm(v_prev[:, zero], axis=0)
    return VStep(q / norms, tuple(int(j) for j in zero))


def update_v(x, u_next: np.ndarray, v_prev: np.ndarray, lam: float) -> np.ndarray:
    return v_step(x, u_next, v_prev, lam).v


def initialize(x, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    """Feasible starting pair.

    ``svd_of_data`` takes the top-r left singular vectors of X and the
    normalized projections ``U^T X``; a data column orthogonal to that
    subspace starts at the first basis vector. ``random_orthonormal`` draws
    Gaussian factors from the ``"init"`` substream of ``cfg.seed``.
    """
    x = _x(x)
    m, n = x.shape
    r = cfg.rank
    if r > min(m, n):
        raise RankError(f"rank {r} exceeds min(m, n) = {min(m, n)}")
    if cfg.init == "svd_of_data":
        u = thin_svd(x).left[:, :r].copy()
        v = u.T @ x
        zero = np.linalg.norm(v, axis=0) == 0.0
        v[:, zero] = 0.0
        v[0, zero] = 1.0
        return u, unit_columns(v)
    rng = stream(cfg.seed, "init")
    u = orthonormalize(rng.standard_normal((m, r)))
    v = unit_columns(rng.standard_normal((r, n)))
    return u, v


def fit(x, cfg: SolverConfig, init: tuple[np.ndarray, np.ndarray] | None = None) -> FitResult:
    """Run the alternating updates until the iterate gap drops below ``cfg.stop_tol``
    or ``cfg.max_iters`` iterations have run.

    ``init`` overrides ``cfg.init`` with an explicit feasible ``(U0, V0)``.
    Feasibility is asserted after every iteration; drift raises
    :class:`NumericalError`.
    """
    x = _x(x)
    m, n = x.shape
    r = cfg.rank
    l_c = lipschitz_constant(x, r).l_c
    mu, lam = cfg.step_sizes(l_c)

    if init is None:
        u, v = initialize(x, cfg)
    else:
        u = np.array(init[0], dtype=np.float64)
        v = np.array(init[1], dtype=np.float64)
        if u.shape != (m, r) or v.shape != (r, n):
            raise ValueError(f"init shapes {u.shape}, {v.shape} do not match ({m}, {r}), ({r}, {n})")
        if not feasibility_report(u, v).ok():
            raise ValueError("init pair is not feasible")

    decrease_coef = (min(mu, lam) - l_c) / 2.0
    crit_coef = 2.0 * l_c + mu + lam

    f_prev = objective(x, u, v)
    if not math.isfinite(f_prev):
        raise NumericalError("objective is not finite", iteration=0)
    feas = feasibility_report(u, v)
    trace = [IterateRecord(0, f_prev, 0.0, 0.0, 0.0, math.nan, *feas)]
    degenerate_u: list[int] = []
    degenerate_v: list[tuple[int, int]] = []
    converged = False

    for k in range(1, cfg.max_iters + 1):
        us = u_step(x, u, v, mu)
        vs = v_step(x, us.u, v, lam)
        if us.degenerate:
            degenerate_u.append(k)
        degenerate_v.extend((k, j) for j in vs.degenerate_columns)

        du = float(np.linalg.norm(us.u - u))
        dv = float(np.linalg.norm(vs.v - v))
        u, v = us.u, vs.v
        f = objective(x, u, v)
        if not math.isfinite(f):
            raise NumericalError("objective is not finite", iteration=k)
        feas = feasibility_report(u, v)
        if not feas.ok():
            raise NumericalError(
                f"iterate left the feasible set (orth {feas.orth_residual:.3e}, "
                f"colnorm {feas.worst_column_norm_error:.3e})",
                iteration=k,
            )
        gap2 = du * du + dv * dv
        trace.append(
            IterateRecord(
                k, f, du, dv, f_prev - f - decrease_coef * gap2,
                crit_coef * math.sqrt(gap2), *feas,
            )
        )
        f_prev = f
        if math.sqrt(gap2) < cfg.stop_tol:
            converged = True
            break

    return FitResult(
        u=u, v=v, trace=tuple(trace), converged=converged, iters_run=trace[-1].k,
        mu=mu, lam=lam, l_c=l_c,
        degenerate_u_steps=tuple(degenerate_u),
        degenerate_v_columns=tuple(degenerate_v),
    )


def check_sufficient_decrease(
    trace: Sequence[IterateRecord], mu: float, lam: float, l_c: float
) -> float:
    """Worst observed slack in the sufficient-decrease inequality.

    Returns ``min_k f(k-1) - f(k) - (min(mu, lam) - L_c)/2 * (du**2 + dv**2)``
    over consecutive records. A negative value is reported, not raised: runs
    with ``mu`` or ``lam`` below ``L_c`` carry no guarantee.
    """
    if not trace:
        raise ValueError("trace is empty")
    coef = (min(mu, lam) - l_c) / 2.0
    worst = 0.0 if len(trace) == 1 else math.inf
    for prev, cur in zip(trace, trace[1:]):
        worst = min(worst, prev.f - cur.f - coef * (cur.du**2 + cur.dv**2))
    return worst


def _fit_rate(ks: np.ndarray, fs: np.ndarray) -> RateEstimate:
    n = len(fs)
    f_inf = fs[-1]
    cut = n - max(1, math.ceil(0.05 * n))
    excess = fs[:cut] - f_inf
    # near the cutoff the excess is dominated by the error in f_inf itself
    floor = 1000.0 * max(fs[cut] - f_inf, 0.0)
    keep = (excess > floor) & (ks[:cut] > 0)
    if keep.sum() < 3:
        return RateEstimate("inconclusive", math.nan)
    k = ks[:cut][keep].astype(np.float64)
    y = np.log(excess[keep])

    lin, lin_res = np.polyfit(k, y, 1, full=True)[:2]
    sub, sub_res = np.polyfit(np.log(k), y, 1, full=True)[:2]
    lin_sse = float(lin_res[0]) if lin_res.size else 0.0
    sub_sse = float(sub_res[0]) if sub_res.size else 0.0
    if lin_sse <= sub_sse:
        return RateEstimate("linear", float(np.exp(lin[0])))
    return RateEstimate("sublinear", float(sub[0]))


def estimate_rate(trace: Sequence[IterateRecord]) -> RateEstimate:
    """Empirical convergence regime of the objective along a trace.

    The limit is taken to be the last recorded objective. The excess
    ``f(k) - f_inf`` is fit against ``k`` (linear regime, parameter is the
    ratio ``rho``) and against ``log k`` (sublinear regime, parameter is the
    power-law exponent); the fit with the smaller residual wins. The last 5%
    of records, and records whose excess is within three decades of the
    excess at that cutoff, are left out of both fits.

    ``"finite"`` means the iterates became exactly stationary before the
    cutoff; its parameter is the first stationary iteration.
    """
    if len(trace) < 10:
        raise ValueError(f"trace too short for a rate estimate: {len(trace)} < 10")
    ks = np.array([rec.k for rec in trace])
    fs = np.array([rec.f for rec in trace], dtype=np.float64)
    n = len(fs)
    cut = n - max(1, math.ceil(0.05 * n))

    still = [rec.du == 0.0 and rec.dv == 0.0 and rec.f == fs[-1] for rec in trace]
    first = n
    while first > 0 and still[first - 1]:
        first -= 1
    if first < cut:
        return RateEstimate("finite", float(trace[first].k))
    return _fit_rate(ks, fs)


def _fmt(value: float) -> str:
    return format(value, ".17g")


def write_trace_csv(path, trace: Iterable[IterateRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for rec in trace:
            w.writerow([
                rec.k, _fmt(rec.f), _fmt(rec.du), _fmt(rec.dv),
                _fmt(rec.sufficient_decrease_slack), _fmt(rec.criticality_bound),
                _fmt(rec.orth_residual), _fmt(rec.worst_column_norm_error),
            ])


def read_trace_csv(path) -> list[IterateRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise DataFormatError(f"{path}: expected trace header {','.join(TRACE_HEADER)}", row=1)
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TRACE_HEADER):
                raise DataFormatError(
                    f"{path}: expected {len(TRACE_HEADER)} fields, got {len(row)}", row=lineno
                )
            try:
                out.append(IterateRecord(int(row[0]), *(float(c) for c in row[1:])))
            except ValueError:
                raise DataFormatError(f"{path}: unparseable trace record", row=lineno) from None
    return out
