"""Difference-in-differences regression, ``y ~ time * lockdown * x``.

Treatment coding drops the first declared level of every factor; ``time`` is
categorical with the earliest year as reference. The fit is ordinary least
squares through a column-pivoted QR factorisation, with classical or HC1
standard errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import EmptyData, InputError, InsufficientData, RankDeficient, UnknownLevel

VCOV_KINDS = ("classical", "hc1")


@dataclass(frozen=True)
class DidRecord:
    y: float
    time: object
    lockdown: int
    x: object

    def __post_init__(self):
        if not math.isfinite(float(self.y)):
            raise InputError(f"non-finite response {self.y!r}")
        if self.lockdown not in (0, 1, True, False):
            raise InputError(f"lockdown must be 0 or 1, got {self.lockdown!r}")


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    reference: Mapping[str, object]
    levels: Mapping[str, tuple]
    x_numeric: bool = False

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def k(self) -> int:
        return self.X.shape[1]


def _levels(name: str, values: Sequence, declared: Mapping[str, Sequence] | None) -> tuple:
    if declared and name in declared:
        lv = tuple(declared[name])
        allowed = set(lv)
        for v in values:
            if v not in allowed:
                raise UnknownLevel(name, v)
        return lv
    return tuple(sorted(set(values)))


def _dummies(values: Sequence, levels: tuple) -> np.ndarray:
    idx = {lv: i for i, lv in enumerate(levels)}
    codes = np.array([idx[v] for v in values])
    return (codes[:, None] == np.arange(1, len(levels))[None, :]).astype(float)


def build_design(records: Sequence[DidRecord], factor_levels: Mapping[str, Sequence] | None = None) -> DesignMatrix:
    """Treatment-coded design for ``y ~ time * lockdown * x``.

    Column order: intercept, time, lockdown, x, time:lockdown, time:x,
    lockdown:x, time:lockdown:x. ``x`` is categorical when its levels are
    declared or any value is a string, numeric otherwise.
    """
    if not records:
        raise EmptyData("no records to build a design from")
    y = np.array([float(r.y) for r in records])
    times = [r.time for r in records]
    xs = [r.x for r in records]
    t_lv = _levels("time", times, factor_levels)
    T = _dummies(times, t_lv)
    t_names = [f"time[{lv}]" for lv in t_lv[1:]]
    L = np.array([[float(r.lockdown)] for r in records])

    x_numeric = not (factor_levels and "x" in factor_levels) and not any(isinstance(v, str) for v in xs)
    if x_numeric:
        X_ = np.array([[float(v)] for v in xs])
        if not np.all(np.isfinite(X_)):
            raise InputError("non-finite covariate value")
        x_lv: tuple = ()
        x_names = ["x"]
    else:
        x_lv = _levels("x", xs, factor_levels)
        X_ = _dummies(xs, x_lv)
        x_names = [f"x[{lv}]" for lv in x_lv[1:]]

    def cross(A, an, B, bn):
        cols = [A[:, i] * B[:, j] for i in range(A.shape[1]) for j in range(B.shape[1])]
        names = [f"{a}:{b}" for a in an for b in bn]
        return (np.column_stack(cols) if cols else np.empty((len(records), 0))), names

    TL, tl_n = cross(T, t_names, L, ["lockdown"])
    TX, tx_n = cross(T, t_names, X_, x_names)
    LX, lx_n = cross(L, ["lockdown"], X_, x_names)
    TLX, tlx_n = cross(TL, tl_n, X_, x_names)
    blocks = [np.ones((len(records), 1)), T, L, X_, TL, TX, LX, TLX]
    names = ["intercept", *t_names, "lockdown", *x_names, *tl_n, *tx_n, *lx_n, *tlx_n]
    X = np.column_stack(blocks)
    ref = {"time": t_lv[0], "lockdown": 0}
    if not x_numeric:
        ref["x"] = x_lv[0]
    return DesignMatrix(X, y, tuple(names), ref, {"time": t_lv, "x": x_lv}, x_numeric)


@dataclass(frozen=True, eq=False)
class DidFit:
    columns: tuple[str, ...]
    coefficients: np.ndarray
    stderr: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    residual_df: int
    r_squared: float
    vcov_kind: str
    n_obs: int = 0
    rss: float = float("nan")
    residuals: np.ndarray | None = field(default=None, repr=False)

    def index(self, name: str) -> int:
        return self.columns.index(name)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.index(name)])

    def se(self, name: str) -> float:
        return float(self.stderr[self.index(name)])

    def p(self, name: str) -> float:
        return float(self.p_values[self.index(name)])


def _collinear_set(X: np.ndarray, piv: np.ndarray, rank: int, names: Sequence[str]) -> list[str]:
    basis = piv[:rank]
    involved = set()
    for j in piv[rank:]:
        involved.add(int(j))
        if rank:
            coef, *_ = np.linalg.lstsq(X[:, basis], X[:, j], rcond=None)
            scale = max(1.0, np.abs(coef).max())
            involved.update(int(b) for b, c in zip(basis, coef) if abs(c) > 1e-8 * scale)
    return [names[i] for i in sorted(involved)]


def fit_ols(design: DesignMatrix, vcov: str = "classical") -> DidFit:
    if vcov not in VCOV_KINDS:
        raise InputError(f"vcov must be one of {VCOV_KINDS}, got {vcov!r}")
    X, y = design.X, design.y
    n, k = X.shape
    if n < k:
        raise InsufficientData(f"{n} observations for {k} regressors")
    Q, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = max(n, k) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise RankDeficient(_collinear_set(X, piv, rank, design.columns))

    Rinv = scipy.linalg.solve_triangular(R, np.eye(k))
    beta = np.empty(k)
    beta[piv] = Rinv @ (Q.T @ y)
    xtx_inv = np.empty((k, k))
    xtx_inv[np.ix_(piv, piv)] = Rinv @ Rinv.T

    resid = y - X @ beta
    rss = float(resid @ resid)
    df = n - rank
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else (1.0 if rss == 0 else float("nan"))

    if df > 0:
        if vcov == "classical":
            cov = (rss / df) * xtx_inv
        else:
            meat = (X * (resid**2)[:, None]).T @ X
            cov = (n / df) * xtx_inv @ meat @ xtx_inv
        se = np.sqrt(np.maximum(np.diag(cov), 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = beta / se
        p = np.where(np.isfinite(t), 2.0 * stats.t.sf(np.abs(t), df), np.where(beta == 0, 1.0, 0.0))
        t = np.where(np.isfinite(t), t, np.nan)
    else:
        se = np.full(k, np.nan)
        t = np.full(k, np.nan)
        p = np.full(k, np.nan)
    return DidFit(design.columns, beta, se, t, p, df, r2, vcov, n, rss, resid)


@dataclass(frozen=True)
class DidTerm:
    name: str
    estimate: float
    stderr: float | None
    ci_low: float | None
    ci_high: float | None
    p_value: float | None
    significant: bool


def did_report(fit: DidFit, level: float = 0.95) -> list[DidTerm]:
    """Lockdown main effect and every lockdown interaction, with CIs.

    With zero residual degrees of freedom the uncertainty fields are ``None``.
    """
    terms = []
    alpha = 1.0 - level
    q = float(stats.t.ppf(1 - alpha / 2, fit.residual_df)) if fit.residual_df > 0 else None
    for i, name in enumerate(fit.columns):
        if "lockdown" not in name.split(":"):
            continue
        est = float(fit.coefficients[i])
        se = float(fit.stderr[i])
        if q is None or not math.isfinite(se):
            terms.append(DidTerm(name, est, None, None, None, None, False))
            continue
        lo, hi = est - q * se, est + q * se
        p = float(fit.p_values[i])
        terms.append(DidTerm(name, est, se, lo, hi, p, bool(lo > 0 or hi < 0)))
    return terms
