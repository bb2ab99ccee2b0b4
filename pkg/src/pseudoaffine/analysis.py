"""Diagnostics: periodic data, pseudo-affinity, chi traces, linearization.

Branch pairs are anything with ``eval(i, t)`` and ``eval_derivative(i, t)``:
an :class:`~pseudoaffine.ifs.IfsBranchPair` or an :class:`ExternalBranches`
wrapping user-supplied callables.

For a word w = w1...wn, F_w = f_{w1} o ... o f_{wn}; its fixed point is
the point coded by w^inf.  A pair is pseudo-affine of slope lam when both
branches have derivative lam on the attractor; then every cylinder map has
F_w'(x_w) = lam^n.  That is the periodic-data (Livsic) condition checked
by :func:`livsic_check`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cantor import GapTable
from .errors import ConvergenceError, DepthError, DomainError
from .proportions import ProportionPair
from .words import Coding, format_word


@dataclass(frozen=True, eq=False)
class ExternalBranches:
    """Two user-supplied contractions of [0, 1] with their derivatives."""

    f0: Callable[[float], float]
    f1: Callable[[float], float]
    df0: Callable[[float], float]
    df1: Callable[[float], float]

    def eval(self, i, t, tol=None):
        return (self.f0 if i == 0 else self.f1)(t)

    def eval_derivative(self, i, t, tol=None):
        return (self.df0 if i == 0 else self.df1)(t)


def affine_branches(slope0: float, slope1: float | None = None) -> ExternalBranches:
    """f0(t) = slope0 t and f1(t) = 1 - slope1 (1 - t)."""
    s1 = slope0 if slope1 is None else slope1
    return ExternalBranches(lambda t: slope0 * t, lambda t: 1.0 - s1 * (1.0 - t),
                            lambda t: slope0, lambda t: s1)


@dataclass(frozen=True)
class PeriodicPoint:
    word: str
    point: float
    derivative_product: float
    iterations: int


def apply_word(branches, w: str, x: float) -> float:
    """F_w(x); the last letter acts first."""
    for c in reversed(w):
        x = float(branches.eval(int(c), x))
    return x


def orbit_derivative(branches, w: str, x: float) -> float:
    """F_w'(x) by the chain rule along the orbit of x."""
    prod = 1.0
    for c in reversed(w):
        i = int(c)
        prod *= float(branches.eval_derivative(i, x))
        x = float(branches.eval(i, x))
    return prod


def fixed_point(branches, w: str, tol: float = 1e-12) -> PeriodicPoint:
    """Fixed point of F_w by iteration from 1/2, with F_w' there."""
    if not w or set(w) - {"0", "1"}:
        raise DomainError("fixed_point needs a non-empty binary word")
    x = 0.5
    mu = orbit_derivative(branches, w, x)
    if not (0.0 < mu < 1.0):
        raise DomainError(f"F_{w} is not a contraction at 1/2 (derivative {mu})")
    budget = int(math.ceil(math.log(tol) / math.log(mu))) + 10
    ratio, prev = mu, None
    for k in range(1, budget + 1):
        y = apply_word(branches, w, x)
        step = abs(y - x)
        x = y
        if prev is not None:
            ratio = step / prev if prev > 0 else 0.0
            if ratio >= 1.0 and step > tol:
                raise DomainError(f"iterates of F_{w} do not contract (ratio {ratio})")
        if step <= tol * (1.0 - min(ratio, 0.5)) or step <= 4 * math.ulp(max(abs(x), 1e-300)):
            break
        prev = step
    else:
        raise DomainError(f"F_{w} iteration did not settle within {budget} steps")
    d = orbit_derivative(branches, w, x)
    if not (0.0 < d < 1.0):
        raise DomainError(f"derivative {d} of F_{w} at its fixed point is not in (0, 1)")
    return PeriodicPoint(word=w, point=x, derivative_product=d, iterations=k)


@dataclass(frozen=True)
class LivsicReport:
    lambda_hat: float
    max_len: int
    worst_word: str
    worst_dev: float
    worst_rel_dev: float
    passed: bool
    n_words: int

    def to_dict(self) -> dict:
        return {"lambda_hat": self.lambda_hat, "max_len": self.max_len,
                "worst_word": format_word(self.worst_word), "worst_dev": self.worst_dev,
                "worst_rel_dev": self.worst_rel_dev, "pass": self.passed,
                "n_words": self.n_words}


def livsic_check(branches, max_len: int = 8, rel_tol: float = 1e-6,
                 tol: float = 1e-13) -> LivsicReport:
    """Compare F_w'(x_w) with lam_hat^|w| for every word of length 1..max_len.

    lam_hat is f0' at the fixed point of f0.  ``worst_word`` maximizes the
    absolute deviation; the pass criterion is relative.
    """
    lam_hat = fixed_point(branches, "0", tol).derivative_product
    worst = ("", 0.0, 0.0)
    passed = True
    count = 0
    for n in range(1, max_len + 1):
        target = lam_hat ** n
        for j in range(2 ** n):
            w = format(j, f"0{n}b")
            d = fixed_point(branches, w, tol).derivative_product
            dev = abs(d - target)
            count += 1
            if dev > rel_tol * target:
                passed = False
            if dev > worst[1]:
                worst = (w, dev, dev / target)
    return LivsicReport(lam_hat, max_len, worst[0], worst[1], worst[2], passed, count)


def pseudo_affinity_report(branches, table: GapTable, max_len: int) -> dict:
    """Per-level max of |lam_i(w) - lam| read from the table, plus endpoint slopes.

    ``per_level[n]`` is the largest deviation of a proportion of a word of
    length n from the slope lam; ``endpoint_dev`` is the largest
    |f_i'(x) - lam| over the gap endpoints of length <= max_len.
    """
    if table.depth < max_len + 1:
        raise DepthError(f"table depth {table.depth} below max_len + 1 = {max_len + 1}")
    lam = table.lam
    per_level = []
    for n in range(max_len + 1):
        parent = np.concatenate([table.psi[n], table.psi[n]])
        dev = np.abs(table.psi[n + 1] / parent - lam)
        per_level.append(float(dev.max()))
    pts = np.concatenate([np.concatenate([table.a[n], table.b[n]]) for n in range(max_len + 1)])
    endpoint = 0.0
    for i in (0, 1):
        d = np.asarray(branches.eval_derivative(i, pts), dtype=float)
        endpoint = max(endpoint, float(np.max(np.abs(d - lam))))
    return {"max_dev": max(per_level), "per_level": per_level, "endpoint_dev": endpoint}


@dataclass(frozen=True)
class ChiTrace:
    coding: Coding
    values: list  # (n, chi_n)

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["n", "chi"])
        for n, v in self.values:
            out.writerow([n, f"{v:.17g}"])
        return buf.getvalue()


def chi_trace(theta: ProportionPair, eta: ProportionPair, a: Coding | str,
              n_max: int) -> ChiTrace:
    """chi_n = Psi_eta(a1..an) / Psi_theta(a1..an), accumulated factor by factor."""
    if isinstance(a, str):
        a = Coding.parse(a)
    values = [(0, 1.0)]
    for n in range(1, n_max + 1):
        w = a.head(n)
        chi = 1.0
        for k in range(n):
            i, suffix = int(w[k]), w[k + 1:]
            chi *= eta.proportion(i, suffix) / theta.proportion(i, suffix)
        values.append((n, chi))
    return ChiTrace(a, values)


def conjugacy_verdict(traces, osc_tol: float = 1e-6) -> dict:
    """Three-way finite-depth verdict from chi traces on several codings.

    Each trace is judged on the last half of its values: a non-monotone
    swing of at least osc_tol means ``oscillates``; all swings below osc_tol
    means ``converges`` (with the spread of final values across codings);
    anything else (a slow monotone drift) is ``inconclusive``.
    """
    traces = list(traces)
    if not traces:
        raise DomainError("no traces given")
    rows = []
    for tr in traces:
        vals = np.array([v for _, v in tr.values])
        tail = vals[len(vals) // 2:]
        diffs = np.diff(tail)
        monotone = bool((diffs >= 0).all() or (diffs <= 0).all())
        rows.append({"coding": str(tr.coding), "sup": float(tail.max()),
                     "inf": float(tail.min()), "swing": float(tail.max() - tail.min()),
                     "monotone": monotone, "last": float(vals[-1])})
    osc = [r for r in rows if r["swing"] >= osc_tol and not r["monotone"]]
    if osc:
        worst = max(osc, key=lambda r: r["swing"])
        return {"verdict": "oscillates", "evidence": worst, "traces": rows}
    if all(r["swing"] < osc_tol for r in rows):
        lasts = [r["last"] for r in rows]
        return {"verdict": "converges", "evidence": {"spread": max(lasts) - min(lasts),
                                                     "limit": lasts[0]}, "traces": rows}
    drift = max(rows, key=lambda r: r["swing"])
    return {"verdict": "inconclusive", "evidence": drift, "traces": rows}


@dataclass(frozen=True, eq=False)
class Linearization:
    """h(t) = lim lam^-n g^n(t) sampled on a grid."""

    grid: np.ndarray
    h: np.ndarray
    lam: float
    iterations: int
    residual: float
    h_fn: Callable = field(repr=False)
    conjugated: np.ndarray | None = None

    def h_inverse(self, s):
        return np.interp(s, self.h, self.grid)


def linearize_branch(g: Callable, grid, tol: float = 1e-12, lam: float | None = None,
                     s_hint=None, g1: Callable | None = None, max_iter: int = 2000
                     ) -> Linearization:
    """Koenigs linearization of a contraction g with g(0) = 0, g'(0) = lam.

    ``g`` must accept numpy arrays.  If lam is omitted it is estimated by a
    symmetric difference quotient at 0 on the one-sided scale 1e-8.
    ``s_hint`` (the expected regularity) is recorded only.
    """
    grid = np.asarray(grid, dtype=float)
    if lam is None:
        hstep = 1e-8
        lam = float((4 * g(np.array([hstep]))[0] - g(np.array([2 * hstep]))[0]) / (2 * hstep))
    if not (0.0 < lam < 1.0):
        raise DomainError(f"g'(0) = {lam} is not a contraction rate")
    if abs(float(g(np.array([0.0]))[0])) > 1e-15:
        raise DomainError("g must fix 0")

    def limit(t, n_fixed=None):
        y = np.array(t, dtype=float)
        h_prev = y.copy()
        scale = 1.0
        for n in range(1, max_iter + 1):
            y = g(y)
            scale /= lam
            h = y * scale
            diff = float(np.max(np.abs(h - h_prev))) if h.size else 0.0
            h_prev = h
            if n_fixed is not None:
                if n >= n_fixed:
                    return h, n, diff
            elif diff < tol:
                return h, n, diff
        raise ConvergenceError(f"linearization did not converge; last change {diff}", diff)

    h, iters, _ = limit(grid)

    def h_fn(t):
        return limit(np.asarray(t, dtype=float), n_fixed=2 * iters)[0]

    residual = float(np.max(np.abs(lam * h - h_fn(g(grid))))) if grid.size else 0.0
    conj = None
    if g1 is not None:
        s = h[(h >= h.min()) & (h <= h.max())]
        conj = h_fn(g1(np.interp(s, h, grid)))
    return Linearization(grid=grid, h=h, lam=lam, iterations=iters, residual=residual,
                         h_fn=h_fn, conjugated=conj)
