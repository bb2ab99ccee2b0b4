"""Pseudo-affine branches f0, f1 synthesized from a proportion pair.

On the gap I_w the derivative of f_i is ``lam + theta_i(w) rho((t - a_w)/|I_w|)``
with a smooth bump ``rho`` of unit integral that is flat at both ends; on
the Cantor set it is ``lam``.  Integrating over I_w gives
``(lam + theta_i(w)) |I_w| = |I_{iw}|``, so f_i maps I_w onto I_{iw} and
the Cantor set into itself.

Evaluation anchors each gap at its image: for t in I_w

    f_i(t) = a_{iw} + lam (t - a_w) + theta_i(w) |I_w| R((t - a_w)/|I_w|),

where R is the cumulative bump.  Points that fall in a hull deeper than the
stored table are resolved by walking down the hull tree until the linear
interpolation between hull images is within tolerance.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy
from scipy.integrate import quad

from .cantor import GapTable, realize
from .errors import CapacityError, DomainError
from .proportions import ProportionPair, theta_levels
from .words import Coding, format_word

N_NODES = 4097
MAX_DESCENT = 4000

_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


def _raw_bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape)
    inside = (t > 0) & (t < 1)
    ti = t[inside]
    out[inside] = np.exp(-1.0 / (ti * (1.0 - ti)))
    return out


def _gauss(f, lo, hi, rule):
    """Fixed Gauss-Legendre rule on each of the intervals [lo, hi] (arrays)."""
    x, w = rule
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[..., None] + half[..., None] * x
    return half * (f(pts) @ w)


class BumpProfile:
    """The bump exp(-1/(t(1-t))) scaled to unit integral, with its cumulative.

    R is stored at Chebyshev-Lobatto nodes; between nodes it is completed
    by an 8-point Gauss-Legendre integral of the bump, so R and rho stay
    consistent to rounding.
    """

    def __init__(self, n_nodes: int = N_NODES, derivative_order: int = 3):
        k = np.arange(n_nodes)
        self.nodes = 0.5 * (1.0 - np.cos(np.pi * k / (n_nodes - 1)))
        self.nodes[0], self.nodes[-1] = 0.0, 1.0
        z_quad, z_err = quad(lambda t: float(_raw_bump(t)), 0.0, 1.0,
                             epsabs=1e-16, epsrel=1e-14, limit=200)
        pieces = _gauss(_raw_bump, self.nodes[:-1], self.nodes[1:], _GL16)
        cum = np.concatenate([[0.0], np.cumsum(pieces.astype(np.longdouble))])
        z = float(cum[-1])
        if abs(z - z_quad) > 1e-14:
            raise DomainError(f"bump normalization disagrees: {z} vs {z_quad}")
        self.norm = z
        self.quad_error = abs(z - z_quad) / z + z_err / z
        self._cum = np.asarray(cum / cum[-1], dtype=float)
        self.derivative_order = derivative_order

    def profile(self, u):
        return _raw_bump(u) / self.norm

    def cumulative(self, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        k = np.clip(np.searchsorted(self.nodes, u, side="right") - 1, 0, len(self.nodes) - 2)
        lo = self.nodes[k]
        return self._cum[k] + _gauss(_raw_bump, lo, u, _GL8) / self.norm

    @cached_property
    def sup_norms(self) -> list[float]:
        """Sampled sup norms of rho and its derivatives up to the configured order.

        The maxima come from a 20001-point grid and are inflated by 0.1 %.
        """
        t = sympy.symbols("t")
        expr = sympy.exp(-1 / (t * (1 - t))) / self.norm
        grid = np.linspace(1e-6, 1 - 1e-6, 20001)
        out = []
        for r in range(self.derivative_order + 1):
            f = sympy.lambdify(t, sympy.diff(expr, t, r), "numpy")
            with np.errstate(all="ignore"):
                vals = np.nan_to_num(np.abs(f(grid)))
            out.append(float(vals.max()) * 1.001)
        return out

    @cached_property
    def sup(self) -> float:
        return float(self.profile(0.5))


_PROFILE = None


def default_profile() -> BumpProfile:
    global _PROFILE
    if _PROFILE is None:
        _PROFILE = BumpProfile()
    return _PROFILE


@dataclass(frozen=True, eq=False)
class IfsBranchPair:
    """The two branches built on a realized table.

    ``depth`` N is the deepest level of gaps whose bumps are stored; the
    internal table goes one level further so that gap images are tabulated.
    """

    lam: float
    table: GapTable
    theta: ProportionPair
    tau: float
    profile: BumpProfile
    depth: int
    tol: float
    tau_truncated: float
    tau_tail_bound: float
    _starts: np.ndarray = field(repr=False)
    _gap: np.ndarray = field(repr=False)
    _level: np.ndarray = field(repr=False)
    _index: np.ndarray = field(repr=False)
    _thetas: list = field(repr=False)

    # piece helpers -------------------------------------------------------

    def _word(self, n: int, j: int) -> str:
        return format(j, f"0{n}b") if n else ""

    def embed(self, a, tol: float | None = None) -> float:
        if isinstance(a, str):
            a = Coding.parse(a)
        return self.table.geometry.embed(a, tol or self.tol)

    def _descend(self, i: int, t: float, c: str, lc: float, lic: float, tol: float,
                 derivative: bool) -> float:
        geo = self.table.geometry
        p = self.theta
        lam = self.lam
        rho = self.profile.sup
        ic = str(i) + c
        for _ in range(MAX_DESCENT):
            E = p.envelope(len(c) - 1)
            hc = geo.hull_length(c)
            fine = hc < 1e-17 or E == 0.0
            if derivative:
                fine = fine or E * rho <= tol
            else:
                fine = fine or hc * 2 * E * rho <= tol
            if fine:
                if derivative:
                    return lam
                slope = geo.hull_length(ic) / hc if hc > 0 else lam
                return lic + (t - lc) * slope
            ga = lc + geo.hull_length(c + "0")
            gl = geo.length(c)
            if t < ga:
                c, ic = c + "0", ic + "0"
            elif t <= ga + gl:
                th = p.theta(i, c)
                u = (t - ga) / gl
                if derivative:
                    return lam + th * float(self.profile.profile(u))
                a_img = lic + geo.hull_length(ic + "0")
                return a_img + lam * (t - ga) + th * gl * float(self.profile.cumulative(u))
            else:
                lc = ga + gl
                lic = lic + geo.hull_length(ic + "0") + geo.length(ic)
                c, ic = c + "1", ic + "1"
        raise CapacityError(f"could not resolve t={t} to tolerance {tol}")

    def _evaluate(self, i: int, t, tol, derivative: bool):
        if i not in (0, 1):
            raise DomainError("branch index must be 0 or 1")
        tol = self.tol if tol is None else tol
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if ((t < -1e-12) | (t > 1 + 1e-12)).any():
            raise DomainError("t must lie in [0, 1]")
        t = np.clip(t, 0.0, 1.0)
        T = self.table
        H = self.depth + 1
        k = np.clip(np.searchsorted(self._starts, t, side="right") - 1, 0, len(self._starts) - 1)
        out = np.empty(t.shape)
        gap = self._gap[k]
        if gap.any():
            n, j = self._level[k[gap]], self._index[k[gap]]
            tt = t[gap]
            a = np.array([T.a[nn][jj] for nn, jj in zip(n, j)])
            ln = np.array([T.psi[nn][jj] for nn, jj in zip(n, j)]) * T.L
            th = np.array([self._thetas[nn][i][jj] for nn, jj in zip(n, j)])
            u = np.clip((tt - a) / ln, 0.0, 1.0)
            if derivative:
                out[gap] = self.lam + th * self.profile.profile(u)
            else:
                img = np.array([T.a[nn + 1][i * 2 ** nn + jj] for nn, jj in zip(n, j)])
                out[gap] = img + self.lam * (tt - a) + th * ln * self.profile.cumulative(u)
        for pos in np.nonzero(~gap)[0]:
            j = int(self._index[k[pos]])
            c = self._word(H, j)
            lc = float(T.cyl_left[H][j])
            lic = float(T.cyl_left[H + 1][i * 2 ** H + j])
            out[pos] = self._descend(i, float(t[pos]), c, lc, lic, tol, derivative)
        if not derivative:
            np.clip(out, 0.0, 1.0, out=out)
        return float(out[0]) if scalar else out

    def eval(self, i: int, t, tol: float | None = None):
        """f_i(t) within tol (scalar or array)."""
        return self._evaluate(i, t, tol, derivative=False)

    def eval_derivative(self, i: int, t, tol: float | None = None):
        """f_i'(t); exact on resolved gaps and lam on Cantor points."""
        return self._evaluate(i, t, tol, derivative=True)

    def sample_csv(self, grid) -> str:
        grid = np.asarray(grid, dtype=float)
        cols = [self.eval(0, grid), self.eval(1, grid),
                self.eval_derivative(0, grid), self.eval_derivative(1, grid)]
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["t", "f0", "f1", "df0", "df1"])
        for r in range(grid.size):
            out.writerow([f"{grid[r]:.17g}"] + [f"{c[r]:.17g}" for c in cols])
        return buf.getvalue()


def build_branches(p: ProportionPair, depth: int, tol: float = 1e-10,
                   tail_tol: float = 1e-14, profile: BumpProfile | None = None) -> IfsBranchPair:
    """Branches storing one bump per gap of length <= depth."""
    if depth < 0:
        raise DomainError("depth must be non-negative")
    profile = profile or default_profile()
    T = realize(p, depth + 1, tail_tol)
    N, H = depth, depth + 1
    thetas = theta_levels(p, N)

    size = 2 ** (H + 1) - 1
    starts = np.zeros(size)
    is_gap = np.zeros(size, dtype=bool)
    level = np.zeros(size, dtype=np.int64)
    index = np.zeros(size, dtype=np.int64)
    jl = np.arange(2 ** H, dtype=np.int64)
    starts[0::2] = T.cyl_left[H]
    level[0::2] = H
    index[0::2] = jl
    for n in range(N + 1):
        j = np.arange(2 ** n, dtype=np.int64)
        pos = (2 * j + 1) * 2 ** (H - n) - 1
        starts[pos] = T.a[n]
        is_gap[pos] = True
        level[pos] = n
        index[pos] = j

    tau = float(T.cyl_left[1][1])
    lengths = [T.psi[n] * T.L for n in range(N + 1)]
    s1 = math.fsum(float(np.dot(thetas[n][1], lengths[n])) for n in range(N + 1))
    tau_trunc = 1.0 - (p.lam + s1)
    residual = max(0.0, 1.0 - math.fsum(float(v.sum()) for v in lengths))
    tau_bound = p.envelope(N) * residual + T.error_bound
    return IfsBranchPair(lam=p.lam, table=T, theta=p, tau=tau, profile=profile, depth=N,
                         tol=tol, tau_truncated=tau_trunc, tau_tail_bound=tau_bound,
                         _starts=starts, _gap=is_gap, _level=level, _index=index,
                         _thetas=thetas)


def regularity_report(branches: IfsBranchPair, r: int, alpha: float) -> dict:
    """sup over stored gaps of |theta_i(w)| / |I_w|^(r-1+alpha), with its witness."""
    expo = r - 1 + alpha
    T = branches.table
    best, witness = 0.0, ""
    for n in range(branches.depth + 1):
        ln = T.psi[n] * T.L
        for i in (0, 1):
            ratio = np.abs(branches._thetas[n][i]) / ln ** expo
            j = int(np.argmax(ratio))
            if ratio[j] > best:
                best, witness = float(ratio[j]), format(j, f"0{n}b") if n else ""
    return {"ratio_sup": best, "witness": format_word(witness), "exponent": expo}
