"""The tripling map, its Ruelle operator and the conjugacy built from it.

For a potential phi on [0, 1] the operator (L f)(x) = sum_{Ty=x} exp(phi(y)) f(y)
acts on functions constant on depth-n ternary cylinders as a 3^n x 3^n
matrix.  Its left Perron eigenvector is a conformal measure mu, and
h^-1(z) = mu([0, z]) conjugates T to a map T_hat with
T_hat'(x) = exp(P - phi(h(x))).  When P = log 3 this is the identity
log T_hat' = log 3 - phi o h.

Cylinders are indexed by their digit string read as a base-3 number,
first digit most significant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import CapacityError, ConvergenceError, DomainError

MAX_DEPTH = 12
MAX_PERIOD = 12


def tripling(x):
    """(3x mod 1, branch); exact for Fraction and int inputs."""
    if isinstance(x, (Fraction, int)):
        x = Fraction(x)
        if not (0 <= x < 1):
            raise DomainError("x must lie in [0, 1)")
        y = 3 * x
        branch = int(y)  # floor for non-negative values
        return y - branch, branch
    x = float(x)
    if not (0.0 <= x < 1.0):
        raise DomainError("x must lie in [0, 1)")
    y = 3.0 * x
    branch = min(int(math.floor(y)), 2)
    return y - branch, branch


def ternary_digits(x, n: int) -> list[int]:
    out = []
    for _ in range(n):
        x, d = tripling(x)
        out.append(d)
    return out


@dataclass(frozen=True, eq=False)
class Potential:
    """A potential phi on [0, 1].

    Finite-range potentials store one value per depth-m cylinder
    (``range_depth = m``).  Infinite-range ones carry a callable and a
    modulus of continuity ``modulus(delta)`` bounding |phi(x) - phi(y)| for
    |x - y| <= delta.
    """

    values: np.ndarray | None
    range_depth: int | None
    func: Callable | None = field(default=None, repr=False)
    modulus: Callable | None = field(default=None, repr=False)
    label: str = ""

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls(np.array([float(c)]), 0, label=f"const:{c!r}")

    @classmethod
    def digits(cls, table) -> "Potential":
        """Values on the 3^m cylinders of depth m, in base-3 order."""
        v = np.asarray(table, dtype=float).ravel()
        m = round(math.log(v.size, 3)) if v.size > 1 else 0
        if 3 ** m != v.size:
            raise DomainError(f"digit table needs 3^m entries, got {v.size}")
        return cls(v, m, label="digits:" + ",".join(repr(float(x)) for x in v))

    @classmethod
    def coboundary(cls, u) -> "Potential":
        """phi = u - u o T for u given on depth-k cylinders."""
        u = np.asarray(u, dtype=float).ravel()
        k = round(math.log(u.size, 3)) if u.size > 1 else 0
        if 3 ** k != u.size:
            raise DomainError(f"coboundary table needs 3^k entries, got {u.size}")
        idx = np.arange(3 ** (k + 1))
        vals = u[idx // 3] - u[idx % 3 ** k] if k else np.zeros(1)
        return cls(vals, k + 1 if k else 0,
                   label="cobound:" + ",".join(repr(float(x)) for x in u))

    @classmethod
    def from_function(cls, f: Callable, modulus: Callable) -> "Potential":
        return cls(None, None, func=f, modulus=modulus, label="function")

    @property
    def finite(self) -> bool:
        return self.range_depth is not None

    @property
    def sup_bound(self) -> float:
        if self.finite:
            return float(np.max(np.abs(self.values)))
        xs = np.linspace(0, 1, 10001, endpoint=False)
        return float(np.max(np.abs(self.func(xs)))) + float(self.modulus(1e-4))

    @property
    def small(self) -> bool:
        """The normalization ||phi|| <= 1/4."""
        return self.sup_bound <= 0.25

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.finite:
            return self.func(x)
        m = self.range_depth
        if m == 0:
            return np.full(x.shape, self.values[0])
        idx = np.clip(np.floor(x * 3 ** m).astype(np.int64), 0, 3 ** m - 1)
        return self.values[idx]

    def on_cylinders(self, n: int) -> np.ndarray:
        """phi on each depth-n cylinder (exact for range <= n, midpoint sample otherwise)."""
        if self.finite:
            m = self.range_depth
            if m > n:
                raise DomainError(f"depth {n} below the range {m} of the potential")
            idx = np.arange(3 ** n)
            return self.values[idx // 3 ** (n - m)]
        mid = (np.arange(3 ** n) + 0.5) / 3 ** n
        return np.asarray(self.func(mid), dtype=float)

    def discretization_error(self, n: int) -> float:
        if self.finite:
            return 0.0
        return float(self.modulus(0.5 / 3 ** n))


def transfer_matrix(phi: Potential, n: int) -> sp.csr_matrix:
    """L[x, y] = exp(phi(y)) whenever T maps cylinder y onto a set containing x."""
    N = 3 ** n
    vals = np.exp(phi.on_cylinders(n))
    x = np.arange(N)
    rows, cols = [], []
    for d in range(3):
        # y = d followed by the first n-1 digits of x
        y = d * 3 ** (n - 1) + x // 3
        rows.append(x)
        cols.append(y)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return sp.csr_matrix((vals[cols], (rows, cols)), shape=(N, N))


def _power(M, tol, max_iter, label):
    N = M.shape[0]
    v = np.full(N, 1.0 / N)
    rate = 0.0
    for k in range(max_iter):
        w = M @ v
        new_rate = float(w.sum() / v.sum())
        w /= w.sum()
        change = float(np.max(np.abs(w - v)) / np.max(np.abs(w)))
        v = w
        if change <= tol and abs(new_rate - rate) <= tol * new_rate:
            return new_rate, v, k + 1
        rate = new_rate
    raise ConvergenceError(f"power iteration for the {label} stagnated (change {change})", change)


@dataclass(frozen=True, eq=False)
class TransferSystem:
    depth: int
    matrix: sp.csr_matrix = field(repr=False)
    pressure: float
    right_eig: np.ndarray = field(repr=False)
    eigmeasure: np.ndarray = field(repr=False)
    h_inverse: np.ndarray = field(repr=False)
    residual: float
    approximate: bool
    discretization_error: float

    @property
    def knots(self) -> np.ndarray:
        return np.arange(3 ** self.depth + 1) / 3 ** self.depth

    def to_dict(self) -> dict:
        return {"depth": self.depth, "pressure": self.pressure,
                "eigen_residual": self.residual, "approximate": self.approximate,
                "discretization_error": self.discretization_error,
                "h_inverse_knots": [float(v) for v in self.h_inverse]}


def build_system(phi: Potential, depth: int, tol: float = 1e-12,
                 max_iter: int = 100000) -> TransferSystem:
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if depth > MAX_DEPTH:
        raise CapacityError(f"depth {depth} exceeds {MAX_DEPTH}")
    if phi.finite and phi.range_depth > depth:
        raise DomainError(f"depth {depth} below the range {phi.range_depth} of the potential")
    M = transfer_matrix(phi, depth)
    r, psi, _ = _power(M, tol, max_iter, "eigenfunction")
    MT = M.T.tocsr()
    r2, nu, _ = _power(MT, tol, max_iter, "eigenmeasure")
    nu = nu / math.fsum(nu)
    psi = psi / float(np.dot(psi, nu))
    rho = 0.5 * (r + r2)
    res = float(np.max(np.abs(M @ psi - rho * psi)) / np.max(np.abs(psi)))
    if (nu <= 0).any():
        raise DomainError("eigenmeasure is not fully supported")
    hinv = np.concatenate([[0.0], np.asarray(np.cumsum(nu.astype(np.longdouble)), dtype=float)])
    hinv[-1] = 1.0
    return TransferSystem(depth=depth, matrix=M, pressure=math.log(rho), right_eig=psi,
                          eigmeasure=nu, h_inverse=hinv, residual=res,
                          approximate=not phi.finite,
                          discretization_error=phi.discretization_error(depth))


def conjugating_map(sys: TransferSystem):
    """(h_inverse, h) as callables on [0, 1], piecewise linear between knots."""
    knots = sys.knots
    hinv = sys.h_inverse
    if not (np.diff(hinv) > 0).all():
        raise DomainError("a cylinder has zero mass; h is not a homeomorphism")

    def h_inverse(z):
        return np.interp(z, knots, hinv)

    def h(x):
        return np.interp(x, hinv, knots)

    return h_inverse, h


def verify_derivative_identity(sys: TransferSystem, phi: Potential, samples=1000,
                               step: float = 1e-3) -> dict:
    """Compare the slope of T_hat = h^-1 o T o h with exp(P - phi(h(x))).

    Slopes are central differences of half-width ``step``.  With an integer
    ``samples`` the points form a regular grid and those whose stencil comes
    within one grid cell of a branch cut of T or a jump of phi are skipped;
    explicitly given samples must avoid those places.
    """
    h_inv, h = conjugating_map(sys)
    n = sys.depth
    cell = 3.0 ** -n
    m = max(1, phi.range_depth or 1)
    explicit = not isinstance(samples, (int, np.integer))
    xs = np.asarray(samples, dtype=float) if explicit else (np.arange(samples) + 0.5) / samples
    lo, hi = h(xs - step), h(xs + step)
    cuts_lo = np.floor((lo - cell) * 3 ** m)
    cuts_hi = np.floor((hi + cell) * 3 ** m)
    ok = (cuts_lo == cuts_hi) & (xs - step > 0) & (xs + step < 1)
    if explicit and not ok.all():
        bad = float(xs[~ok][0])
        raise DomainError(f"sample {bad} is too close to a branch cut of T")
    xs, lo, hi = xs[ok], lo[ok], hi[ok]
    branch = np.floor(lo * 3)
    slope = (h_inv(3 * hi - branch) - h_inv(3 * lo - branch)) / (2 * step)
    expected = np.exp(sys.pressure - phi(h(xs)))
    rel = np.abs(slope / expected - 1.0)
    return {"max_rel_dev": float(rel.max()) if rel.size else 0.0,
            "n_samples": int(xs.size), "n_skipped": int((~ok).sum()), "step": step}


def periodic_sum_check(phi: Potential, period_max: int) -> dict:
    """Largest |sum of phi along a periodic orbit| over periods 1..period_max.

    The period-n points are p / (3^n - 1); their ternary digits repeat the
    n-digit expansion of p, so orbit points are cyclic rotations.
    """
    if not 1 <= period_max <= MAX_PERIOD:
        raise CapacityError(f"period_max must lie in 1..{MAX_PERIOD}")
    best, worst = -1.0, None
    for n in range(1, period_max + 1):
        blocks = np.arange(3 ** n)
        digits = (blocks[:, None] // 3 ** np.arange(n - 1, -1, -1)[None, :]) % 3
        total = np.zeros(blocks.size)
        for k in range(n):
            rot = np.roll(digits, -k, axis=1)
            if phi.finite:
                m = phi.range_depth
                idx = np.zeros(blocks.size, dtype=np.int64)
                for j in range(m):
                    idx = idx * 3 + rot[:, j % n]
                total += phi.values[idx]
            else:
                num = rot @ (3 ** np.arange(n - 1, -1, -1))
                total += np.asarray(phi.func(num / (3 ** n - 1)), dtype=float)
        j = int(np.argmax(np.abs(total)))
        if abs(total[j]) > best:
            best = float(abs(total[j]))
            worst = {"period": n, "block": "".join(str(d) for d in digits[j]),
                     "point": f"{int(blocks[j])}/{3 ** n - 1}", "sum": float(total[j])}
    return {"max_abs_sum": best, "worst_orbit": worst}


def parse_potential(text: str) -> Potential:
    """CLI form: ``const:c``, ``digits:v0,v1,...`` (3 or 9 values) or ``cobound:u0,u1,u2``."""
    kind, _, rest = text.partition(":")
    try:
        vals = [float(v) for v in rest.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"cannot read potential {text!r}") from None
    if kind == "const" and len(vals) == 1:
        return Potential.constant(vals[0])
    if kind == "digits" and len(vals) in (3, 9):
        return Potential.digits(vals)
    if kind == "cobound" and len(vals) in (3, 9):
        return Potential.coboundary(vals)
    raise DomainError(f"cannot read potential {text!r}")
