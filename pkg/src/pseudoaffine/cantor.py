"""Realization of the binary Cantor set defined by a proportion pair.

With ``L = 1 / sum_w Psi(w)`` the gap of ``w`` has length ``Psi(w) L`` and
the point coded by ``a`` is ``Theta(a) = sum_{w < a} Psi(w) L``.  The
hull ``K_w`` of the cylinder of ``w`` has length ``M(w) L`` where
``M(w) = sum_v Psi(wv)`` is the Psi-mass of the subtree below ``w``.

A table at depth N lists, in left-to-right order, the gaps of length <= N
and the hulls of depth N+1 (which tile the rest of [0, 1]); endpoints are
prefix sums of this list.  Hull masses are the only infinite sums needed.
For automaton kinds

    M(w) = sum_m sum_q A_m(q) B_w(q, m),

where A_m(q) sums Psi(v) over suffixes v of length m in state q and
B_w(q, m) is the product of the factors contributed by the letters of w
read on top of such a suffix.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DepthError, DomainError
from .proportions import (MAX_ENUM_DEPTH, LevelSums, ProportionPair, level_sums,
                          psi_levels, theta_levels)
from .words import Coding, enumerate_words, format_word, parse_word, word_key

MAX_TABLE_DEPTH = 20
MAX_EMBED_DEPTH = 2000
_CHUNK = 1 << 21


def _bits(idx: np.ndarray, D: int) -> np.ndarray:
    shifts = np.arange(D - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int64)


def _automaton_masses(p: ProportionPair, sums: LevelSums, bits: np.ndarray) -> np.ndarray:
    aut = p.automaton
    lam = p.lam
    A = sums.state_sums
    W, D = bits.shape
    out = np.zeros(W)
    null = np.array(sorted(aut.null_states), dtype=np.int64)
    for q in range(aut.n_states):
        col = A[:, q]
        live = np.nonzero(col > 0)[0]
        if live.size == 0:
            continue
        step = max(1, _CHUNK // max(W, 1))
        for c0 in range(0, live.size, step):
            ms = live[c0:c0 + step]
            weight = np.broadcast_to(col[ms], (W, ms.size)).copy()
            states = np.full(W, q, dtype=np.int64)
            for k in range(D - 1, -1, -1):
                if null.size and np.isin(states, null).all():
                    weight *= lam ** (k + 1)
                    break
                x = bits[:, k]
                f = lam + aut.theta(x[:, None], states[:, None], ms[None, :] + (D - 1 - k))
                if not ((f > 0) & (f < 1)).all():
                    raise DomainError("inadmissible proportion inside a cylinder mass")
                weight *= f
                states = aut.transitions[states, x]
            out += weight.sum(axis=1)
    return out


class CantorGeometry:
    """Cached hull masses, gap positions and the embedding for one pair.

    All lengths returned by ``length``, ``hull`` and ``left`` are in [0, 1]
    units; ``psi`` and ``mass`` are in Psi units.
    """

    def __init__(self, p: ProportionPair, tail_tol: float = 1e-14):
        self.p = p
        self.tail_tol = tail_tol
        self.sums = level_sums(p, tail_tol)
        self.total = self.sums.total
        self.L = 1.0 / self.total
        self._psi = {"": 1.0}
        self._mass = {}
        self._left = {"": 0.0}
        self._enum = None  # Psi levels for custom kinds without automaton

    # Psi-unit quantities ----------------------------------------------

    def psi(self, w: str) -> float:
        v = self._psi.get(w)
        if v is None:
            v = self.p.proportion(int(w[0]), w[1:]) * self.psi(w[1:])
            self._psi[w] = v
        return v

    def mass(self, w: str) -> float:
        v = self._mass.get(w)
        if v is not None:
            return v
        aut = self.p.automaton
        if aut is not None and aut.uniform:
            key = len(w)
            v = self._mass.get(("len", key))
            if v is None:
                v = float(_automaton_masses(self.p, self.sums,
                                            np.zeros((1, key), dtype=np.int64))[0])
                self._mass[("len", key)] = v
        elif aut is not None:
            bits = np.array([[int(c) for c in w]], dtype=np.int64).reshape(1, len(w))
            v = float(_automaton_masses(self.p, self.sums, bits)[0])
        else:
            v = float(self._custom_masses(len(w), np.array([int(w, 2) if w else 0]))[0])
        self._mass[w] = v
        return v

    def masses_at(self, D: int) -> np.ndarray:
        """M(w) for every word of length D, indexed by binary value."""
        aut = self.p.automaton
        if aut is not None and aut.uniform:
            return np.full(2 ** D, self.mass("0" * D))
        idx = np.arange(2 ** D, dtype=np.int64)
        if aut is not None:
            out = np.empty(2 ** D)
            step = max(1, (1 << 14))
            for s in range(0, idx.size, step):
                out[s:s + step] = _automaton_masses(self.p, self.sums, _bits(idx[s:s + step], D))
            return out
        return self._custom_masses(D, idx)

    def _custom_levels(self, K: int) -> list[np.ndarray]:
        if self._enum is None or len(self._enum) <= K:
            if K > MAX_ENUM_DEPTH:
                raise CapacityError(
                    f"custom proportions need words of length {K}, above the cap {MAX_ENUM_DEPTH}")
            self._enum = psi_levels(self.p, K)
        return self._enum

    def _custom_masses(self, D: int, idx: np.ndarray) -> np.ndarray:
        p = self.p
        if p.support_depth is not None:
            d = max(p.support_depth, -1)
            levels = self._custom_levels(D + max(d, 0))
            out = np.full(idx.size, p.lam ** D * self.sums.level[d + 1] / (1 - 2 * p.lam))
            for j in range(0, d + 1):
                block = levels[D + j].reshape(2 ** D, 2 ** j)[idx]
                out += block.sum(axis=1)
            return out
        K = max(self.sums.depth, D)
        levels = self._custom_levels(K)
        out = np.zeros(idx.size)
        for j in range(0, K - D + 1):
            out += levels[D + j].reshape(2 ** D, 2 ** j)[idx].sum(axis=1)
        return out

    def mass_error(self) -> float:
        """Bound on the total Psi-mass missing from any family of disjoint hulls."""
        return self.sums.tail_bound

    # positions in [0, 1] --------------------------------------------------

    def length(self, w: str) -> float:
        return self.L * self.psi(w)

    def hull_length(self, w: str) -> float:
        return self.L * self.mass(w)

    def left(self, w: str) -> float:
        v = self._left.get(w)
        if v is not None:
            return v
        k = len(w) - 1
        while w[:k] not in self._left:
            k -= 1
        x = self._left[w[:k]]
        for j in range(k, len(w)):
            pre = w[:j]
            if w[j] == "1":
                x += self.L * (self.mass(pre + "0") + self.psi(pre))
            self._left[w[:j + 1]] = x
        return x

    def gap(self, w: str) -> tuple[float, float]:
        a = self.left(w) + self.L * self.mass(w + "0")
        return a, a + self.length(w)

    def embed(self, a: Coding, tol: float) -> float:
        """Theta(a) within tol."""
        if a.block == "0":
            return self.left(a.prefix)
        if a.block == "1":
            return self.left(a.prefix) + self.hull_length(a.prefix)
        for D in range(1, MAX_EMBED_DEPTH):
            w = a.head(D)
            h = self.hull_length(w)
            if h <= 2 * tol:
                return self.left(w) + 0.5 * h
        raise CapacityError(f"embedding of {a} not resolved to {tol}; hull still {h}")


@dataclass(frozen=True, eq=False)
class GapTable:
    """Gaps of length <= depth and hulls of length <= depth+1.

    Per-level arrays are indexed by the binary value of the word (first
    letter most significant).  ``tail_bound`` bounds the total length of the
    gaps deeper than ``depth`` plus the numerical error; ``error_bound``
    bounds the absolute error of every stored endpoint.
    """

    depth: int
    lam: float
    L: float
    total: float
    tail_bound: float
    error_bound: float
    psi: list
    a: list
    b: list
    cyl_left: list
    cyl_len: list
    pair: ProportionPair = field(repr=False)
    geometry: CantorGeometry = field(repr=False)

    def _loc(self, w: str, n_max: int) -> tuple[int, int]:
        if len(w) > n_max:
            raise DepthError(f"word {format_word(w)} is deeper than the table allows ({n_max})")
        return len(w), int(w, 2) if w else 0

    def row(self, w: str) -> tuple[float, float, float]:
        n, j = self._loc(w, self.depth)
        a, b = float(self.a[n][j]), float(self.b[n][j])
        return a, b, float(self.psi[n][j] * self.L)

    def length(self, w: str) -> float:
        n, j = self._loc(w, self.depth)
        return float(self.psi[n][j] * self.L)

    def cylinder(self, w: str) -> tuple[float, float]:
        n, j = self._loc(w, self.depth + 1)
        left = float(self.cyl_left[n][j])
        return left, left + float(self.cyl_len[n][j])

    def words(self) -> list[str]:
        return enumerate_words(self.depth)

    def gap_lengths_total(self) -> float:
        return math.fsum(math.fsum(v) for v in self.psi[: self.depth + 1]) * self.L

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["word", "a", "b", "length"])
        for w in self.words():
            a, b, ln = self.row(w)
            out.writerow([format_word(w), f"{a:.17g}", f"{b:.17g}", f"{ln:.17g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        doc = {"lambda": self.lam, "L": self.L, "depth": self.depth,
               "total": self.total, "tail_bound": self.tail_bound,
               "error_bound": self.error_bound}
        if self.pair.kind != "custom":
            doc["proportions"] = self.pair.to_dict()
        return doc


def realize(p: ProportionPair, depth: int, tail_tol: float = 1e-14) -> GapTable:
    """Gap endpoints and hulls down to ``depth`` as prefix sums in gap order."""
    if depth < 0:
        raise DomainError("depth must be non-negative")
    if depth > MAX_TABLE_DEPTH:
        raise CapacityError(f"table depth {depth} exceeds {MAX_TABLE_DEPTH}")
    geo = CantorGeometry(p, tail_tol)
    N, H = depth, depth + 1
    L = geo.L
    psis = psi_levels(p, H)
    leaves = geo.masses_at(H)

    # in-order layout of a perfect tree of height H: node (n, j) sits at
    # (2j+1) 2^(H-n) - 1, so leaves take the even slots
    size = 2 ** (H + 1) - 1
    seq = np.zeros(size, dtype=np.longdouble)
    seq[0::2] = leaves
    for n in range(N + 1):
        j = np.arange(2 ** n, dtype=np.int64)
        seq[(2 * j + 1) * 2 ** (H - n) - 1] = psis[n]
    starts = (np.cumsum(seq) - seq) * np.longdouble(L)

    a, b = [], []
    for n in range(N + 1):
        j = np.arange(2 ** n, dtype=np.int64)
        an = starts[(2 * j + 1) * 2 ** (H - n) - 1]
        a.append(np.asarray(an, dtype=float))
        b.append(np.asarray(an + np.longdouble(L) * psis[n], dtype=float))

    masses = [None] * (H + 1)
    masses[H] = leaves
    for n in range(H - 1, -1, -1):
        masses[n] = psis[n] + masses[n + 1][0::2] + masses[n + 1][1::2]
    cyl_left, cyl_len = [], []
    for n in range(H + 1):
        j = np.arange(2 ** n, dtype=np.int64)
        cyl_left.append(np.asarray(starts[j * 2 ** (H - n + 1)], dtype=float))
        cyl_len.append(masses[n] * L)

    err = 2 * L * geo.mass_error() + 8 * (H + 2) * 2.0 ** -52
    tail = L * math.fsum(leaves) + err
    return GapTable(depth=N, lam=p.lam, L=L, total=geo.total, tail_bound=tail,
                    error_bound=err, psi=psis, a=a, b=b, cyl_left=cyl_left,
                    cyl_len=cyl_len, pair=p, geometry=geo)


def _geometry(p_or_table, tail_tol=1e-14) -> CantorGeometry:
    if isinstance(p_or_table, GapTable):
        return p_or_table.geometry
    if isinstance(p_or_table, CantorGeometry):
        return p_or_table
    return CantorGeometry(p_or_table, tail_tol)


def theta_embed(p, a: Coding | str, tol: float = 1e-12) -> float:
    """The point x_a = Theta(a) of the Cantor set, within tol.

    ``p`` may be a ProportionPair or a realized GapTable (whose cached
    geometry is then reused).
    """
    if isinstance(a, str):
        a = Coding.parse(a)
    if not tol > 0:
        raise DomainError("tol must be positive")
    return _geometry(p).embed(a, tol)


def proportions_of(table: GapTable, i: int, w: str) -> float:
    """|I_{iw}| / |I_w| read back from the realized gap endpoints."""
    if i not in (0, 1):
        raise DomainError("letter must be 0 or 1")
    if len(w) + 1 > table.depth:
        raise DepthError(f"proportion of {i}{format_word(w)} needs depth {len(w) + 1}")
    n = len(w)
    j = int(w, 2) if w else 0
    k = i * 2 ** n + j
    return float((table.b[n + 1][k] - table.a[n + 1][k]) / (table.b[n][j] - table.a[n][j]))


@dataclass(frozen=True)
class ScalingRatios:
    word: str
    r0: float
    rgap: float
    r1: float


def scaling_ratios(table: GapTable, w: str) -> ScalingRatios:
    """Relative sizes of the two sub-hulls and the gap inside the hull of w."""
    if len(w) + 1 > table.depth + 1:
        raise DepthError(f"scaling ratios of {format_word(w)} need hulls at depth {len(w) + 1}")
    lo, hi = table.cylinder(w)
    d = hi - lo
    l0, h0 = table.cylinder(w + "0")
    l1, h1 = table.cylinder(w + "1")
    r0, r1 = (h0 - l0) / d, (h1 - l1) / d
    return ScalingRatios(w, r0, 1.0 - r0 - r1, r1)


def scaling_limit(table: GapTable, reversed_tail, depth_schedule) -> list[ScalingRatios]:
    """r(y_n ... y_1) for n in the schedule, extending the word to the left.

    ``reversed_tail`` lists y_1, y_2, ... : a Coding, or a word repeated
    forever.
    """
    if isinstance(reversed_tail, str):
        reversed_tail = Coding("", parse_word(reversed_tail) or "0") if reversed_tail else Coding("", "0")
    out = []
    for n in depth_schedule:
        w = reversed_tail.head(int(n))[::-1]
        out.append(scaling_ratios(table, w))
    return out


__all__ = ["CantorGeometry", "GapTable", "ScalingRatios", "realize", "theta_embed",
           "proportions_of", "scaling_ratios", "scaling_limit", "word_key", "theta_levels"]
