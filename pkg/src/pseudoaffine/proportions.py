"""Dynamical proportions, the cocycle Psi and its certified total sum.

A proportion pair is a number ``lam`` in (0, 1/2) together with two
corrections ``theta(i, w)``; the proportion of the gap ``iw`` inside the
gap ``w`` is ``lam + theta(i, w)``.  The cocycle is

    Psi(w1...wn) = prod_k (lam + theta(w_k, w_{k+1}...w_n)),   Psi(e) = 1,

so that ``Psi(iw) = (lam + theta(i, w)) * Psi(w)``.

Built-in kinds describe ``theta`` by a small automaton that reads the
suffix ``w`` from right to left.  ``theta`` then depends only on the
automaton state, the next letter and ``len(w)``.  This lets level sums
and cylinder masses be computed by aggregating over states instead of
enumerating 2^n words, which is what makes tight tolerances affordable.
Custom kinds fall back to enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import CapabilityError, CapacityError, ConvergenceError, DomainError
from .words import format_word

# enumeration cap for custom kinds (2**22 words per level)
MAX_ENUM_DEPTH = 22
# level cap for automaton summation
MAX_LEVELS = 20000
_ULP = 2.0 ** -52


@dataclass(frozen=True, eq=False)
class SuffixAutomaton:
    """Right-to-left reader of suffixes that determines ``theta``.

    ``transitions[q, x]`` is the state after prepending letter ``x`` to a
    suffix in state ``q``; the empty suffix is in state ``start``.
    ``theta(letters, states, lengths)`` is vectorized over numpy arrays and
    returns ``theta(letter, w)`` for a suffix ``w`` of the given state and
    length.  States in ``null_states`` are absorbing and have zero theta.
    When ``uniform`` is set theta depends on the length alone.
    """

    transitions: np.ndarray
    start: int
    theta: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    null_states: frozenset = frozenset()
    uniform: bool = False

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    def run(self, w: str) -> int:
        q = self.start
        for c in reversed(w):
            q = int(self.transitions[q, int(c)])
        return q


@dataclass(frozen=True, eq=False)
class ProportionPair:
    """The data (lam, theta_0, theta_1) of a binary Cantor set.

    Use the constructors :meth:`constant`, :meth:`length_only`,
    :meth:`case_b` and :meth:`custom` rather than the raw initializer.
    """

    lam: float
    kind: str
    theta_fn: Callable[[int, str], float]
    envelope_fn: Callable[[int], float] | None = None
    automaton: SuffixAutomaton | None = None
    support_depth: int | None = None
    params: Mapping = field(default_factory=dict)
    eps: object = None

    def __post_init__(self):
        if not (0.0 < self.lam < 0.5):
            raise DomainError(f"lambda must lie in (0, 1/2), got {self.lam}")

    # constructors -------------------------------------------------------

    @classmethod
    def constant(cls, lam: float) -> "ProportionPair":
        aut = SuffixAutomaton(
            transitions=np.zeros((1, 2), dtype=np.int64),
            start=0,
            theta=lambda x, q, n: np.zeros(np.broadcast(x, q, n).shape),
            null_states=frozenset({0}),
            uniform=True,
        )
        return cls(lam=float(lam), kind="constant-zero", theta_fn=lambda i, w: 0.0,
                   envelope_fn=lambda N: 0.0, automaton=aut, support_depth=-1)

    @classmethod
    def length_only(cls, lam, eps, envelope, params=None) -> "ProportionPair":
        """theta_i(w) = eps[len(w)] for both letters."""

        def theta_vec(x, q, n):
            n = np.asarray(n)
            vals = eps.values_upto(int(n.max()) if n.size else 0)
            return np.broadcast_to(vals[n], np.broadcast(x, q, n).shape)

        aut = SuffixAutomaton(transitions=np.zeros((1, 2), dtype=np.int64), start=0,
                              theta=theta_vec, uniform=True)
        return cls(lam=float(lam), kind="length-only", theta_fn=lambda i, w: eps[len(w)],
                   envelope_fn=envelope, automaton=aut, params=dict(params or {}), eps=eps)

    @classmethod
    def case_b(cls, lam, eps, envelope, params=None) -> "ProportionPair":
        """theta_1((01)^k) = eps[k]; every other theta vanishes."""
        # states: 0 = (01)^k, 1 = 1(01)^k, 2 = anything else
        trans = np.array([[2, 1], [0, 2], [2, 2]], dtype=np.int64)

        def theta_vec(x, q, n):
            x, q, n = np.broadcast_arrays(np.asarray(x), np.asarray(q), np.asarray(n))
            hit = (x == 1) & (q == 0)
            out = np.zeros(x.shape)
            if hit.any():
                k = n[hit] // 2
                out[hit] = eps.values_upto(int(k.max()))[k]
            return out

        def theta_fn(i, w):
            k = len(w) // 2
            if i == 1 and len(w) % 2 == 0 and w == "01" * k:
                return eps[k]
            return 0.0

        aut = SuffixAutomaton(transitions=trans, start=0, theta=theta_vec,
                              null_states=frozenset({2}))
        return cls(lam=float(lam), kind="case-b", theta_fn=theta_fn, envelope_fn=envelope,
                   automaton=aut, params=dict(params or {}), eps=eps)

    @classmethod
    def custom(cls, lam, theta, envelope=None, support_depth=None,
               automaton=None) -> "ProportionPair":
        """Caller-supplied ``theta(i, w)``.

        ``support_depth`` d declares theta(i, w) = 0 whenever len(w) > d;
        it implies the envelope and makes all sums exact.
        """
        if support_depth is not None and envelope is None:
            envelope = _support_envelope(theta, support_depth)
        return cls(lam=float(lam), kind="custom", theta_fn=theta, envelope_fn=envelope,
                   automaton=automaton, support_depth=support_depth)

    # queries ------------------------------------------------------------

    def theta(self, i: int, w: str) -> float:
        return float(self.theta_fn(int(i), w))

    def proportion(self, i: int, w: str) -> float:
        """lam + theta(i, w), checked for admissibility."""
        v = self.lam + self.theta(i, w)
        if not (0.0 < v < 1.0):
            raise DomainError(f"inadmissible proportion {v} for letter {i} on suffix {format_word(w)}")
        return v

    def envelope(self, N: int) -> float:
        """Certified bound on sup |theta(i, w)| over len(w) > N (N >= -1)."""
        if self.envelope_fn is None:
            raise CapabilityError(f"{self.kind} proportions carry no certified decay envelope")
        return float(self.envelope_fn(max(int(N), -1)))

    def has_envelope(self) -> bool:
        return self.envelope_fn is not None

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise CapabilityError("custom proportions are not serializable")
        return {"lambda": self.lam, "kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ProportionPair":
        try:
            lam = float(doc["lambda"])
            kind = doc["kind"]
            params = dict(doc.get("params", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed proportion document: {exc}") from None
        if kind == "constant-zero":
            return cls.constant(lam)
        from . import families

        if kind == "length-only":
            seq = families.gen_case_a(lam, families.parse_s(params.get("s", 2)), 0,
                                      gamma=float(params.get("gamma", 2.0)))
            return families.as_proportions(seq, "a")
        if kind == "case-b":
            seq = families.gen_case_b(lam, families.parse_s(params.get("s", 2)),
                                      float(params["eps0"]), 0)
            return families.as_proportions(seq, "b")
        raise DomainError(f"unknown proportion kind {kind!r}")


def _support_envelope(theta, d):
    """Envelope for a theta vanishing beyond length d, by scanning shorter words."""
    cache = {}

    def env(N):
        if N >= d:
            return 0.0
        if N not in cache:
            if d > MAX_ENUM_DEPTH:
                raise CapacityError("support depth too large to scan for an envelope")
            best = 0.0
            for n in range(max(N + 1, 0), d + 1):
                for j in range(2 ** n):
                    w = format(j, f"0{n}b") if n else ""
                    best = max(best, abs(theta(0, w)), abs(theta(1, w)))
            cache[N] = best
        return cache[N]

    return env


def _check_factors(f: np.ndarray, where: str):
    bad = ~((f > 0.0) & (f < 1.0))
    if bad.any():
        raise DomainError(f"inadmissible proportion {float(f[bad].flat[0])} {where}")


def psi(p: ProportionPair, w: str) -> float:
    """Psi(w) as the literal product, factors taken left to right."""
    value = 1.0
    for k in range(len(w)):
        value *= p.proportion(int(w[k]), w[k + 1:])
    return value


def theta_levels(p: ProportionPair, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """theta_0 and theta_1 on every word of each length 0..n.

    Words of length k are indexed by their binary value, first letter most
    significant.
    """
    out = []
    aut = p.automaton
    if aut is not None:
        states = np.array([aut.start], dtype=np.int64)
        for k in range(n + 1):
            t0 = np.array(aut.theta(np.zeros_like(states), states, np.full_like(states, k)), dtype=float)
            t1 = np.array(aut.theta(np.ones_like(states), states, np.full_like(states, k)), dtype=float)
            out.append((t0, t1))
            states = np.concatenate([aut.transitions[states, 0], aut.transitions[states, 1]])
        return out
    if n > MAX_ENUM_DEPTH:
        raise CapacityError(f"custom proportions cannot be enumerated beyond length {MAX_ENUM_DEPTH}")
    for k in range(n + 1):
        words = [format(j, f"0{k}b") if k else "" for j in range(2 ** k)]
        out.append((np.array([p.theta(0, w) for w in words]),
                    np.array([p.theta(1, w) for w in words])))
    return out


def psi_levels(p: ProportionPair, n: int, thetas=None) -> list[np.ndarray]:
    """Psi on every word of each length 0..n, via Psi(iw) = (lam+theta_i(w)) Psi(w)."""
    thetas = thetas if thetas is not None else theta_levels(p, max(n - 1, 0))
    levels = [np.ones(1)]
    for k in range(n):
        t0, t1 = thetas[k]
        f0, f1 = p.lam + t0, p.lam + t1
        _check_factors(f0, f"for letter 0 on a suffix of length {k}")
        _check_factors(f1, f"for letter 1 on a suffix of length {k}")
        levels.append(np.concatenate([f0 * levels[k], f1 * levels[k]]))
    return levels


@dataclass(frozen=True, eq=False)
class LevelSums:
    """Sums of Psi over each word length, with a certified tail.

    ``state_sums[m, q]`` (automaton kinds only) is the sum of Psi(v) over
    words v of length m whose suffix state is q.
    """

    level: np.ndarray
    state_sums: np.ndarray | None
    total: float
    depth: int
    tail_bound: float
    closed_tail: float = 0.0


def level_sums(p: ProportionPair, tail_tol: float) -> LevelSums:
    """Sum Psi level by level until the geometric tail bound drops below tail_tol.

    If every level m satisfies S_{m+1} <= 2(lam + E_m) S_m, where E_m bounds
    |theta| on suffixes of length >= m, then the levels past depth D sum to
    at most S_D q/(1-q) with q = 2(lam + envelope(D-1)).
    """
    if not tail_tol > 0:
        raise DomainError("tail_tol must be positive")
    if p.automaton is not None:
        if not p.has_envelope():
            raise CapabilityError("summation needs a certified decay envelope")
        return _automaton_sums(p, tail_tol)
    if p.support_depth is not None:
        return _support_sums(p)
    if not p.has_envelope():
        raise CapabilityError("custom proportions need a decay envelope or a support depth")
    return _enumerated_sums(p, tail_tol)


def _rounding(level: np.ndarray) -> float:
    m = np.arange(len(level))
    return float(np.sum((m + 4) * level)) * 1.2 * _ULP


def _automaton_sums(p: ProportionPair, tail_tol: float) -> LevelSums:
    aut = p.automaton
    lam = p.lam
    Q = aut.n_states
    trans = aut.transitions
    rows = [np.zeros(Q)]
    rows[0][aut.start] = 1.0
    sums = [1.0]
    qidx = np.arange(Q)
    m = 0
    while True:
        q = 2.0 * (lam + p.envelope(m - 1))
        if q < 1.0:
            tail = sums[m] * q / (1.0 - q)
            rnd = _rounding(np.array(sums))
            if tail + rnd <= tail_tol:
                break
        if m >= MAX_LEVELS:
            raise ConvergenceError(
                f"tail of the Psi-sum not certified after {MAX_LEVELS} levels "
                f"(2(lam+eps) = {q})")
        new = np.zeros(Q)
        for x in (0, 1):
            f = lam + np.asarray(aut.theta(np.full(Q, x), qidx, np.full(Q, m)), dtype=float)
            live = rows[m] > 0
            _check_factors(f[live], f"for letter {x} on a suffix of length {m}")
            with np.errstate(over="ignore"):
                np.add.at(new, trans[:, x], f * rows[m])
        rows.append(new)
        sums.append(math.fsum(new))
        if not math.isfinite(sums[-1]):
            raise ConvergenceError(f"Psi-sum diverges (level {m + 1} overflows; "
                                   f"2(lam+eps) = {q})", math.inf)
        m += 1
    level = np.array(sums)
    return LevelSums(level=level, state_sums=np.array(rows), total=math.fsum(sums),
                     depth=m, tail_bound=tail + _rounding(level))


def _support_sums(p: ProportionPair) -> LevelSums:
    d = max(p.support_depth, -1)
    if d + 1 > MAX_ENUM_DEPTH:
        raise CapacityError(f"support depth {d} exceeds the enumeration cap")
    levels = psi_levels(p, d + 1)
    sums = [math.fsum(v) for v in levels]
    # beyond length d+1 every new leading factor is exactly lam
    closed = sums[-1] * 2 * p.lam / (1 - 2 * p.lam)
    level = np.array(sums)
    return LevelSums(level=level, state_sums=None, total=math.fsum(sums + [closed]),
                     depth=d + 1, tail_bound=_rounding(level) + closed * 4 * _ULP,
                     closed_tail=closed)


def _enumerated_sums(p: ProportionPair, tail_tol: float) -> LevelSums:
    sums = [1.0]
    psis = [np.ones(1)]
    m = 0
    while True:
        q = 2.0 * (p.lam + p.envelope(m - 1))
        tail = sums[m] * q / (1.0 - q) if q < 1.0 else math.inf
        if tail + _rounding(np.array(sums)) <= tail_tol:
            break
        if m + 1 > MAX_ENUM_DEPTH:
            if q >= 1.0:
                raise ConvergenceError(f"2(lam+eps) = {q} >= 1 at the deepest affordable level")
            raise CapacityError(f"tail bound {tail} above {tail_tol} at enumeration cap",)
        words = [format(j, f"0{m}b") if m else "" for j in range(2 ** m)]
        t0 = np.array([p.theta(0, w) for w in words])
        t1 = np.array([p.theta(1, w) for w in words])
        f0, f1 = p.lam + t0, p.lam + t1
        _check_factors(f0, f"for letter 0 at length {m}")
        _check_factors(f1, f"for letter 1 at length {m}")
        psis.append(np.concatenate([f0 * psis[m], f1 * psis[m]]))
        sums.append(math.fsum(psis[-1]))
        m += 1
    level = np.array(sums)
    return LevelSums(level=level, state_sums=None, total=math.fsum(sums), depth=m,
                     tail_bound=tail + _rounding(level))


def sum_psi(p: ProportionPair, tail_tol: float = 1e-13) -> tuple[float, int, float]:
    """Total of Psi over all words: (total, truncation_depth, tail_bound)."""
    s = level_sums(p, tail_tol)
    return s.total, s.depth, s.tail_bound


def decay_envelope(p: ProportionPair, N: int) -> float:
    return p.envelope(N)
