"""The two families of pseudo-affine examples and their epsilon sequences.

Case (a) perturbs every gap of length n by ``eps_n`` on both branches.
Case (b) perturbs only the gaps ``(01)^k`` on branch 1, by ``eps_k``.
The recursions are tuned so that the perturbations are exactly as large
as regularity class C^s allows, e.g. ``eps_n = Psi(n)^(s-1)`` in case (a).

Sequences extend on demand.  Every term keeps its logarithm as well, so
the s = inf recursions (whose terms fall below 1e-300 within a few dozen
steps) stay exact in log form after the float values underflow.
"""

from __future__ import annotations

import csv
import io
import math
import threading

import numpy as np

from .errors import DomainError
from .proportions import ProportionPair

TINY = 1e-300
KINDS = ("a-s1", "a-finite", "a-infty", "b-finite", "b-infty")


def parse_s(s) -> float:
    """Regularity index: a number >= 1 or ``inf``."""
    if isinstance(s, str):
        if s.strip().lower() in ("inf", "infinity", "oo"):
            return math.inf
        try:
            s = float(s)
        except ValueError:
            raise DomainError(f"cannot read regularity s={s!r}") from None
    s = float(s)
    if math.isnan(s) or s < 1:
        raise DomainError(f"regularity s must be >= 1, got {s}")
    return s


def s_to_json(s: float):
    if math.isinf(s):
        return "inf"
    return int(s) if float(s).is_integer() else s


class EpsilonSequence:
    """Lazily extended sequence eps_0, eps_1, ... of one of the five kinds."""

    def __init__(self, kind: str, lam: float, s: float = math.inf, gamma: float = 2.0,
                 eps0: float = 0.0):
        if kind not in KINDS:
            raise DomainError(f"unknown sequence kind {kind!r}")
        if not (0.0 < lam < 0.5):
            raise DomainError(f"lambda must lie in (0, 1/2), got {lam}")
        self.kind = kind
        self.lam = float(lam)
        self.s = s
        self.gamma = float(gamma)
        self.eps0 = float(eps0)
        self._vals: list[float] = []
        self._logs: list[float] = []
        self._array = np.zeros(0)
        self._lock = threading.Lock()
        self._start()

    @property
    def case(self) -> str:
        return self.kind[0]

    def _start(self):
        lam, s = self.lam, self.s
        if self.kind == "a-s1":
            first = [0.0, lam]
        elif self.kind == "a-finite":
            first = [0.0, lam ** (s - 1)]
        elif self.kind == "a-infty":
            first = [0.0, lam]
        elif self.kind == "b-finite":
            first = [self.eps0, (lam * (lam + self.eps0)) ** (s - 1)]
        else:
            first = [self.eps0, lam * (lam + self.eps0)]
        for v in first:
            self._append(v, math.log(v) if v > 0 else -math.inf)

    def _append(self, value: float, log_value: float):
        n = len(self._vals)
        if not (0.0 < self.lam + value < 1.0):
            raise DomainError(f"inadmissible term: lambda + eps_{n} = {self.lam + value}")
        if n >= 2 and not log_value < self._logs[-1]:
            raise DomainError(f"sequence fails to decrease at n = {n}")
        self._vals.append(value)
        self._logs.append(log_value)

    def _next(self) -> tuple[float, float]:
        n = len(self._vals) - 1  # index of the last term
        lam, s = self.lam, self.s
        v, lv = self._vals[n], self._logs[n]
        a = lam + v
        if self.kind == "a-s1":
            m = n + 1
            val = lam * m ** (-self.gamma)
            return val, math.log(lam) - self.gamma * math.log(m)
        if self.kind == "a-finite":
            lnew = lv + (s - 1) * math.log(a)
            val = v * a ** (s - 1) if v > TINY else math.exp(lnew)
        elif self.kind == "a-infty":
            lnew = (n + 1) / n * lv + (n + 1) * math.log(a)
            val = math.exp(lnew)
        elif self.kind == "b-finite":
            lnew = (s - 1) * math.log(lam) + lv + (s - 1) * math.log(a)
            val = lam ** (s - 1) * v * a ** (s - 1) if v > TINY else math.exp(lnew)
        else:
            k = n
            lnew = (k + 1) * math.log(lam) + (k + 1) / k * lv + (k + 1) * math.log(a)
            val = math.exp(lnew)
        return val, lnew

    def extend(self, n: int):
        """Make sure eps_0..eps_n exist."""
        if n < len(self._vals):
            return
        with self._lock:
            while len(self._vals) <= n:
                self._append(*self._next())

    def __getitem__(self, n: int) -> float:
        if n < 0:
            raise IndexError(n)
        if n >= len(self._vals):
            self.extend(n)
        return self._vals[n]

    def log(self, n: int) -> float:
        """log eps_n (``-inf`` for a zero term)."""
        self.extend(n)
        return self._logs[n]

    def log_only(self, n: int) -> bool:
        """True when eps_n is only meaningful through its logarithm."""
        self.extend(n)
        return self._vals[n] < TINY and self._logs[n] > -math.inf

    def values_upto(self, n: int) -> np.ndarray:
        if len(self._array) <= n:
            self.extend(max(n, 2 * len(self._array), 64))
            with self._lock:
                self._array = np.array(self._vals)
        return self._array

    def __len__(self):
        return len(self._vals)

    # envelope: sup of |theta| over suffixes longer than N ---------------

    def envelope(self, N: int) -> float:
        if self.case == "a":
            if N < 0:
                return self[1]  # eps_0 = 0 and the rest decrease
            if self.kind == "a-s1":
                return self.lam * (N + 1) ** (-self.gamma)
            return self[N + 1]
        if N < 0:
            return max(self[0], self[1])
        return self[N // 2 + 1]

    def to_csv(self, n_max: int) -> str:
        self.extend(n_max)
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(["n", "eps", "log_eps"])
        for n in range(n_max + 1):
            out.writerow([n, f"{self._vals[n]:.17g}", f"{self._logs[n]:.17g}"])
        return buf.getvalue()


def gen_case_a(lam: float, s, n_max: int, gamma: float = 2.0) -> EpsilonSequence:
    """eps_n for case (a): all gaps of length n get eps_n."""
    s = parse_s(s)
    if s == 1:
        if gamma <= 0:
            raise DomainError("gamma must be positive")
        seq = EpsilonSequence("a-s1", lam, s=1.0, gamma=gamma)
    elif math.isinf(s):
        seq = EpsilonSequence("a-infty", lam)
    else:
        seq = EpsilonSequence("a-finite", lam, s=s)
    seq.extend(n_max)
    return seq


def gen_case_b(lam: float, s, eps0: float, k_max: int) -> EpsilonSequence:
    """eps_k for case (b): only the gaps (01)^k on branch 1 are perturbed."""
    s = parse_s(s)
    if not (0.0 < eps0 < 0.5):
        raise DomainError(f"eps0 must lie in (0, 1/2), got {eps0}")
    if s == 1:
        raise DomainError("case (b) needs s > 1")
    kind = "b-infty" if math.isinf(s) else "b-finite"
    seq = EpsilonSequence(kind, lam, s=s, eps0=eps0)
    seq.extend(k_max)
    return seq


def as_proportions(seq: EpsilonSequence, case: str) -> ProportionPair:
    if case != seq.case:
        raise DomainError(f"a {seq.kind} sequence cannot drive case ({case})")
    if case == "a":
        params = {"family": "a", "s": s_to_json(seq.s)}
        if seq.kind == "a-s1":
            params["gamma"] = seq.gamma
        return ProportionPair.length_only(seq.lam, seq, seq.envelope, params)
    params = {"family": "b", "s": s_to_json(seq.s), "eps0": seq.eps0}
    return ProportionPair.case_b(seq.lam, seq, seq.envelope, params)


def example(case: str, lam: float = 0.3, s=2, eps0: float = 0.2, gamma: float = 2.0
            ) -> ProportionPair:
    """Convenience constructor used by the CLI and the tests."""
    if case == "zero":
        return ProportionPair.constant(lam)
    if case == "a":
        return as_proportions(gen_case_a(lam, s, 0, gamma=gamma), "a")
    if case == "b":
        return as_proportions(gen_case_b(lam, s, eps0, 0), "b")
    raise DomainError(f"unknown example case {case!r}")


def log_psi_length(seq: EpsilonSequence, n: int) -> float:
    """log of prod_{i<n} (lam + eps_i)."""
    return math.fsum(math.log(seq.lam + seq[i]) for i in range(n))


def log_psi_alternating(seq: EpsilonSequence, k: int) -> float:
    """log of lam^k prod_{r<k} (lam + eps_r), i.e. log Psi((01)^k) in case (b)."""
    return k * math.log(seq.lam) + log_psi_length(seq, k)
