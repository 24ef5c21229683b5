"""Discrete non-negative integer probability laws.

Each law exposes exact pmf/survival/moments, a regular-variation
classification, and a sampler driven by a counter-based stream.  Heavy
built-ins use pure power-law tails so that ``survival`` is available in closed
form:

* ``DiscretePareto(alpha)``: P(Z >= k) = k**(-alpha) on {1, 2, ...} -- the
  canonical heavy law, sampled by exact inversion Z = floor(U**(-1/alpha)).
* ``Zeta(alpha)``: pmf k**-(alpha+1) / zeta(alpha+1) on {1, 2, ...}.  Exact
  pmf/survival via the Hurwitz zeta function; the sampler inverts a cumulative
  table up to a cutoff and continues with a power tail of the same index, so
  beyond the cutoff (default 10**6, holding ~1e-6 of the mass or less) the
  sampled law follows the continuation rather than the exact zeta tail.
* ``TableLaw``: explicit finite pmf, optionally continued by a power tail
  ``survival(x) = tail_mass * ((floor(x)+1)/L)**(-tail_index)`` past the table.

``survival(x)`` always means P(Z > x) with floor semantics for real x, and
equals 1 for x < 0.  Infinite moments are values (``math.inf``), not errors.
"""

import math

import numpy as np
from scipy.special import gammaln, zeta as _hurwitz
from scipy.stats import poisson as _poisson_dist

from . import _kernels as _k
from .errors import LawError

KINDS = ("Deterministic", "Bernoulli", "Poisson", "Geometric", "DiscretePareto", "Zeta", "TableLaw")

_ZETA_DEFAULT_CUTOFF = 1_000_000


class TailClass:
    """Either regularly varying with a positive index, or light.

    A light law here has finite moments of every order (all non-heavy
    built-ins do), recorded as ``finite_moment_order = inf``.
    """

    __slots__ = ("regularly_varying", "index", "finite_moment_order")

    def __init__(self, regularly_varying, index=None, finite_moment_order=math.inf):
        self.regularly_varying = regularly_varying
        self.index = index
        self.finite_moment_order = finite_moment_order

    def __repr__(self):
        if self.regularly_varying:
            return f"TailClass(regularly_varying, index={self.index})"
        return f"TailClass(light, finite_moment_order={self.finite_moment_order})"

    def __eq__(self, other):
        return (isinstance(other, TailClass)
                and self.regularly_varying == other.regularly_varying
                and self.index == other.index
                and self.finite_moment_order == other.finite_moment_order)


def _power_tail_moment(q, alpha, coef, start):
    """Sum of (k**q - (k-1)**q) * coef * (k/start)**(-alpha) over k >= start.

    This is E(Z**q ; tail part) written through the survival function for a
    law with P(Z > x) = coef * ((floor(x)+1)/start)**(-alpha) past the table.
    Partial sum plus an integral remainder; accurate to ~1e-9 relative for
    alpha - q bounded away from zero.
    """
    if q >= alpha:
        return math.inf
    scale = coef * start ** alpha
    total = 0.0
    k = start
    block = np.arange(1, 1_000_001, dtype=np.float64)
    ks = block + (start - 1)
    total += float(np.sum((ks ** q - (ks - 1.0) ** q) * ks ** (-alpha))) * scale
    k_end = start + 1_000_000
    # integral remainder of q * x**(q-1-alpha) past the summed range
    total += scale * q * (k_end - 0.5) ** (q - alpha) / (alpha - q)
    return total


class LawSpec:
    """A discrete non-negative integer law: kind plus numeric parameters.

    Immutable after construction; safe to share across threads.  Sampling
    takes an explicit :class:`gw2.rng.Stream` -- there is no hidden global RNG.
    """

    def __init__(self, kind, **params):
        if kind not in KINDS:
            raise LawError(f"unknown law kind {kind!r}")
        self.kind = kind
        self.params = dict(params)
        self._table = None          # pmf table for table-backed sampling
        self._cum = None
        self._tail_start = 0.0      # first tail support point L
        self._tail_alpha = 0.0
        self._tail_mass = 0.0
        self._validate()
        self._pack = None
        self._solo = None

    # -- construction helpers ------------------------------------------------

    def _validate(self):
        p = self.params
        k = self.kind
        if k == "Deterministic":
            c = p.get("c")
            if not isinstance(c, (int, np.integer)) or c < 0:
                raise LawError("Deterministic requires integer c >= 0")
        elif k == "Bernoulli":
            if not 0.0 <= p.get("p", -1) <= 1.0:
                raise LawError("Bernoulli requires p in [0, 1]")
        elif k == "Poisson":
            if not p.get("lam", -1) >= 0.0:
                raise LawError("Poisson requires lam >= 0")
        elif k == "Geometric":
            if not 0.0 < p.get("p", -1) <= 1.0:
                raise LawError("Geometric requires p in (0, 1]")
        elif k in ("DiscretePareto", "Zeta"):
            if not p.get("alpha", -1) > 0.0:
                raise LawError(f"{k} requires alpha > 0")
            if k == "Zeta":
                cutoff = int(p.get("cutoff", _ZETA_DEFAULT_CUTOFF))
                if cutoff < 2:
                    raise LawError("Zeta cutoff must be >= 2")
                self._build_zeta_table(p["alpha"], cutoff)
        elif k == "TableLaw":
            self._build_table_law(p)

    def _build_zeta_table(self, alpha, cutoff):
        s = alpha + 1.0
        z = float(_hurwitz(s, 1.0))
        ks = np.arange(cutoff + 1, dtype=np.float64)
        pmf = np.zeros(cutoff + 1)
        pmf[1:] = ks[1:] ** (-s) / z
        tail_mass = float(_hurwitz(s, cutoff + 1.0)) / z
        cum = np.cumsum(pmf)
        cum[-1] = 1.0 - tail_mass
        self._table = pmf
        self._cum = cum
        self._tail_start = float(cutoff + 1)
        self._tail_alpha = float(alpha)
        self._tail_mass = tail_mass

    def _build_table_law(self, p):
        table = np.asarray(p.get("pmf", ()), dtype=np.float64)
        if table.ndim != 1 or table.size == 0:
            raise LawError("TableLaw requires a non-empty pmf list")
        if np.any(table < 0):
            raise LawError("TableLaw pmf entries must be >= 0")
        mass = float(np.sum(table))
        tail_index = p.get("tail_index")
        if tail_index is None:
            if abs(mass - 1.0) > 1e-12:
                raise LawError(f"TableLaw pmf sums to {mass!r}, expected 1 within 1e-12")
            tail_mass = 0.0
        else:
            if not tail_index > 0:
                raise LawError("TableLaw tail_index must be > 0")
            tail_mass = 1.0 - mass
            if tail_mass <= 0.0:
                raise LawError("TableLaw with a tail needs table mass strictly below 1")
        cum = np.cumsum(table)
        cum[-1] = 1.0 - tail_mass
        self._table = table
        self._cum = cum
        self._tail_start = float(table.size)
        self._tail_alpha = float(tail_index) if tail_index is not None else 0.0
        self._tail_mass = tail_mass

    # -- identity ------------------------------------------------------------

    def _key(self):
        items = []
        for name in sorted(self.params):
            v = self.params[name]
            if isinstance(v, (list, tuple, np.ndarray)):
                items.append((name, tuple(float(x) for x in v)))
            else:
                items.append((name, v))
        return (self.kind, tuple(items))

    def __eq__(self, other):
        return isinstance(other, LawSpec) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in sorted(self.params.items()) if k != "pmf")
        return f"LawSpec({self.kind}, {args})" if args else f"LawSpec({self.kind})"

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        params = {}
        for name, v in self.params.items():
            if isinstance(v, (list, tuple, np.ndarray)):
                params[name] = [float(x) for x in v]
            elif isinstance(v, (int, np.integer)):
                params[name] = int(v)
            else:
                params[name] = float(v)
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or set(d) != {"kind", "params"}:
            raise LawError("law descriptor must be {'kind': ..., 'params': {...}}")
        if not isinstance(d["params"], dict):
            raise LawError("law params must be a mapping")
        return cls(d["kind"], **d["params"])

    # -- exact quantities ------------------------------------------------------

    def pmf(self, k):
        """P(Z = k) for integer k >= 0."""
        k = int(k)
        if k < 0:
            return 0.0
        p = self.params
        kind = self.kind
        if kind == "Deterministic":
            return 1.0 if k == p["c"] else 0.0
        if kind == "Bernoulli":
            return {0: 1.0 - p["p"], 1: p["p"]}.get(k, 0.0)
        if kind == "Poisson":
            lam = p["lam"]
            if lam == 0.0:
                return 1.0 if k == 0 else 0.0
            return math.exp(k * math.log(lam) - lam - gammaln(k + 1))
        if kind == "Geometric":
            return p["p"] * (1.0 - p["p"]) ** k
        if kind == "DiscretePareto":
            if k == 0:
                return 0.0
            a = p["alpha"]
            return k ** (-a) - (k + 1.0) ** (-a)
        if kind == "Zeta":
            if k == 0:
                return 0.0
            s = p["alpha"] + 1.0
            return k ** (-s) / float(_hurwitz(s, 1.0))
        # TableLaw
        if k < self._table.size:
            return float(self._table[k])
        if self._tail_mass <= 0.0:
            return 0.0
        a = self._tail_alpha
        scale = self._tail_mass * self._tail_start ** a
        return scale * (k ** (-a) - (k + 1.0) ** (-a))

    def survival(self, x):
        """Exact P(Z > x) for real x, with floor semantics."""
        if x < 0:
            return 1.0
        j = math.floor(x)
        p = self.params
        kind = self.kind
        if kind == "Deterministic":
            return 1.0 if j < p["c"] else 0.0
        if kind == "Bernoulli":
            return p["p"] if j < 1 else 0.0
        if kind == "Poisson":
            lam = p["lam"]
            if lam == 0.0:
                return 0.0
            return float(_poisson_dist.sf(j, lam))
        if kind == "Geometric":
            return (1.0 - p["p"]) ** (j + 1)
        if kind == "DiscretePareto":
            return (j + 1.0) ** (-p["alpha"])
        if kind == "Zeta":
            s = p["alpha"] + 1.0
            return float(_hurwitz(s, j + 1.0)) / float(_hurwitz(s, 1.0))
        # TableLaw
        if j >= self._table.size - 1:
            if self._tail_mass <= 0.0:
                return 0.0
            return self._tail_mass * ((j + 1.0) / self._tail_start) ** (-self._tail_alpha)
        return float(1.0 - self._cum[j])

    def mean(self):
        """E(Z); math.inf when the mean diverges."""
        p = self.params
        kind = self.kind
        if kind == "Deterministic":
            return float(p["c"])
        if kind == "Bernoulli":
            return p["p"]
        if kind == "Poisson":
            return p["lam"]
        if kind == "Geometric":
            return (1.0 - p["p"]) / p["p"]
        if kind == "DiscretePareto":
            a = p["alpha"]
            if a <= 1.0:
                return math.inf
            return float(_hurwitz(a, 1.0))
        if kind == "Zeta":
            a = p["alpha"]
            if a <= 1.0:
                return math.inf
            return float(_hurwitz(a, 1.0)) / float(_hurwitz(a + 1.0, 1.0))
        # TableLaw: table part plus analytic tail part
        table_part = float(np.dot(np.arange(self._table.size), self._table))
        if self._tail_mass <= 0.0:
            return table_part
        if self._tail_alpha <= 1.0:
            return math.inf
        tail = _power_tail_moment(1.0, self._tail_alpha, self._tail_mass, self._tail_start)
        return table_part + tail

    def moment(self, q):
        """E(Z**q) for q > 0; math.inf when the moment diverges."""
        if not q > 0:
            raise LawError("moment order q must be > 0")
        p = self.params
        kind = self.kind
        if kind == "Deterministic":
            return float(p["c"]) ** q if p["c"] > 0 else 0.0
        if kind == "Bernoulli":
            return p["p"]
        if kind == "Poisson":
            lam = p["lam"]
            if lam == 0.0:
                return 0.0
            total = 0.0
            logp = -lam
            k = 0
            while True:
                if k > 0:
                    logp += math.log(lam) - math.log(k)
                term = math.exp(logp) * k ** q if k > 0 else 0.0
                total += term
                k += 1
                if k > lam + 60.0 * math.sqrt(lam) + 60.0:
                    return total
        if kind == "Geometric":
            pr = p["p"]
            total = 0.0
            factor = pr
            k = 0
            while factor > 1e-18 * max(total, 1.0) or k < 10:
                total += factor * k ** q
                factor *= (1.0 - pr)
                k += 1
                if k > 100_000:
                    break
            return total
        if kind == "DiscretePareto":
            a = p["alpha"]
            if q >= a:
                return math.inf
            # E(Z**q) through survival: sum of ((k)**q-(k-1)**q) * k**(-a), k >= 1
            return _power_tail_moment(q, a, 1.0, 1)
        if kind == "Zeta":
            a = p["alpha"]
            if q >= a:
                return math.inf
            return float(_hurwitz(a + 1.0 - q, 1.0)) / float(_hurwitz(a + 1.0, 1.0))
        # TableLaw
        ks = np.arange(self._table.size, dtype=np.float64)
        table_part = float(np.dot(ks ** q, self._table))
        if self._tail_mass <= 0.0:
            return table_part
        if q >= self._tail_alpha:
            return math.inf
        tail = _power_tail_moment(q, self._tail_alpha, self._tail_mass, self._tail_start)
        return table_part + tail

    def tail_class(self):
        kind = self.kind
        if kind in ("DiscretePareto", "Zeta"):
            return TailClass(True, index=float(self.params["alpha"]))
        if kind == "TableLaw" and self._tail_mass > 0.0:
            return TailClass(True, index=self._tail_alpha)
        return TailClass(False)

    def is_degenerate_zero(self):
        """True when P(Z = 0) = 1."""
        return self.pmf(0) >= 1.0

    # -- sampling --------------------------------------------------------------

    def kernel_pack(self):
        """(code, main_param, cum_table, tail_start, tail_alpha, tail_mass)."""
        if self._pack is not None:
            return self._pack
        kind = self.kind
        p = self.params
        empty = np.empty(0, np.float64)
        if kind == "Deterministic":
            pack = (_k.DETERMINISTIC, float(p["c"]), empty, 0.0, 0.0, 0.0)
        elif kind == "Bernoulli":
            pack = (_k.BERNOULLI, float(p["p"]), empty, 0.0, 0.0, 0.0)
        elif kind == "Poisson":
            pack = (_k.POISSON, float(p["lam"]), empty, 0.0, 0.0, 0.0)
        elif kind == "Geometric":
            pack = (_k.GEOMETRIC, float(p["p"]), empty, 0.0, 0.0, 0.0)
        elif kind == "DiscretePareto":
            pack = (_k.DISCRETE_PARETO, float(p["alpha"]), empty, 0.0, 0.0, 0.0)
        else:
            pack = (_k.TABLE, 0.0, self._cum, self._tail_start, self._tail_alpha, self._tail_mass)
        self._pack = pack
        return pack

    def sample(self, stream):
        """One draw, advancing ``stream``."""
        if self._solo is None:
            self._solo = pack_laws([self])
        codes, params, tables, offs = self._solo
        value, stream.state = _k.sample_one(0, codes, params, tables, offs, stream.state)
        if value < 0:
            raise OverflowError("draw exceeded the representable population bound")
        return int(value)


def pack_laws(laws):
    """Pack laws into the flat arrays consumed by the simulation kernels."""
    codes = np.empty(len(laws), np.int64)
    params = np.zeros((len(laws), 4), np.float64)
    offs = np.zeros(len(laws) + 1, np.int64)
    pieces = []
    pos = 0
    for i, law in enumerate(laws):
        code, p, table, tail_start, tail_alpha, tail_mass = law.kernel_pack()
        codes[i] = code
        params[i, 0] = p
        params[i, 1] = tail_start
        params[i, 2] = tail_alpha
        params[i, 3] = tail_mass
        offs[i] = pos
        pieces.append(table)
        pos += table.size
    offs[-1] = pos
    tables = np.concatenate(pieces) if pos else np.empty(0, np.float64)
    return codes, params, tables, offs


# Convenience constructors mirroring the law kinds.

def deterministic(c):
    return LawSpec("Deterministic", c=int(c))


def bernoulli(p):
    return LawSpec("Bernoulli", p=float(p))


def poisson(lam):
    return LawSpec("Poisson", lam=float(lam))


def geometric(p):
    return LawSpec("Geometric", p=float(p))


def discrete_pareto(alpha):
    return LawSpec("DiscretePareto", alpha=float(alpha))


def zeta_law(alpha, cutoff=_ZETA_DEFAULT_CUTOFF):
    return LawSpec("Zeta", alpha=float(alpha), cutoff=int(cutoff))


def table_law(pmf, tail_index=None):
    if tail_index is None:
        return LawSpec("TableLaw", pmf=list(map(float, pmf)))
    return LawSpec("TableLaw", pmf=list(map(float, pmf)), tail_index=float(tail_index))
