"""Closed-form analytics: mean recursion, clan-mean sequence, moment bounds,
and the heavy-tail predictors.

Every predictor returns a :class:`TailPrediction`: a non-negative linear
combination of primitive survival functions over the bases
``offspring1, offspring2, immigration, initial0, initialm1``.  Evaluated at a
threshold x it approximates P(X_n > x) for large x, with the coefficient
structure determined by which primitives are flagged heavy.

The clan-mean sequence m_k is the expected size at time k of the sub-process
grown from a single age-0 ancestor; it satisfies

    m_0 = 1,   m_k = m1 * m_{k-1} + m2 * m_{k-2}   (m_{-1} := 0)

with closed form (lp**(k+1) - lm**(k+1)) / (lp - lm) in the eigenvalues
lp, lm of the mean matrix [[m1, m2], [1, 0]].
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GW2Error, HypothesisError, InfiniteMeanError, UnsupportedProfileError
from .process import BASES

OFFSPRING_BASES = ("offspring1", "offspring2")
INITIAL_BASES = ("initial0", "initialm1")


@dataclass(frozen=True)
class MeanMatrix:
    """2x2 mean matrix [[m1, m2], [1, 0]] of the pair-state recursion."""

    m_offspring1: float
    m_offspring2: float
    entries: np.ndarray = field(compare=False, default=None)

    def __post_init__(self):
        if self.m_offspring1 < 0 or self.m_offspring2 < 0:
            raise GW2Error("offspring means must be non-negative")
        object.__setattr__(self, "entries", np.array(
            [[self.m_offspring1, self.m_offspring2], [1.0, 0.0]]))


def mean_matrix(m_offspring1, m_offspring2):
    return MeanMatrix(float(m_offspring1), float(m_offspring2))


def matrix_power(matrix, ell):
    """matrix.entries**ell by repeated multiplication; ell = 0 gives identity."""
    if ell < 0:
        raise GW2Error("matrix power requires ell >= 0")
    out = np.eye(2)
    for _ in range(int(ell)):
        out = out @ matrix.entries
    return out


@dataclass(frozen=True)
class MkSequence:
    """Clan means m_0..m_K plus the eigenvalues of the mean matrix."""

    lambda_plus: float
    lambda_minus: float
    values: np.ndarray

    def __getitem__(self, k):
        return float(self.values[k])

    def closed_form(self, k):
        """Eigenvalue formula; only valid when the eigenvalues differ."""
        lp, lm = self.lambda_plus, self.lambda_minus
        if lp == lm:
            raise GW2Error("closed form undefined for coincident eigenvalues")
        return (lp ** (k + 1) - lm ** (k + 1)) / (lp - lm)


def mk(m_offspring1, m_offspring2, K):
    """Clan-mean sequence up to index K by the linear recursion."""
    if m_offspring1 < 0 or m_offspring2 < 0:
        raise GW2Error("offspring means must be non-negative")
    if K < 0:
        raise GW2Error("K must be >= 0")
    disc = math.sqrt(m_offspring1 ** 2 + 4.0 * m_offspring2)
    lp = (m_offspring1 + disc) / 2.0
    lm = (m_offspring1 - disc) / 2.0
    values = np.empty(K + 1)
    values[0] = 1.0
    prev2, prev1 = 0.0, 1.0    # m_{-1}, m_0
    for k in range(1, K + 1):
        cur = m_offspring1 * prev1 + m_offspring2 * prev2
        values[k] = cur
        prev2, prev1 = prev1, cur
    return MkSequence(lambda_plus=lp, lambda_minus=lm, values=values)


def mean_forecast(scenario, n=None):
    """(E X_n, E X_{n-1}) from the exact expectation recursion."""
    if n is None:
        n = scenario.horizon
    if n < 1:
        raise GW2Error("n must be >= 1")
    means = {}
    for name, law in scenario.base_laws().items():
        m = law.mean()
        if math.isinf(m):
            raise InfiniteMeanError(f"law {name} has infinite mean")
        means[name] = m
    ex_prev, ex_prev2 = means["initial0"], means["initialm1"]
    for _ in range(n):
        ex = (means["offspring1"] * ex_prev
              + means["offspring2"] * ex_prev2
              + means["immigration"])
        ex_prev2, ex_prev = ex_prev, ex
    return ex_prev, ex_prev2


@dataclass
class TailPrediction:
    """Sum of coefficient * P(base > x) terms; evaluable at any threshold."""

    terms: list                 # list of (base_name, coefficient)
    provenance: str

    def __post_init__(self):
        for base, coef in self.terms:
            if base not in BASES and base not in ("count", "summand"):
                raise GW2Error(f"unknown prediction base {base!r}")
            if not (np.isfinite(coef) and coef >= 0):
                raise GW2Error(f"coefficient for {base} must be finite and >= 0")

    def evaluate(self, law_map, x):
        """Predicted exceedance probability at threshold x."""
        return sum(coef * law_map[base].survival(x) for base, coef in self.terms)

    def coefficient(self, base):
        return sum(c for b, c in self.terms if b == base)

    def merged(self):
        """Same prediction with one term per base, zero coefficients dropped."""
        out = {}
        for base, coef in self.terms:
            out[base] = out.get(base, 0.0) + coef
        terms = [(b, c) for b, c in out.items() if c > 0.0]
        return TailPrediction(terms=terms, provenance=self.provenance)


@dataclass(frozen=True)
class HeavyProfile:
    """Which primitives are regularly varying, their shared index, and the
    moment order certified for the remaining light primitives."""

    heavy: frozenset
    index: float
    light_moment_order: float

    def __init__(self, heavy, index, light_moment_order):
        object.__setattr__(self, "heavy", frozenset(heavy))
        object.__setattr__(self, "index", float(index))
        object.__setattr__(self, "light_moment_order", float(light_moment_order))
        if not self.heavy:
            raise GW2Error("profile must flag at least one heavy component")
        unknown = self.heavy - set(BASES)
        if unknown:
            raise GW2Error(f"unknown heavy components {sorted(unknown)}")
        if not self.index > 0:
            raise GW2Error("tail index must be > 0")
        if not self.light_moment_order > max(1.0, self.index):
            raise GW2Error("light moment order must exceed max(1, index)")

    def to_dict(self):
        return {"heavy": sorted(self.heavy), "index": self.index,
                "light_moment_order": self.light_moment_order}


def _validate_heavy_laws(scenario, profile):
    law_map = scenario.base_laws()
    for name in sorted(profile.heavy):
        tc = law_map[name].tail_class()
        if not tc.regularly_varying:
            raise HypothesisError(f"{name} flagged heavy but is not regularly varying")
        if abs(tc.index - profile.index) > 1e-12:
            raise HypothesisError(
                f"{name} has tail index {tc.index}, profile says {profile.index}")
    for name in BASES:
        if name in profile.heavy:
            continue
        m = law_map[name].moment(profile.light_moment_order)
        if math.isinf(m):
            raise HypothesisError(
                f"{name} must have a finite moment of order {profile.light_moment_order}")


def _offspring_sum_matrix(n, alpha, mkseq, matrix):
    """sum_{k=0}^{n-1} m_k**alpha * (M**(n-k-1))^T."""
    total = np.zeros((2, 2))
    for k in range(n):
        total += mkseq[k] ** alpha * matrix_power(matrix, n - k - 1).T
    return total


def clan_tail(n, profile, mkseq, matrix):
    """Tail predictions for the two single-ancestor clan values at time n.

    Returns (prediction for the age-0 clan, prediction for the age-1 clan),
    each a combination of the offspring survival functions.  When only one
    offspring law is heavy, the other base is dropped.
    """
    if n < 1:
        raise GW2Error("clan tail requires n >= 1 (it is deterministic at n = 0)")
    heavy_off = profile.heavy & set(OFFSPRING_BASES)
    if not heavy_off:
        raise HypothesisError("clan tail needs at least one heavy offspring law")
    total = _offspring_sum_matrix(n, profile.index, mkseq, matrix)
    mask = np.array([1.0 if "offspring1" in heavy_off else 0.0,
                     1.0 if "offspring2" in heavy_off else 0.0])
    preds = []
    for row in range(2):
        terms = [(OFFSPRING_BASES[j], float(total[row, j]) * mask[j]) for j in range(2)]
        terms = [(b, c) for b, c in terms if c > 0.0]
        preds.append(TailPrediction(terms=terms, provenance="single-ancestor-clan"))
    return preds[0], preds[1]


def _group_offspring(scenario, profile, n, mkseq, matrix, rveps_variant):
    """Heavy-offspring contribution: ancestor clans weighted by the initial
    means plus immigrant clans weighted by the immigration mean."""
    law_map = scenario.base_laws()
    heavy_off = profile.heavy & set(OFFSPRING_BASES)
    alpha = profile.index
    if alpha < 1.0:
        raise HypothesisError("offspring-heavy predictions require index >= 1")
    for name in sorted(heavy_off):
        if not law_map[name].mean() > 0:
            raise HypothesisError(f"heavy offspring law {name} needs a positive mean")
    if all(law_map[b].is_degenerate_zero() for b in ("initial0", "initialm1", "immigration")):
        raise HypothesisError(
            "at least one of initial0, initialm1, immigration must be non-zero")
    ex0 = law_map["initial0"].mean()
    exm1 = law_map["initialm1"].mean()
    m_imm = law_map["immigration"].mean()
    if math.isinf(ex0) or math.isinf(exm1) or math.isinf(m_imm):
        raise HypothesisError("offspring-heavy predictions need finite weight means")
    mask = np.array([1.0 if "offspring1" in heavy_off else 0.0,
                     1.0 if "offspring2" in heavy_off else 0.0])

    coeffs = np.array([ex0, exm1]) @ _offspring_sum_matrix(n, alpha, mkseq, matrix)
    if m_imm > 0.0:
        imm = np.zeros((2, 2))
        for i in range(1, n):
            for j in range(n - i):
                ell = (n - j - 1) if rveps_variant == "verbatim" else (n - i - j - 1)
                imm += mkseq[j] ** alpha * matrix_power(matrix, ell).T
        coeffs = coeffs + np.array([m_imm, 0.0]) @ imm
    coeffs = coeffs * mask
    return [(OFFSPRING_BASES[j], float(coeffs[j])) for j in range(2) if coeffs[j] > 0.0]


def _group_initial(scenario, profile, n, mkseq):
    """Heavy-initial contribution: m_n**idx * P(initial0 > x) plus
    (m_{n-1} * m2)**idx * P(initialm1 > x)."""
    law_map = scenario.base_laws()
    heavy_init = profile.heavy & set(INITIAL_BASES)
    idx = profile.index
    m2 = law_map["offspring2"].mean()
    terms = []
    if "initial0" in heavy_init:
        terms.append(("initial0", mkseq[n] ** idx))
    if "initialm1" in heavy_init:
        terms.append(("initialm1", (mkseq[n - 1] * m2) ** idx))
    return [(b, c) for b, c in terms if c > 0.0]


def _group_immigration(scenario, profile, n, mkseq):
    """Heavy-immigration contribution: sum_{i=1}^n m_{n-i}**idx * P(immigration > x).

    Degenerate offspring are fine: m_k = 0 for k >= 1 leaves only the most
    recent immigration cohort (the i = n term, m_0 = 1).
    """
    coef = sum(mkseq[n - i] ** profile.index for i in range(1, n + 1))
    return [("immigration", float(coef))] if coef > 0.0 else []


_PROVENANCE = {
    (True, False, False): "offspring-heavy",
    (False, True, False): "initial-heavy",
    (False, False, True): "immigration-heavy",
    (True, True, False): "offspring+initial-heavy",
    (True, False, True): "offspring+immigration-heavy",
    (False, True, True): "initial+immigration-heavy",
    (True, True, True): "all-heavy",
}


def predict_tail(scenario, profile, n=None, rveps_variant="consistent"):
    """Tail prediction for P(X_n > x), assembled per the heavy profile.

    ``rveps_variant`` selects the exponent convention for the immigrant-clan
    part of the offspring-heavy group: ``consistent`` (the default) uses the
    matrix exponent n-i-j-1, which is what substituting the clan horizon into
    the single-ancestor formula yields; ``verbatim`` keeps n-j-1 for
    side-by-side comparison.  Monte Carlo verification adjudicates.
    """
    if n is None:
        n = scenario.horizon
    if n < 1:
        raise GW2Error("n must be >= 1")
    if rveps_variant not in ("consistent", "verbatim"):
        raise GW2Error("rveps_variant must be 'consistent' or 'verbatim'")
    _validate_heavy_laws(scenario, profile)

    law_map = scenario.base_laws()
    m1 = law_map["offspring1"].mean()
    m2 = law_map["offspring2"].mean()
    if math.isinf(m1) or math.isinf(m2):
        raise HypothesisError("offspring means must be finite (index <= 1 heavy offspring "
                              "laws are outside the supported profiles)")
    mkseq = mk(m1, m2, max(n, 1))
    matrix = mean_matrix(m1, m2)

    has_off = bool(profile.heavy & set(OFFSPRING_BASES))
    has_init = bool(profile.heavy & set(INITIAL_BASES))
    has_imm = "immigration" in profile.heavy
    key = (has_off, has_init, has_imm)
    if key not in _PROVENANCE:
        raise UnsupportedProfileError(f"no prediction covers heavy set {sorted(profile.heavy)}")

    terms = []
    if has_off:
        terms += _group_offspring(scenario, profile, n, mkseq, matrix, rveps_variant)
    if has_init:
        terms += _group_initial(scenario, profile, n, mkseq)
    if has_imm:
        terms += _group_immigration(scenario, profile, n, mkseq)
    if not terms:
        raise UnsupportedProfileError(
            "prediction degenerates to zero; the flagged components cannot reach X_n")
    return TailPrediction(terms=terms, provenance=_PROVENANCE[key])


def moment_bound(e_off1_r, e_off2_r, e_x0_r, e_xm1_r, r, n, e_imm_r=0.0):
    """Upper bound on E(X_n**r) by the power-mean recursion.

    Without immigration:  B_k = 2**(r-1) * (B_{k-1} E(off1**r) + B_{k-2} E(off2**r)).
    With immigration the split gains a third summand and constant 3**(r-1).
    """
    if not r > 1:
        raise GW2Error("moment bound requires r > 1")
    for v in (e_off1_r, e_off2_r, e_x0_r, e_xm1_r, e_imm_r):
        if not np.isfinite(v) or v < 0:
            raise GW2Error("moment inputs must be finite and non-negative")
    split = 3.0 ** (r - 1.0) if e_imm_r > 0.0 else 2.0 ** (r - 1.0)
    prev2, prev1 = e_xm1_r, e_x0_r      # B_{-1}, B_0
    for _ in range(n):
        cur = split * (prev1 * e_off1_r + prev2 * e_off2_r + e_imm_r)
        prev2, prev1 = prev1, cur
    return prev1


# Random-sum predictions: S = sum of `count` iid copies of `summand`.
RANDOM_SUM_PROPOSITIONS = ("heavy-count", "heavy-summand", "both-heavy")


def random_sum_prediction(count_law, summand_law, which):
    """Tail prediction for a random sum, over bases {count, summand}.

    * ``heavy-count``: count regularly varying, summand light with a finite
      higher moment -> (E summand)**idx * P(count > x).
    * ``heavy-summand``: summand regularly varying, count light ->
      E(count) * P(summand > x).
    * ``both-heavy``: both regularly varying with the same index ->
      E(count) * P(summand > x) + (E summand)**idx * P(count > x).
    """
    if which not in RANDOM_SUM_PROPOSITIONS:
        raise GW2Error(f"unknown proposition id {which!r}")
    tc_count = count_law.tail_class()
    tc_sum = summand_law.tail_class()
    if which == "heavy-count":
        if not tc_count.regularly_varying:
            raise HypothesisError("count law must be regularly varying")
        beta = tc_count.index
        mean_sum = summand_law.mean()
        if not mean_sum > 0 or math.isinf(mean_sum):
            raise HypothesisError("summand needs a finite positive mean")
        if beta >= 1.0 and math.isinf(summand_law.moment(beta + 1.0)):
            raise HypothesisError("summand needs a finite moment above the count index")
        return TailPrediction(terms=[("count", mean_sum ** beta)],
                              provenance="heavy-count")
    if which == "heavy-summand":
        if not tc_sum.regularly_varying:
            raise HypothesisError("summand law must be regularly varying")
        alpha = tc_sum.index
        if alpha < 1.0:
            raise HypothesisError("summand index must be >= 1")
        if math.isinf(count_law.moment(alpha + 1.0)):
            raise HypothesisError("count needs a finite moment above the summand index")
        if alpha == 1.0 and math.isinf(summand_law.mean()):
            raise HypothesisError("index-1 summands need a finite positive mean")
        mean_count = count_law.mean()
        return TailPrediction(terms=[("summand", mean_count)],
                              provenance="heavy-summand")
    # both-heavy
    if not (tc_count.regularly_varying and tc_sum.regularly_varying):
        raise HypothesisError("both laws must be regularly varying")
    if abs(tc_count.index - tc_sum.index) > 1e-12:
        raise HypothesisError("count and summand must share one tail index")
    beta = tc_count.index
    if beta < 1.0:
        raise HypothesisError("shared index must be >= 1")
    mean_count = count_law.mean()
    mean_sum = summand_law.mean()
    if math.isinf(mean_count) or math.isinf(mean_sum):
        raise HypothesisError("index-1 cases need finite positive means")
    if not (mean_count > 0 and mean_sum > 0):
        raise HypothesisError("means must be positive")
    return TailPrediction(
        terms=[("summand", mean_count), ("count", mean_sum ** beta)],
        provenance="both-heavy")
