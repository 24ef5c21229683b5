"""Second-order branching process with immigration (GINAR(2)).

The population at generation n is the offspring of the two preceding
generations plus fresh immigrants:

    X_n = sum_{i<=X_{n-1}} offspring1_i + sum_{j<=X_{n-2}} offspring2_j + immigration_n

Three simulation routes are provided -- the direct recursion, the clan
decomposition (one immigration-free sub-process per ancestor and per
immigrant, summed), and an exact dynamic-programming oracle over truncated
pair states -- plus a deterministic parallel ensemble driver.
"""

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import GW2Error, OverflowAbort
from .laws import LawSpec, pack_laws

# Order matches the packed-law layout consumed by the kernels.
BASES = ("offspring1", "offspring2", "immigration", "initial0", "initialm1")


@dataclass(frozen=True)
class ScenarioSpec:
    """The five primitive laws plus ensemble controls."""

    offspring1: LawSpec
    offspring2: LawSpec
    immigration: LawSpec
    initial0: LawSpec
    initialm1: LawSpec
    horizon: int = 1
    master_seed: int = 0
    replicates: int = 1
    thresholds: tuple = ()

    def __post_init__(self):
        if self.horizon < 1:
            raise GW2Error("horizon must be >= 1")
        if self.replicates < 1:
            raise GW2Error("replicates must be >= 1")
        ts = tuple(float(t) for t in self.thresholds)
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise GW2Error("thresholds must be strictly increasing")
        if ts and ts[-1] >= _k.OVERFLOW_BOUND:
            raise GW2Error("thresholds must stay below the overflow bound 2**62")
        object.__setattr__(self, "thresholds", ts)

    def laws(self):
        return (self.offspring1, self.offspring2, self.immigration,
                self.initial0, self.initialm1)

    def base_laws(self):
        """Mapping from base name to law, for evaluating tail predictions."""
        return dict(zip(BASES, self.laws()))

    def pack(self):
        return pack_laws(self.laws())

    def to_dict(self):
        d = {name: law.to_dict() for name, law in zip(BASES, self.laws())}
        return {
            "laws": d,
            "horizon": self.horizon,
            "master_seed": self.master_seed,
            "replicates": self.replicates,
            "thresholds": list(self.thresholds),
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class PathState:
    """Pair state (X_k, X_{k-1}) at time k; the process is Markov in this pair."""

    current: int
    previous: int
    time: int = 0

    def __post_init__(self):
        if self.current < 0 or self.previous < 0:
            raise GW2Error("population counts must be non-negative")


@dataclass
class EnsembleSummary:
    """Per-threshold exceedance counts and moments for one simulated scenario.

    Moments are taken over non-overflowed replicates; overflowed replicates
    (population beyond 2**62) count as exceeding every threshold.
    """

    replicates: int
    thresholds: tuple
    counts: tuple
    mean: float
    second_moment: float
    master_seed: int
    scenario_digest: str
    n_overflow: int = 0


def step(state, scenario, stream):
    """One generation step from a recorded pair state."""
    codes, params, tables, offs = scenario.pack()
    value, stream.state = _k.step_pair(
        np.int64(state.current), np.int64(state.previous), True,
        codes, params, tables, offs, stream.state)
    if value < 0:
        raise OverflowAbort(-1)
    return PathState(int(value), state.current, state.time + 1)


def simulate_path(scenario, stream):
    """One trajectory X_0..X_n (the X_{-1} draw happens first)."""
    codes, params, tables, offs = scenario.pack()
    x0, stream.state = _k.sample_one(_k.IDX_INITIAL0, codes, params, tables, offs, stream.state)
    xm1, stream.state = _k.sample_one(_k.IDX_INITIALM1, codes, params, tables, offs, stream.state)
    if x0 < 0 or xm1 < 0:
        raise OverflowAbort(-1)
    path = [int(x0)]
    cur, prev = np.int64(x0), np.int64(xm1)
    for _ in range(scenario.horizon):
        nxt, stream.state = _k.step_pair(cur, prev, True, codes, params, tables, offs, stream.state)
        if nxt < 0:
            raise OverflowAbort(-1)
        prev, cur = cur, nxt
        path.append(int(cur))
    return path


def sample_xn(scenario, workers=None, decomposed=False):
    """X_n for every replicate as an int64 array; -1 marks overflow.

    Replicate i draws from the stream keyed by (master_seed, i), so the array
    is bit-identical for any worker count.
    """
    if workers is not None:
        _k.set_workers(workers)
    codes, params, tables, offs = scenario.pack()
    kernel = _k.ensemble_decomposed if decomposed else _k.ensemble_direct
    return kernel(scenario.replicates, scenario.horizon,
                  codes, params, tables, offs, np.uint64(scenario.master_seed))


def summarize(scenario, xn):
    """Build an EnsembleSummary from a replicate array."""
    ovf = xn < 0
    n_overflow = int(np.count_nonzero(ovf))
    counts = tuple(int(np.count_nonzero((xn > t) | ovf)) for t in scenario.thresholds)
    ok = xn[~ovf].astype(np.float64)
    mean = float(np.mean(ok)) if ok.size else math.nan
    second = float(np.mean(ok * ok)) if ok.size else math.nan
    return EnsembleSummary(
        replicates=scenario.replicates,
        thresholds=scenario.thresholds,
        counts=counts,
        mean=mean,
        second_moment=second,
        master_seed=scenario.master_seed,
        scenario_digest=scenario.digest(),
        n_overflow=n_overflow,
    )


def simulate_ensemble(scenario, workers=None):
    """N independent replicates, summarized; deterministic in (scenario, seed)."""
    return summarize(scenario, sample_xn(scenario, workers=workers))


def simulate_clan(kind, n, offspring1, offspring2, stream):
    """Value at time n of a single immigration-free clan.

    ``kind='v0'`` starts from one age-0 individual (value 1 at time 0, 0 at
    time -1); ``kind='vm1'`` from one age-1 individual (0 at time 0, 1 at
    time -1).  ``n >= -1``.
    """
    if kind not in ("v0", "vm1"):
        raise GW2Error("clan kind must be 'v0' or 'vm1'")
    start_cur, start_prev = (1, 0) if kind == "v0" else (0, 1)
    codes, params, tables, offs = pack_laws([offspring1, offspring2])
    value, stream.state = _k.clan_value(
        n, np.int64(start_cur), np.int64(start_prev),
        codes, params, tables, offs, stream.state)
    if value < 0:
        raise OverflowAbort(-1)
    return int(value)


def sample_clan(kind, n, offspring1, offspring2, n_reps, master_seed, workers=None):
    """Clan values over independent replicate streams (int64 array, -1 = overflow)."""
    if kind not in ("v0", "vm1"):
        raise GW2Error("clan kind must be 'v0' or 'vm1'")
    if workers is not None:
        _k.set_workers(workers)
    start_cur, start_prev = (1, 0) if kind == "v0" else (0, 1)
    codes, params, tables, offs = pack_laws([offspring1, offspring2])
    return _k.ensemble_clan(n_reps, n, start_cur, start_prev,
                            codes, params, tables, offs, np.uint64(master_seed))


def simulate_decomposed(scenario, stream):
    """One X_n draw via the clan decomposition; equal in law to the direct route."""
    codes, params, tables, offs = scenario.pack()
    value, stream.state = _k.replicate_decomposed(
        scenario.horizon, codes, params, tables, offs, stream.state)
    if value < 0:
        raise OverflowAbort(-1)
    return int(value)


@dataclass
class ExactDistribution:
    """Exact joint pmf of (X_n, X_{n-1}) on [0, T]^2, with truncation deficit."""

    joint: np.ndarray          # joint[a, b] = P(X_n = a, X_{n-1} = b)
    mass_deficit: float
    truncation: int
    horizon: int
    deficit_warning: bool = False

    def marginal(self):
        """pmf of X_n over 0..T."""
        return self.joint.sum(axis=1)

    def moment(self, q):
        """E(X_n**q) over the retained mass (a lower bound if deficit > 0)."""
        ks = np.arange(self.joint.shape[0], dtype=np.float64)
        return float(np.dot(ks ** q, self.marginal()))

    def survival(self, x):
        """P(X_n > x) over the retained mass."""
        j = max(int(math.floor(x)), -1)
        return float(self.marginal()[j + 1:].sum())


def _law_pmf_vector(law, size):
    pmf = np.array([law.pmf(k) for k in range(size)], dtype=np.float64)
    return pmf


def exact_distribution(scenario, truncation, deficit_tolerance=1e-9):
    """Forward dynamic program over pair states, truncated at ``truncation``.

    The conditional law of X_{k+1} given (a, b) is the a-fold convolution of
    the first offspring pmf, convolved with the b-fold convolution of the
    second, convolved with the immigration pmf.  Mass escaping [0, T] in any
    step accumulates in ``mass_deficit``; a deficit above
    ``deficit_tolerance`` sets a warning flag rather than raising.
    """
    T = int(truncation)
    if T < 1:
        raise GW2Error("truncation must be >= 1")
    size = T + 1
    xi = _law_pmf_vector(scenario.offspring1, size)
    eta = _law_pmf_vector(scenario.offspring2, size)
    eps = _law_pmf_vector(scenario.immigration, size)

    delta = np.zeros(size)
    delta[0] = 1.0

    def make_power_cache(base):
        cache = [delta]

        def power(k):
            while len(cache) <= k:
                cache.append(np.convolve(cache[-1], base)[:size])
            return cache[k]

        return power

    xi_pow = make_power_cache(xi)
    eta_pow = make_power_cache(eta)
    xi_eps_cache = {}

    def xi_eps(a):
        if a not in xi_eps_cache:
            xi_eps_cache[a] = np.convolve(xi_pow(a), eps)[:size]
        return xi_eps_cache[a]

    joint = np.zeros((size, size))
    p0 = _law_pmf_vector(scenario.initial0, size)
    pm1 = _law_pmf_vector(scenario.initialm1, size)
    joint[:, :] = np.outer(p0, pm1)
    deficit = 1.0 - float(joint.sum())

    for _ in range(scenario.horizon):
        nxt = np.zeros((size, size))
        for a, b in np.argwhere(joint > 0.0):
            mass = joint[a, b]
            cond = np.convolve(xi_eps(a), eta_pow(b))[:size]
            nxt[:, a] += mass * cond
            deficit += mass * (1.0 - float(cond.sum()))
        joint = nxt

    return ExactDistribution(
        joint=joint,
        mass_deficit=float(deficit),
        truncation=T,
        horizon=scenario.horizon,
        deficit_warning=deficit > deficit_tolerance,
    )
