"""Hot sampling and simulation kernels.

Every kernel is compiled with numba when available.  Setting the environment
variable ``GW2_DISABLE_NUMBA=1`` (or ``true``/``yes``) selects a pure-Python
fallback that runs the very same code paths, so results are bit-identical
between the two modes -- only speed differs.  ``benchmarks/bench_kernels.py``
measures the gap.

Randomness is counter-based: a replicate's stream is a splitmix64 sequence
whose initial state is a hash of ``(master_seed, stream_id)``.  Draws made by
replicate ``i`` therefore never depend on scheduling or worker count.
"""

import math
import os
import warnings

import numpy as np

USING_NUMBA = os.environ.get("GW2_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")
if USING_NUMBA:
    try:
        import numba
        from numba import njit, prange
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USING_NUMBA = False

if not USING_NUMBA:
    # The fallback runs the kernels as plain Python.  uint64 wraparound is
    # intentional in the mixing functions; numpy flags it with a
    # RuntimeWarning that carries no information here.
    warnings.filterwarnings("ignore", message="overflow encountered", category=RuntimeWarning)

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorate(func):
            return func

        return decorate

    prange = range


def set_workers(n):
    """Set the number of simulation threads (no-op in fallback mode).

    Results never depend on this value; it is performance-only.  Requests
    above the machine's thread budget are clamped rather than rejected.
    """
    if USING_NUMBA:
        limit = numba.config.NUMBA_NUM_THREADS
        numba.set_num_threads(min(max(int(n), 1), limit))


# Law codes shared with laws.LawSpec.kernel_pack().  Zeta and TableLaw both
# pack to TABLE: a cumulative table plus an optional power-law tail.
DETERMINISTIC = 0
BERNOULLI = 1
POISSON = 2
GEOMETRIC = 3
DISCRETE_PARETO = 4
TABLE = 5

# Population counts above this bound are treated as overflowed; kernels
# return -1 for the replicate.  2**62 leaves headroom below int64 max.
OVERFLOW_BOUND = 1 << 62

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_STREAM_SALT = np.uint64(0xC2B2AE3D27D4EB4F)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def stream_seed(master_seed, stream_id):
    """Initial splitmix64 state for stream ``stream_id`` under ``master_seed``."""
    h = _mix64(master_seed + _GOLDEN)
    return _mix64(h ^ (stream_id * _STREAM_SALT))


@njit(cache=True)
def next_u64(state):
    state = state + _GOLDEN
    return _mix64(state), state


@njit(cache=True)
def next_uniform(state):
    """Uniform double strictly inside (0, 1)."""
    u, state = next_u64(state)
    return (np.float64(u >> np.uint64(11)) + 0.5) * _INV_2_53, state


@njit(cache=True)
def _poisson_knuth(lam, state):
    # product-of-uniforms inversion, adequate for small means
    limit = math.exp(-lam)
    k = np.int64(0)
    prod = 1.0
    while True:
        u, state = next_uniform(state)
        prod *= u
        if prod <= limit:
            return k, state
        k += 1


@njit(cache=True)
def _poisson_ptrs(lam, state):
    # Hormann's transformed rejection with squeeze, valid for lam >= 10
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u, state = next_uniform(state)
        u -= 0.5
        v, state = next_uniform(state)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return np.int64(k), state
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= k * loglam - lam - math.lgamma(k + 1.0)):
            return np.int64(k), state


@njit(cache=True)
def _poisson(lam, state):
    if lam <= 0.0:
        return np.int64(0), state
    if lam < 10.0:
        return _poisson_knuth(lam, state)
    return _poisson_ptrs(lam, state)


@njit(cache=True)
def sample_one(idx, codes, params, tables, offs, state):
    """One draw from law ``idx`` of a packed law set.

    Returns ``(value, state)``; a value of -1 signals overflow (astronomically
    large draw from a very heavy tail).
    """
    code = codes[idx]
    p = params[idx, 0]
    if code == DETERMINISTIC:
        return np.int64(p), state
    if code == BERNOULLI:
        u, state = next_uniform(state)
        if u < p:
            return np.int64(1), state
        return np.int64(0), state
    if code == POISSON:
        return _poisson(p, state)
    if code == GEOMETRIC:
        if p >= 1.0:
            return np.int64(0), state
        u, state = next_uniform(state)
        return np.int64(math.floor(math.log(u) / math.log1p(-p))), state
    if code == DISCRETE_PARETO:
        u, state = next_uniform(state)
        v = u ** (-1.0 / p)
        if v >= 4.0e18:
            return np.int64(-1), state
        return np.int64(math.floor(v)), state
    # TABLE: cumulative table over 0..L-1 plus optional power-law tail on
    # k >= L with P(Z >= k | tail) = (k / L)**(-tail_alpha)
    u, state = next_uniform(state)
    cum = tables[offs[idx]:offs[idx + 1]]
    body = cum[len(cum) - 1]
    tail_mass = params[idx, 3]
    if u <= body or tail_mass <= 0.0:
        k = np.searchsorted(cum, u)
        if k >= len(cum):
            k = len(cum) - 1
        return np.int64(k), state
    v = (u - body) / tail_mass
    if v <= 0.0:
        v = 1e-300
    if v >= 1.0:
        v = 1.0 - 1e-16
    val = math.floor(params[idx, 1] * v ** (-1.0 / params[idx, 2]))
    if val >= 4.0e18:
        return np.int64(-1), state
    return np.int64(val), state


@njit(cache=True)
def sum_iid(count, idx, codes, params, tables, offs, state):
    """Sum of ``count`` independent draws from law ``idx``.

    Draw-by-draw, with exactly two shortcuts that are exact in law:
    Deterministic(c) multiplies, and a sum of ``count`` Poisson(lam) draws is
    one Poisson(count * lam) draw.  Returns -1 on overflow.
    """
    if count <= 0:
        return np.int64(0), state
    code = codes[idx]
    if code == DETERMINISTIC:
        c = np.int64(params[idx, 0])
        total = count * c
        if c > 0 and count > OVERFLOW_BOUND // c:
            return np.int64(-1), state
        return total, state
    if code == POISSON:
        lam = params[idx, 0] * count
        if lam > 1.0e15:
            return np.int64(-1), state
        return _poisson(lam, state)
    total = np.int64(0)
    for _ in range(count):
        v, state = sample_one(idx, codes, params, tables, offs, state)
        if v < 0:
            return np.int64(-1), state
        total += v
        if total > OVERFLOW_BOUND:
            return np.int64(-1), state
    return total, state


# Packed-law layout used by the scenario kernels below.
IDX_OFFSPRING1 = 0
IDX_OFFSPRING2 = 1
IDX_IMMIGRATION = 2
IDX_INITIAL0 = 3
IDX_INITIALM1 = 4


@njit(cache=True)
def step_pair(cur, prev, with_immigration, codes, params, tables, offs, state):
    """One generation step: new value from ``cur`` age-1 and ``prev`` age-2 parents."""
    s1, state = sum_iid(cur, IDX_OFFSPRING1, codes, params, tables, offs, state)
    if s1 < 0:
        return np.int64(-1), state
    s2, state = sum_iid(prev, IDX_OFFSPRING2, codes, params, tables, offs, state)
    if s2 < 0:
        return np.int64(-1), state
    e = np.int64(0)
    if with_immigration:
        e, state = sample_one(IDX_IMMIGRATION, codes, params, tables, offs, state)
        if e < 0:
            return np.int64(-1), state
    total = s1 + s2 + e
    if total > OVERFLOW_BOUND:
        return np.int64(-1), state
    return total, state


@njit(cache=True)
def replicate_direct(n, codes, params, tables, offs, state):
    """X_n of one replicate via the direct recursion."""
    cur, state = sample_one(IDX_INITIAL0, codes, params, tables, offs, state)
    prev, state = sample_one(IDX_INITIALM1, codes, params, tables, offs, state)
    if cur < 0 or prev < 0:
        return np.int64(-1), state
    for _ in range(n):
        nxt, state = step_pair(cur, prev, True, codes, params, tables, offs, state)
        if nxt < 0:
            return np.int64(-1), state
        prev = cur
        cur = nxt
    return cur, state


@njit(cache=True)
def clan_value(n, start_cur, start_prev, codes, params, tables, offs, state):
    """Value at time n of an immigration-free sub-process from (start_cur, start_prev).

    ``n = 0`` returns ``start_cur`` and ``n = -1`` returns ``start_prev``.
    Only the two offspring slots of the packed law set are consulted.
    """
    if n < 0:
        return np.int64(start_prev), state
    cur = np.int64(start_cur)
    prev = np.int64(start_prev)
    for _ in range(n):
        nxt, state = step_pair(cur, prev, False, codes, params, tables, offs, state)
        if nxt < 0:
            return np.int64(-1), state
        prev = cur
        cur = nxt
    return cur, state


@njit(cache=True)
def replicate_decomposed(n, codes, params, tables, offs, state):
    """X_n of one replicate via the clan decomposition.

    One independent immigration-free sub-process per initial individual
    (started at (1,0) for age-0 ancestors, (0,1) for age-1 ancestors) and per
    immigrant; the replicate value is the sum of the clan values.
    """
    x0, state = sample_one(IDX_INITIAL0, codes, params, tables, offs, state)
    xm1, state = sample_one(IDX_INITIALM1, codes, params, tables, offs, state)
    if x0 < 0 or xm1 < 0:
        return np.int64(-1), state
    total = np.int64(0)
    for _ in range(x0):
        v, state = clan_value(n, 1, 0, codes, params, tables, offs, state)
        if v < 0:
            return np.int64(-1), state
        total += v
        if total > OVERFLOW_BOUND:
            return np.int64(-1), state
    for _ in range(xm1):
        v, state = clan_value(n, 0, 1, codes, params, tables, offs, state)
        if v < 0:
            return np.int64(-1), state
        total += v
        if total > OVERFLOW_BOUND:
            return np.int64(-1), state
    for i in range(1, n + 1):
        e, state = sample_one(IDX_IMMIGRATION, codes, params, tables, offs, state)
        if e < 0:
            return np.int64(-1), state
        for _ in range(e):
            v, state = clan_value(n - i, 1, 0, codes, params, tables, offs, state)
            if v < 0:
                return np.int64(-1), state
            total += v
            if total > OVERFLOW_BOUND:
                return np.int64(-1), state
    return total, state


@njit(cache=True, parallel=True)
def ensemble_direct(n_reps, horizon, codes, params, tables, offs, master_seed):
    out = np.empty(n_reps, np.int64)
    for i in prange(n_reps):
        state = stream_seed(master_seed, np.uint64(i))
        v, state = replicate_direct(horizon, codes, params, tables, offs, state)
        out[i] = v
    return out


@njit(cache=True, parallel=True)
def ensemble_decomposed(n_reps, horizon, codes, params, tables, offs, master_seed):
    out = np.empty(n_reps, np.int64)
    for i in prange(n_reps):
        state = stream_seed(master_seed, np.uint64(i))
        v, state = replicate_decomposed(horizon, codes, params, tables, offs, state)
        out[i] = v
    return out


@njit(cache=True, parallel=True)
def ensemble_clan(n_reps, horizon, start_cur, start_prev, codes, params, tables, offs, master_seed):
    out = np.empty(n_reps, np.int64)
    for i in prange(n_reps):
        state = stream_seed(master_seed, np.uint64(i))
        v, state = clan_value(horizon, start_cur, start_prev, codes, params, tables, offs, state)
        out[i] = v
    return out


# Random-sum layout: slot 0 is the count law, slot 1 the summand law.
IDX_COUNT = 0
IDX_SUMMAND = 1


@njit(cache=True, parallel=True)
def ensemble_random_sum(n_reps, codes, params, tables, offs, master_seed):
    """S = sum of tau iid summands, one value per replicate (-1 on overflow)."""
    out = np.empty(n_reps, np.int64)
    for i in prange(n_reps):
        state = stream_seed(master_seed, np.uint64(i))
        tau, state = sample_one(IDX_COUNT, codes, params, tables, offs, state)
        if tau < 0:
            out[i] = -1
            continue
        s, state = sum_iid(tau, IDX_SUMMAND, codes, params, tables, offs, state)
        out[i] = s
    return out
