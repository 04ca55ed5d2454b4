"""Forward simulation of branching processes and event probability estimates.

Trials are simulated in chunks: the population of a chunk is a dict
type -> int64 array of per-trial counts, so each generation costs a few
vectorised draws per type present.  Every chunk has its own random stream
spawned from the master seed, hence results do not depend on how chunks
are scheduled.

Infinite-horizon events are replaced by proxies at the end of a run that
neither died out nor was decided earlier (the run is then "censored"):
survival in A <=> at least one A-individual in the last generation,
extinction in B <=> no B-individual in the last generation.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from statistics import NormalDist

import numpy as np

from .process import (Bernoulli, Deterministic, ExplicitJoint, Geometric, ProcessSpec,
                      ValidationError)
from .subsets import SubsetSpec

EXTINCT, CAP, HORIZON = "extinct", "cap_exceeded", "horizon"
_TERM = (EXTINCT, CAP, HORIZON)

# a single geometric draw with larger mean is treated as a cap overflow
_HUGE_MEAN = 1e12


@dataclass(frozen=True)
class MCConfig:
    trials: int = 10_000
    horizon: int = 200
    population_cap: int = 100_000
    seed: int = 0
    ci_level: float = 0.95
    chunk: int = 1000
    n_jobs: int = 1

    def __post_init__(self):
        if self.trials < 1 or self.horizon < 1 or self.population_cap < 1 or self.chunk < 1:
            raise ValidationError("trials, horizon, population_cap and chunk must be >= 1")
        if not 0 < self.ci_level < 1:
            raise ValidationError("ci_level must lie in (0,1)")


@dataclass(frozen=True)
class TrajectorySummary:
    generations_run: int
    extinct_in_A_at: int | None
    visited_B: bool
    terminal: str
    last_A: int
    last_B: int


@dataclass(frozen=True)
class MCEstimate:
    point: float
    ci_low: float
    ci_high: float
    trials: int
    censored_fraction: float
    successes: int
    bound_low: float   # censored runs all counted as failures
    bound_high: float  # censored runs all counted as successes

    @property
    def sigma(self):
        return math.sqrt(max(self.point * (1 - self.point), 0.0) / self.trials)

    def agrees_with(self, value, nsigma=3.0):
        s = max(self.sigma, 1.0 / self.trials)
        return abs(self.point - value) <= nsigma * s

    def to_json(self):
        return asdict(self)


def wilson(k: int, n: int, level=0.95):
    if n == 0:
        return 0.0, 1.0
    z = NormalDist().inv_cdf(0.5 + level / 2)
    ph = k / n
    den = 1 + z * z / n
    mid = (ph + z * z / (2 * n)) / den
    half = z * math.sqrt(ph * (1 - ph) / n + z * z / (4 * n * n)) / den
    return max(0.0, mid - half), min(1.0, mid + half)


# ---------------------------------------------------------------------------

class _Sampler:
    """Per-type offspring sampler, cached on first use."""

    def __init__(self, spec, A, B):
        self.spec = spec
        self.A, self.B = A, B
        self._cache = {}

    def info(self, t):
        try:
            return self._cache[t]
        except KeyError:
            pass
        lw = self.spec.law(t)
        if isinstance(lw, ExplicitJoint):
            probs = np.array([p for p, _ in lw.outcomes])
            probs = probs / probs.sum()
            entry = ("joint", probs, [kids for _, kids in lw.outcomes])
        else:
            entry = ("product", lw.components)
        inA = t in self.A
        inB = self.B is not None and t in self.B
        self._cache[t] = (entry, inA, inB)
        return self._cache[t]


def _add(new, y, arr):
    cur = new.get(y)
    if cur is None:
        new[y] = arr
    else:
        cur += arr


def _offspring(sampler, t, cnt, rng, new, overflow):
    entry, _, _ = sampler.info(t)
    nz = np.flatnonzero(cnt)
    if not len(nz):
        return
    c = cnt[nz]
    n = len(cnt)
    if entry[0] == "joint":
        probs, outcomes = entry[1], entry[2]
        draws = rng.multinomial(c, probs)
        for o, kids in enumerate(outcomes):
            k = draws[:, o]
            if not kids or not k.any():
                continue
            for y, mult in kids:
                arr = np.zeros(n, np.int64)
                arr[nz] = k * mult
                _add(new, y, arr)
        return
    for comp in entry[1]:
        law = comp.law
        if isinstance(law, Deterministic):
            if law.n == 0:
                continue
            v = c * law.n
        elif isinstance(law, Bernoulli):
            v = rng.binomial(c, law.p)
        elif isinstance(law, Geometric):
            m = law.mean
            big = (m > _HUGE_MEAN) | (c * m > _HUGE_MEAN)
            v = np.zeros(len(c), np.int64)
            ok = ~big if np.ndim(big) else np.full(len(c), not big)
            if ok.any():
                v[ok] = rng.negative_binomial(c[ok], 1.0 / (1.0 + m))
            if (~ok).any():
                overflow[nz[~ok]] = True
        else:
            ks = np.array([k for k, _ in law.pmf])
            ps = np.array([p for _, p in law.pmf])
            v = rng.multinomial(c, ps / ps.sum()) @ ks
        if not np.any(v):
            continue
        arr = np.zeros(n, np.int64)
        arr[nz] = v
        _add(new, comp.child, arr)


def _simulate_chunk(spec, x, A, B, mc, n, rng):
    sampler = _Sampler(spec, A, B)
    _, inA0, inB0 = sampler.info(x)
    pop = {x: np.ones(n, np.int64)}
    alive = np.ones(n, bool)
    gens = np.zeros(n, np.int64)
    terminal = np.full(n, -1, np.int64)
    lastA = np.full(n, int(inA0), np.int64)
    lastB = np.full(n, int(inB0), np.int64)
    visitedB = np.full(n, bool(inB0))
    lastAgen = np.full(n, 0 if inA0 else -1, np.int64)
    for g in range(1, mc.horizon + 1):
        new: dict = {}
        overflow = np.zeros(n, bool)
        for t, cnt in pop.items():
            _offspring(sampler, t, cnt, rng, new, overflow)
        tot = np.zeros(n, np.int64)
        na = np.zeros(n, np.int64)
        nb = np.zeros(n, np.int64)
        for t, arr in new.items():
            _, ia, ib = sampler.info(t)
            tot += arr
            if ia:
                na += arr
            if ib:
                nb += arr
        # only rows still running are updated
        gens[alive] = g
        lastA[alive] = na[alive]
        lastB[alive] = nb[alive]
        visitedB |= alive & (nb > 0)
        lastAgen[alive & (na > 0)] = g
        ext = alive & (tot == 0)
        cap = alive & ~ext & ((tot > mc.population_cap) | overflow)
        terminal[ext] = 0
        terminal[cap] = 1
        alive &= ~(ext | cap)
        if g == mc.horizon:
            terminal[alive] = 2
        if not alive.any():
            break
        pop = {}
        for t, arr in new.items():
            arr[~alive] = 0
            if arr.any():
                pop[t] = arr
    return {"gens": gens, "terminal": terminal, "lastA": lastA, "lastB": lastB,
            "visitedB": visitedB, "lastAgen": lastAgen}


def _run(spec, x, A, B, mc):
    if x not in spec.typeset:
        raise ValidationError(f"unknown initial type {x!r}")
    nchunks = -(-mc.trials // mc.chunk)
    seqs = np.random.SeedSequence(mc.seed).spawn(nchunks)
    sizes = [min(mc.chunk, mc.trials - k * mc.chunk) for k in range(nchunks)]

    def job(k):
        return _simulate_chunk(spec, x, A, B, mc, sizes[k], np.random.Generator(np.random.PCG64(seqs[k])))

    if mc.n_jobs > 1:
        with ThreadPoolExecutor(mc.n_jobs) as ex:
            parts = list(ex.map(job, range(nchunks)))
    else:
        parts = [job(k) for k in range(nchunks)]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


def _summaries(res):
    out = []
    for k in range(len(res["gens"])):
        term = _TERM[res["terminal"][k]]
        la = int(res["lastA"][k])
        ext_at = None if la > 0 else int(res["lastAgen"][k]) + 1
        out.append(TrajectorySummary(int(res["gens"][k]), ext_at, bool(res["visitedB"][k]),
                                     term, la, int(res["lastB"][k])))
    return out


def simulate_trajectory(spec: ProcessSpec, initial, A: SubsetSpec, B: SubsetSpec | None,
                        mc: MCConfig, rng_stream) -> TrajectorySummary:
    """One run from a single individual of type `initial`."""
    if initial not in spec.typeset:
        raise ValidationError(f"unknown initial type {initial!r}")
    rng = rng_stream if isinstance(rng_stream, np.random.Generator) else np.random.default_rng(rng_stream)
    return _summaries(_simulate_chunk(spec, initial, A, B, mc, 1, rng))[0]


def simulate_summaries(spec, x, A, B, mc) -> list:
    return _summaries(_run(spec, x, A, B, mc))


def _estimate(success_def, censored, proxy_success, mc):
    n = len(success_def)
    s_def = int(success_def.sum())
    cen = int(censored.sum())
    k = s_def + int((censored & proxy_success).sum())
    lo, hi = wilson(k, n, mc.ci_level)
    blo, _ = wilson(s_def, n, mc.ci_level)
    _, bhi = wilson(s_def + cen, n, mc.ci_level)
    point = k / n
    return MCEstimate(point, min(lo, point), max(hi, point), n, cen / n, k, blo, bhi)


def estimate_extinction(spec, x, A: SubsetSpec, mc: MCConfig | None = None) -> MCEstimate:
    """P_x(extinction in A).  Runs that die out are successes; censored runs
    count as successes iff their last generation has no A-individual."""
    mc = mc or MCConfig()
    res = _run(spec, x, A, None, mc)
    ext = res["terminal"] == 0
    return _estimate(ext, ~ext, res["lastA"] == 0, mc)


EVENTS = ("survive_A_never_visit_B", "survive_A_extinct_B", "never_visit_B")


def estimate_event(spec, x, event: str, A: SubsetSpec, B: SubsetSpec, mc: MCConfig | None = None) -> MCEstimate:
    mc = mc or MCConfig()
    if event not in EVENTS:
        raise ValidationError(f"unknown event {event!r}; choose from {EVENTS}")
    if event == "survive_A_extinct_B" and (A is B or (A.elements is not None and A.elements == B.elements)):
        # survival and extinction in the same set are disjoint events
        lo, hi = wilson(0, mc.trials, mc.ci_level)
        return MCEstimate(0.0, 0.0, hi, mc.trials, 0.0, 0, 0.0, hi)
    res = _run(spec, x, A, B, mc)
    ext = res["terminal"] == 0
    vb = res["visitedB"]
    if event == "never_visit_B":
        success_def = ext & ~vb
        censored = ~ext & ~vb
        proxy = np.ones_like(ext)
    elif event == "survive_A_never_visit_B":
        success_def = np.zeros_like(ext)
        censored = ~ext & ~vb
        proxy = res["lastA"] > 0
    else:
        success_def = np.zeros_like(ext)
        censored = ~ext
        proxy = (res["lastA"] > 0) & (res["lastB"] == 0)
    return _estimate(success_def, censored, proxy, mc)
