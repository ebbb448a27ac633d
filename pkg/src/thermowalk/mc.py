"""Stochastic engines: the gridless heterogeneous walk and the 1D lattice walk.

Each particle owns a Philox stream keyed by ``(seed, particle index, step
index)``; the kernels loop over particles with ``numba.prange`` and never
share mutable state, so results are bit-identical for any thread count.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numba as nb
import numpy as np

from . import rng
from .errors import ConfigError, NumericalError
from .fields import DomainSpec, FieldGrid, WalkProfile

log = logging.getLogger(__name__)

RULES = {"departure": 0, "midpoint": 1}
DEFAULT_STEP_CAP = 10**9


@dataclass(frozen=True)
class ParticleEnsemble:
    domain: DomainSpec
    positions: np.ndarray       # (count, dim), wrapped into the domain
    clocks: np.ndarray          # elapsed time per particle
    steps: np.ndarray           # steps taken per particle (drives the RNG counter)
    master_seed: int
    displacement: np.ndarray | None = None   # unwrapped, only when tracked

    def __post_init__(self):
        n = self.positions.shape[0]
        if self.clocks.shape != (n,) or self.steps.shape != (n,):
            raise ConfigError("positions, clocks and steps disagree in length")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim


LANES = 256


@nb.njit(inline="always", cache=True, error_model="numpy")
def _wrap(v, L, inv_L):
    v = v - L * np.floor(v * inv_L)
    v = v + L if v < 0.0 else v
    return v - L if v >= L else v


@nb.njit(inline="always", cache=True, error_model="numpy")
def _bilinear(g, x, y, hx, hy):
    nx, ny = g.shape
    sx = x / hx - 0.5
    sy = y / hy - 0.5
    fx = np.floor(sx)
    fy = np.floor(sy)
    wx = sx - fx
    wy = sy - fy
    i0 = int(fx) % nx
    j0 = int(fy) % ny
    i1 = (i0 + 1) % nx
    j1 = (j0 + 1) % ny
    return ((1 - wx) * (1 - wy) * g[i0, j0] + wx * (1 - wy) * g[i1, j0]
            + (1 - wx) * wy * g[i0, j1] + wx * wy * g[i1, j1])


# Profile evaluators share one signature so each gets its own lane loop.

@nb.njit(inline="always", cache=True, error_model="numpy")
def _eval_constant(params, gdx, gdt, ext, x, y, dim):
    return params[0], params[1]


@nb.njit(inline="always", cache=True, error_model="numpy")
def _eval_fig2(params, gdx, gdt, ext, x, y, dim):
    cx = x - np.floor(x) - params[2]
    a = params[1] + cx * cx
    if dim == 2:
        cy = y - np.floor(y) - params[2]
        a += cy * cy
    ell = params[0] * a
    return ell, ell * a


@nb.njit(inline="always", cache=True, error_model="numpy")
def _eval_sqrt_temperature(params, gdx, gdt, ext, x, y, dim):
    s = np.sqrt(params[1] + params[2] * (x - np.floor(x)))
    ell = 2.0 * dim * params[0] / s
    return ell, ell / s


@nb.njit(inline="always", cache=True, error_model="numpy")
def _eval_sampled(params, gdx, gdt, ext, x, y, dim):
    xw = _wrap(x, ext[0], 1.0 / ext[0])
    hx = ext[0] / gdx.shape[0]
    if dim == 2:
        yw = _wrap(y, ext[1], 1.0 / ext[1])
        hy = ext[1] / gdx.shape[1]
    else:
        yw = 0.5
        hy = 1.0
    return _bilinear(gdx, xw, yw, hx, hy), _bilinear(gdt, xw, yw, hx, hy)


@nb.njit(inline="always", cache=True, error_model="numpy")
def _philox_pass(m, K, IDX, W0, W1, W2, W3, k0, k1):
    for l in range(m):
        plo, phi = rng.split_index(IDX[l])
        w0, w1, w2, w3 = rng.philox4x32(np.uint32(K[l] >> 2), np.uint32(rng.TAG_STEP),
                                        plo, phi, k0, k1)
        W0[l] = w0
        W1[l] = w1
        W2[l] = w2
        W3[l] = w3


@nb.njit(inline="always", cache=True, error_model="numpy")
def _angle_pass(m, Ws, EX, EY):
    for l in range(m):
        EX[l], EY[l] = rng.angle_direction(Ws[l])


@nb.njit(inline="always", cache=True, error_model="numpy")
def _sign_pass(m, Ws, EX):
    for l in range(m):
        EX[l] = rng.word_sign(Ws[l])


@nb.njit(inline="always", cache=True, error_model="numpy")
def _eval_lanes(evalfn, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt, ext, dim):
    if rule == 1:
        for l in range(m):
            e0, _ = evalfn(params, gdx, gdt, ext, X[l], Y[l], dim)
            ELL[l], TAU[l] = evalfn(params, gdx, gdt, ext, X[l] + 0.5 * e0 * EX[l],
                                    Y[l] + 0.5 * e0 * EY[l], dim)
    else:
        for l in range(m):
            ELL[l], TAU[l] = evalfn(params, gdx, gdt, ext, X[l], Y[l], dim)


@nb.njit(inline="always", cache=True, error_model="numpy")
def _eval_pass(kind, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt, ext, dim):
    # one specialised loop per profile kind keeps the branch out of the lanes
    if kind == 0:
        _eval_lanes(_eval_constant, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt, ext, dim)
    elif kind == 1:
        _eval_lanes(_eval_fig2, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt, ext, dim)
    elif kind == 2:
        _eval_lanes(_eval_sqrt_temperature, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt,
                    ext, dim)
    else:
        _eval_lanes(_eval_sampled, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt, ext, dim)


@nb.njit(inline="always", cache=True, error_model="numpy")
def _active_pass(m, C, K, ACT, t_final, cap):
    live = 0
    for l in range(m):
        a = C[l] < t_final and K[l] < cap
        ACT[l] = a
        live += a
    return live


@nb.njit(inline="always", cache=True, error_model="numpy")
def _move_pass(m, ACT, X, Y, EX, EY, ELL, TAU, C, CP, K, Lx, Ly):
    iLx = 1.0 / Lx
    iLy = 1.0 / Ly
    for l in range(m):
        a = ACT[l]
        ell = ELL[l] if a else 0.0
        ELL[l] = ell
        X[l] = _wrap(X[l] + ell * EX[l], Lx, iLx)
        Y[l] = _wrap(Y[l] + ell * EY[l], Ly, iLy)
        # compensated clock so that k * dt lands exactly on t_final
        yk = TAU[l] - CP[l]
        tk = C[l] + yk
        CP[l] = ((tk - C[l]) - yk) if a else CP[l]
        C[l] = tk if a else C[l]
        K[l] = K[l] + 1 if a else K[l]


@nb.njit(cache=True, error_model="numpy")
def _run_block(kind, lo, hi, pos, clocks, steps, disp, track, k0, k1, t_final,
               params, gdx, gdt, ext, rule, cap):
    """Advance particles ``lo:hi`` in lockstep; returns True if any hit the cap.

    Lanes are stepped in structure-of-arrays passes so every hot loop
    vectorises; finished lanes are written back and compacted away.
    """
    dim = pos.shape[1]
    B = hi - lo
    Lx = ext[0]
    Ly = ext[1] if dim == 2 else 1.0
    IDX = np.arange(lo, hi)
    X = pos[lo:hi, 0].copy()
    Y = pos[lo:hi, 1].copy() if dim == 2 else np.zeros(B)
    C = clocks[lo:hi].copy()
    CP = np.zeros(B)
    K = steps[lo:hi].copy()
    UX = np.zeros(B)
    UY = np.zeros(B)
    W0 = np.empty(B, dtype=np.uint32)
    W1 = np.empty(B, dtype=np.uint32)
    W2 = np.empty(B, dtype=np.uint32)
    W3 = np.empty(B, dtype=np.uint32)
    EX = np.empty(B)
    EY = np.zeros(B)
    ELL = np.empty(B)
    TAU = np.empty(B)
    ACT = np.empty(B, dtype=np.bool_)
    overflow = False
    m = B
    live = B
    while m > 0:
        # one Philox block covers steps K..K+3 of every lane aligned on 4
        _philox_pass(m, K, IDX, W0, W1, W2, W3, k0, k1)
        for l in range(m):
            if K[l] & 3 != 0:
                plo, phi = rng.split_index(IDX[l])
                W0[l] = rng.step_word(K[l], plo, phi, k0, k1)
                W1[l] = rng.step_word(K[l] + 1, plo, phi, k0, k1)
                W2[l] = rng.step_word(K[l] + 2, plo, phi, k0, k1)
                W3[l] = rng.step_word(K[l] + 3, plo, phi, k0, k1)
        for s in range(4):
            live = _active_pass(m, C, K, ACT, t_final, cap)
            if live == 0:
                break
            Ws = W0 if s == 0 else (W1 if s == 1 else (W2 if s == 2 else W3))
            if dim == 2:
                _angle_pass(m, Ws, EX, EY)
            else:
                _sign_pass(m, Ws, EX)
            _eval_pass(kind, m, rule, X, Y, EX, EY, ELL, TAU, params, gdx, gdt, ext, dim)
            _move_pass(m, ACT, X, Y, EX, EY, ELL, TAU, C, CP, K, Lx, Ly)
            if track:
                for l in range(m):
                    UX[l] += ELL[l] * EX[l]
                    UY[l] += ELL[l] * EY[l]
        if live > m - m // 8:
            continue
        j = 0
        for l in range(m):
            if C[l] < t_final and K[l] < cap:
                if j != l:
                    IDX[j] = IDX[l]
                    X[j] = X[l]
                    Y[j] = Y[l]
                    C[j] = C[l]
                    CP[j] = CP[l]
                    K[j] = K[l]
                    UX[j] = UX[l]
                    UY[j] = UY[l]
                j += 1
            else:
                p = IDX[l]
                if C[l] < t_final:
                    overflow = True
                pos[p, 0] = X[l]
                if dim == 2:
                    pos[p, 1] = Y[l]
                clocks[p] = C[l]
                steps[p] = K[l]
                if track:
                    disp[p, 0] += UX[l]
                    if dim == 2:
                        disp[p, 1] += UY[l]
        m = j
    return overflow


@nb.njit(parallel=True, cache=True, error_model="numpy")
def _simulate_kernel(pos, clocks, steps, disp, track, seed, t_final, kind, params,
                     gdx, gdt, ext, rule, cap):
    n = pos.shape[0]
    k0, k1 = rng.split_seed(seed)
    nblk = (n + LANES - 1) // LANES
    over = np.zeros(nblk, dtype=np.bool_)
    for b in nb.prange(nblk):
        lo = b * LANES
        hi = min(n, lo + LANES)
        over[b] = _run_block(kind, lo, hi, pos, clocks, steps, disp, track, k0, k1, t_final,
                             params, gdx, gdt, ext, rule, cap)
    return over.any()


@nb.njit(parallel=True, cache=True)
def _init_kernel(n, dim, seed, ext):
    pos = np.empty((n, dim))
    k0, k1 = rng.split_seed(seed)
    for p in nb.prange(n):
        plo, phi = rng.split_index(p)
        w0, w1, _, _ = rng.philox4x32(np.uint32(0), np.uint32(rng.TAG_INIT), plo, phi, k0, k1)
        pos[p, 0] = rng.unit(w0) * ext[0]
        if dim == 2:
            pos[p, 1] = rng.unit(w1) * ext[1]
    return pos


def set_workers(workers: int | None) -> int:
    """Set the numba thread count (clamped to ``NUMBA_NUM_THREADS``)."""
    if workers is None:
        return nb.get_num_threads()
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    limit = nb.config.NUMBA_NUM_THREADS
    if workers > limit:
        log.warning("requested %d workers, numba allows %d; set NUMBA_NUM_THREADS to raise it",
                    workers, limit)
        workers = limit
    nb.set_num_threads(workers)
    return workers


def init_ensemble(domain: DomainSpec, count: int, seed: int = 42,
                  track_displacement: bool = False) -> ParticleEnsemble:
    """Uniform i.i.d. positions from each particle's own stream; clocks at zero."""
    if count < 1:
        raise ConfigError("particle count must be at least 1")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    ext = np.asarray(domain.extent, dtype=float)
    pos = _init_kernel(int(count), domain.dim, np.uint64(seed), ext)
    disp = np.zeros_like(pos) if track_displacement else None
    return ParticleEnsemble(domain, pos, np.zeros(count), np.zeros(count, dtype=np.int64),
                            seed, disp)


def step_particle(x, profile: WalkProfile, direction, extent=None, rule: str = "departure"):
    """One gridless step from ``x``.

    ``direction`` is an angle in radians (2D) or +-1 (1D).  Returns the new
    wrapped position and the time the step took.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dim = x.shape[0]
    extent = np.ones(dim) if extent is None else np.atleast_1d(np.asarray(extent, dtype=float))
    if dim == 2:
        e = np.array([np.cos(direction), np.sin(direction)])
    else:
        e = np.array([1.0 if direction > 0 else -1.0])
    ell, tau = (float(v) for v in profile.evaluate(x))
    if rule == "midpoint":
        ell, tau = (float(v) for v in profile.evaluate(x + 0.5 * ell * e))
    elif rule != "departure":
        raise ConfigError(f"unknown step rule {rule!r}")
    xn = x + ell * e
    xn = xn - extent * np.floor(xn / extent)
    xn = np.where(xn >= extent, xn - extent, xn)
    return xn, tau


def simulate(ensemble: ParticleEnsemble, profile: WalkProfile, t_final: float,
             rule: str = "midpoint", step_cap: int = DEFAULT_STEP_CAP,
             workers: int | None = None) -> ParticleEnsemble:
    """Walk every particle until its clock reaches ``t_final``.

    The step that crosses ``t_final`` is completed, so final clocks are
    ``>= t_final``.  ``rule`` picks where walk length and traveling time are
    evaluated: at the departure point, or at the midpoint of the step
    (one predictor step).  Only the midpoint rule relaxes to the ``1/S``
    steady state; the departure rule relaxes to ``1/D``.
    """
    if not t_final > 0:
        raise ConfigError("t_final must be positive")
    if rule not in RULES:
        raise ConfigError(f"unknown step rule {rule!r}; choose from {sorted(RULES)}")
    step_cap = int(step_cap)
    if not 0 < step_cap < 2**34:
        raise ConfigError("step cap must lie in (0, 2**34)")
    domain = ensemble.domain
    profile.validate(domain)
    projected = ensemble.steps.max() + (t_final - ensemble.clocks.min()) / profile.min_dt(domain)
    if projected > step_cap:
        raise NumericalError(
            f"runaway profile: up to {projected:.3g} steps per particle exceed the cap {step_cap}")
    set_workers(workers)
    pos = np.array(ensemble.positions, dtype=float, order="C")
    clocks = np.array(ensemble.clocks, dtype=float)
    steps = np.array(ensemble.steps, dtype=np.int64)
    track = ensemble.displacement is not None
    disp = np.array(ensemble.displacement) if track else np.zeros((1, domain.dim))
    gdx, gdt = profile.grid_arrays()
    overflow = _simulate_kernel(pos, clocks, steps, disp, track, np.uint64(ensemble.master_seed),
                                float(t_final), profile.kind_id,
                                np.asarray(profile.params + (0.0,) * 3, dtype=float),
                                gdx, gdt, np.asarray(domain.extent, dtype=float),
                                RULES[rule], step_cap)
    if overflow:
        raise NumericalError(f"runaway profile: a particle hit the step cap {step_cap}")
    return replace(ensemble, positions=pos, clocks=clocks, steps=steps,
                   displacement=disp if track else None)


def bin_counts(ensemble: ParticleEnsemble, bins) -> np.ndarray:
    """Integer particle counts per bin, shape ``bins``."""
    if ensemble.count == 0:
        raise ConfigError("empty ensemble")
    domain = ensemble.domain
    bins = tuple(int(b) for b in np.broadcast_to(np.atleast_1d(bins), (domain.dim,)))
    if min(bins) < 1:
        raise ConfigError("need at least one bin per axis")
    flat = np.zeros(ensemble.count, dtype=np.int64)
    for a in range(domain.dim):
        idx = np.floor(ensemble.positions[:, a] / domain.extent[a] * bins[a]).astype(np.int64)
        np.clip(idx, 0, bins[a] - 1, out=idx)
        flat = flat * bins[a] + idx
    return np.bincount(flat, minlength=int(np.prod(bins))).reshape(bins)


def histogram(ensemble: ParticleEnsemble, bins) -> FieldGrid:
    """Particle density per bin, normalised to mean 1."""
    counts = bin_counts(ensemble, bins)
    domain = DomainSpec(dim=ensemble.domain.dim, cells=counts.shape, extent=ensemble.domain.extent) \
        if min(counts.shape) >= 4 else _small_domain(ensemble.domain, counts.shape)
    return FieldGrid(domain, counts / counts.mean())


def _small_domain(domain, shape):
    # DomainSpec insists on >= 4 cells; coarse diagnostic binnings bypass that check
    d = object.__new__(DomainSpec)
    object.__setattr__(d, "dim", domain.dim)
    object.__setattr__(d, "cells", tuple(shape))
    object.__setattr__(d, "extent", domain.extent)
    return d


def variance(before: ParticleEnsemble, after: ParticleEnsemble, t: float) -> float:
    """Empirical diffusivity ``<|x(t) - x(0)|^2> / (2 n t)`` from unwrapped displacements."""
    if t == 0:
        raise ConfigError("elapsed time must be non-zero")
    if before.displacement is None or after.displacement is None:
        raise ConfigError("displacement tracking was not enabled for these ensembles")
    d = after.displacement - before.displacement
    return float(np.mean(np.sum(d * d, axis=1)) / (2 * after.dim * t))


# -- 1D lattice walk ---------------------------------------------------------

@dataclass(frozen=True)
class LatticeState:
    """Particles hopping between neighbouring sites of a periodic 1D lattice.

    A particle at site ``i`` waits ``site_dt[i]`` and then jumps to ``i - 1``
    or ``i + 1`` with probability 1/2 each.
    """

    grid_points: np.ndarray
    site_dt: np.ndarray
    sites: np.ndarray           # current site per particle
    clocks: np.ndarray          # arrival time at the current site
    jumps: np.ndarray           # jumps taken per particle (RNG counter)
    seed: int

    def __post_init__(self):
        if np.any(np.diff(self.grid_points) <= 0):
            raise ConfigError("lattice sites must be strictly increasing")
        if self.site_dt.shape != self.grid_points.shape or np.any(self.site_dt <= 0):
            raise ConfigError("need one positive traveling time per site")

    @property
    def occupancy(self) -> np.ndarray:
        return np.bincount(self.sites, minlength=self.grid_points.size)

    @property
    def count(self) -> int:
        return self.sites.size


def init_lattice(grid_points, site_dt, count: int, seed: int = 42) -> LatticeState:
    """Place ``count`` particles on uniformly random sites."""
    if count < 1:
        raise ConfigError("particle count must be at least 1")
    grid_points = np.asarray(grid_points, dtype=float)
    n = grid_points.size
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    u = _init_kernel(int(count), 1, np.uint64(seed), np.ones(1))[:, 0]
    sites = np.minimum((u * n).astype(np.int64), n - 1)
    return LatticeState(grid_points, np.asarray(site_dt, dtype=float), sites,
                        np.zeros(count), np.zeros(count, dtype=np.int64), seed)


def lattice_step(state: LatticeState, draws=None) -> LatticeState:
    """Move every particle one site; ``draws[p]`` True sends particle p right.

    Without ``draws`` the coin comes from the particle's own stream.  Each
    particle's clock advances by the traveling time of its departure site.
    """
    n = state.grid_points.size
    if draws is None:
        draws = _lattice_coins(state.jumps, np.uint64(state.seed))
    draws = np.asarray(draws, dtype=bool)
    if draws.shape != state.sites.shape:
        raise ConfigError("need one draw per particle")
    clocks = state.clocks + state.site_dt[state.sites]
    sites = (state.sites + np.where(draws, 1, -1)) % n
    return replace(state, sites=sites, clocks=clocks, jumps=state.jumps + 1)


@nb.njit(parallel=True, cache=True)
def _lattice_coins(jumps, seed):
    k0, k1 = rng.split_seed(seed)
    out = np.empty(jumps.size, dtype=np.bool_)
    for p in nb.prange(jumps.size):
        plo, phi = rng.split_index(p)
        out[p] = rng.word_sign(rng.step_word(jumps[p], plo, phi, k0, k1)) > 0
    return out


@nb.njit(parallel=True, cache=True)
def _lattice_kernel(sites, clocks, jumps, site_dt, seed, t_obs):
    n_sites = site_dt.size
    k0, k1 = rng.split_seed(seed)
    for p in nb.prange(sites.size):
        plo, phi = rng.split_index(p)
        s = sites[p]
        c = clocks[p]
        k = jumps[p]
        while c + site_dt[s] <= t_obs:
            c += site_dt[s]
            if rng.word_sign(rng.step_word(k, plo, phi, k0, k1)) > 0:
                s = s + 1 if s + 1 < n_sites else 0
            else:
                s = s - 1 if s > 0 else n_sites - 1
            k += 1
        sites[p] = s
        clocks[p] = c
        jumps[p] = k


def lattice_run(state: LatticeState, t_obs: float, workers: int | None = None) -> LatticeState:
    """Event-driven evolution up to the observation time ``t_obs``.

    A particle jumps only once its full waiting time has elapsed, so the
    returned sites are where each particle sits *at* ``t_obs``.
    """
    set_workers(workers)
    sites = state.sites.copy()
    clocks = state.clocks.copy()
    jumps = state.jumps.copy()
    _lattice_kernel(sites, clocks, jumps, state.site_dt, np.uint64(state.seed), float(t_obs))
    return replace(state, sites=sites, clocks=clocks, jumps=jumps)
