"""Grand-canonical Markov chain sampling of finite-window Gibbs states.

The target in a window with fixed exterior configuration is the Boltzmann
reweighting of a Poisson point process: density exp(-H) against the Poisson
law with activity z and uniform independent spins, where H sums pair terms
with at least one endpoint inside the window.  Four reversible move types
(birth, death, translation, spin rotation) are mixed with fixed
probabilities; each satisfies detailed balance for that target.

A quadrature routine for near-empty windows provides the exact finite
distribution used as the sampling oracle in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import poisson

from .configuration import TWO_PI, Configuration, Window, wrap_angle
from .neighbors import CellList
from .potential import PairPotentialModel, hamiltonian, sup_distances

MOVE_NAMES = ("birth", "death", "translate", "spin_rotate")


@dataclass(frozen=True)
class SamplerParams:
    """Chain controls: activity, sweep budget, move mixture, proposal scales.

    One sweep is max(1, ceil(z * window area)) elementary steps.  The spin
    shift is a diagnostic offset added to every proposed spin; it implements
    the global-rotation pushforward used by symmetry checks.
    """

    z: float
    sweeps: int
    move_mix: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    translate_scale: float = 0.4
    spin_scale: float = 0.8
    seed: int = 0
    burn_in_fraction: float = 0.2
    recheck_interval: int = 4096
    proposal_spin_shift: float = 0.0

    def __post_init__(self):
        if self.z < 0:
            raise ValueError("activity must be nonnegative")
        if len(self.move_mix) != 4 or any(p < 0 for p in self.move_mix):
            raise ValueError("move_mix needs four nonnegative probabilities")
        if abs(sum(self.move_mix) - 1.0) > 1e-12:
            raise ValueError("move_mix must sum to 1")
        if not (0.0 <= self.burn_in_fraction < 1.0):
            raise ValueError("burn_in_fraction must be in [0, 1)")


@dataclass
class ChainState:
    inside: Configuration
    boundary: Configuration
    cached_energy: float


@dataclass
class RuelleDiagnostics:
    """Empirical correlation-bound estimate: smallest xi making the moment
    inequality hold for the tested observable of order m."""

    xi_hat: float
    m: int

    def __post_init__(self):
        if not self.xi_hat > 0:
            raise ValueError("xi_hat must be positive")


def sample_poisson(window: Window, z: float, seed) -> Configuration:
    """Poisson point process draw: count ~ Poisson(z * area), uniform
    positions in the window, uniform spins; deterministic for a given seed."""
    if z < 0:
        raise ValueError("activity must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = int(rng.poisson(z * window.area))
    t = window.half_width
    pos = rng.uniform(-t, t, size=(n, 2))
    spins = rng.uniform(0.0, TWO_PI, size=n)
    return Configuration(pos, spins)


def acceptance_probability(log_factor: float, delta_h: float) -> float:
    """min(1, factor * exp(-delta_h)) with saturating +inf energies."""
    if math.isinf(delta_h):
        return 0.0 if delta_h > 0 else 1.0
    log_acc = log_factor - delta_h
    if log_acc >= 0.0:
        return 1.0
    return math.exp(log_acc)


def birth_log_factor(z_area: float, n_current: int) -> float:
    return math.log(z_area) - math.log(n_current + 1)


def death_log_factor(z_area: float, n_current: int) -> float:
    return math.log(n_current) - math.log(z_area)


class GibbsChain:
    """Mutable chain over configurations in a window with fixed boundary.

    Keeps positions and spins in growable arrays, a cell list per particle
    set for neighbor lookups at the model's interaction range, and an
    incrementally updated energy cache revalidated every
    ``recheck_interval`` steps.
    """

    def __init__(self, model: PairPotentialModel, window: Window, params: SamplerParams,
                 boundary: Configuration | None = None,
                 start: Configuration | None = None,
                 rng: np.random.Generator | None = None):
        self.model = model
        self.window = window
        self.params = params
        self.boundary = boundary if boundary is not None else Configuration.empty()
        if len(self.boundary) and np.any(window.contains_many(self.boundary.positions)):
            raise ValueError("boundary particle inside the window")
        self.rng = rng if rng is not None else np.random.default_rng(params.seed)
        self.cutoff = model.interaction_range

        cap = 64
        self._pos = np.zeros((cap, 2))
        self._spin = np.zeros(cap)
        self._n = 0
        self._cells = CellList(self.cutoff)
        self._bpos = self.boundary.positions.copy()
        self._bspin = self.boundary.spins.copy()
        self._bcells = CellList.build(self._bpos, self.cutoff) if len(self.boundary) else None

        if start is not None and len(start):
            if not np.all(window.contains_many(start.positions)):
                raise ValueError("start configuration has a particle outside the window")
            for i in range(len(start)):
                self._append(start.positions[i, 0], start.positions[i, 1], start.spins[i])
        self.energy = self._full_energy()
        if math.isinf(self.energy):
            raise ValueError("start configuration has infinite energy")

        self.z_area = params.z * window.area
        self.steps_per_sweep = max(1, math.ceil(self.z_area))
        self.proposals = {name: 0 for name in MOVE_NAMES}
        self.accepts = {name: 0 for name in MOVE_NAMES}
        self.energy_trace: list[float] = []
        self._steps_since_recheck = 0
        self._mix_cum = np.cumsum(self.params.move_mix)

    # -- bookkeeping ------------------------------------------------------

    def _append(self, x: float, y: float, s: float) -> None:
        if self._n == self._pos.shape[0]:
            self._pos = np.vstack([self._pos, np.zeros_like(self._pos)])
            self._spin = np.concatenate([self._spin, np.zeros_like(self._spin)])
        self._pos[self._n] = (x, y)
        self._spin[self._n] = s
        self._cells.add(self._n, x, y)
        self._n += 1

    def _remove(self, i: int) -> None:
        last = self._n - 1
        self._cells.remove(i, self._pos[i, 0], self._pos[i, 1])
        if i != last:
            self._cells.reindex(last, i, self._pos[last, 0], self._pos[last, 1])
            self._pos[i] = self._pos[last]
            self._spin[i] = self._spin[last]
        self._n = last

    def configuration(self) -> Configuration:
        return Configuration(self._pos[: self._n].copy(), self._spin[: self._n].copy())

    def state(self) -> ChainState:
        return ChainState(self.configuration(), self.boundary, self.energy)

    def _full_energy(self) -> float:
        return hamiltonian(self.model, self.window, self.configuration(), self.boundary,
                           cutoff=self.cutoff)

    def recompute_energy(self) -> float:
        """Recompute the cache from scratch; returns the discrepancy."""
        fresh = self._full_energy()
        gap = abs(fresh - self.energy)
        self.energy = fresh
        return gap

    # -- energies ---------------------------------------------------------

    def local_energy(self, x: float, y: float, s: float, exclude: int | None = None) -> float:
        """Interaction of a (possibly virtual) particle with the current
        state and the boundary, within the interaction range."""
        model = self.model
        total = 0.0
        idx = self._cells.neighbors(x, y)
        if exclude is not None and exclude in idx:
            idx = [i for i in idx if i != exclude]
        if idx:
            p = self._pos[idx]
            d = np.maximum(np.abs(p[:, 0] - x), np.abs(p[:, 1] - y))
            k = model.k_many(d)
            if np.any(np.isinf(k)):
                return math.inf
            total += float(np.sum(model.j_many(d) * model.v_many(s - self._spin[idx]) + k))
        if self._bcells is not None:
            bidx = self._bcells.neighbors(x, y)
            if bidx:
                p = self._bpos[bidx]
                d = np.maximum(np.abs(p[:, 0] - x), np.abs(p[:, 1] - y))
                k = model.k_many(d)
                if np.any(np.isinf(k)):
                    return math.inf
                total += float(np.sum(model.j_many(d) * model.v_many(s - self._bspin[bidx]) + k))
        return total

    # -- moves ------------------------------------------------------------

    def _accept(self, log_factor: float, delta_h: float) -> bool:
        p = acceptance_probability(log_factor, delta_h)
        if p >= 1.0:
            return True
        if p <= 0.0:
            return False
        return self.rng.random() < p

    def step(self) -> None:
        u = self.rng.random()
        if u < self._mix_cum[0]:
            self._move_birth()
        elif u < self._mix_cum[1]:
            self._move_death()
        elif u < self._mix_cum[2]:
            self._move_translate()
        else:
            self._move_spin()
        self._steps_since_recheck += 1
        if self._steps_since_recheck >= self.params.recheck_interval:
            self._steps_since_recheck = 0
            gap = self.recompute_energy()
            if gap > 1e-8 * max(1.0, abs(self.energy)):
                raise AssertionError(f"energy cache drifted by {gap:.3e}")

    def _move_birth(self) -> None:
        self.proposals["birth"] += 1
        t = self.window.half_width
        x, y = self.rng.uniform(-t, t, size=2)
        s = wrap_angle(self.rng.uniform(0.0, TWO_PI) + self.params.proposal_spin_shift)
        if self.z_area <= 0.0:
            return
        dh = self.local_energy(x, y, s)
        if self._accept(birth_log_factor(self.z_area, self._n), dh):
            self._append(x, y, float(s))
            self.energy += dh
            self.accepts["birth"] += 1

    def _move_death(self) -> None:
        self.proposals["death"] += 1
        if self._n == 0:
            return
        i = int(self.rng.integers(self._n))
        dh = -self.local_energy(self._pos[i, 0], self._pos[i, 1], self._spin[i], exclude=i)
        if self._accept(death_log_factor(self.z_area, self._n), dh):
            self._remove(i)
            self.energy += dh
            self.accepts["death"] += 1

    def _move_translate(self) -> None:
        self.proposals["translate"] += 1
        if self._n == 0:
            return
        i = int(self.rng.integers(self._n))
        scale = self.params.translate_scale
        dx, dy = self.rng.uniform(-scale, scale, size=2)
        x_new, y_new = self._pos[i, 0] + dx, self._pos[i, 1] + dy
        if not self.window.contains(x_new, y_new):
            return
        s = self._spin[i]
        e_old = self.local_energy(self._pos[i, 0], self._pos[i, 1], s, exclude=i)
        e_new = self.local_energy(x_new, y_new, s, exclude=i)
        dh = e_new - e_old
        if self._accept(0.0, dh):
            self._cells.move(i, self._pos[i, 0], self._pos[i, 1], x_new, y_new)
            self._pos[i] = (x_new, y_new)
            self.energy += dh
            self.accepts["translate"] += 1

    def _move_spin(self) -> None:
        self.proposals["spin_rotate"] += 1
        if self._n == 0:
            return
        i = int(self.rng.integers(self._n))
        s_new = wrap_angle(self._spin[i] + self.rng.uniform(-self.params.spin_scale,
                                                            self.params.spin_scale))
        x, y = self._pos[i]
        e_old = self.local_energy(x, y, self._spin[i], exclude=i)
        e_new = self.local_energy(x, y, float(s_new), exclude=i)
        dh = e_new - e_old
        if self._accept(0.0, dh):
            self._spin[i] = s_new
            self.energy += dh
            self.accepts["spin_rotate"] += 1

    # -- driving ----------------------------------------------------------

    def sweep(self) -> None:
        for _ in range(self.steps_per_sweep):
            self.step()
        self.energy_trace.append(self.energy)

    def run(self) -> list[Configuration]:
        """Run the configured sweep budget; return post-burn-in samples, one
        per sweep.  A zero-sweep budget returns the initial state only."""
        if self.params.sweeps <= 0:
            return [self.configuration()]
        burn = math.ceil(self.params.burn_in_fraction * self.params.sweeps)
        samples: list[Configuration] = []
        for k in range(self.params.sweeps):
            self.sweep()
            if k >= burn:
                samples.append(self.configuration())
        return samples

    def acceptance_rates(self) -> dict[str, float]:
        return {name: (self.accepts[name] / self.proposals[name] if self.proposals[name] else 0.0)
                for name in MOVE_NAMES}


def mcmc_step(state: ChainState, model: PairPotentialModel, window: Window,
              params: SamplerParams, rng: np.random.Generator) -> ChainState:
    """One elementary chain step as a pure state transition.

    The caller's generator advances; the input state is not mutated.
    """
    chain = GibbsChain(model, window, params, boundary=state.boundary,
                       start=state.inside, rng=rng)
    chain.step()
    return chain.state()


def sample_gibbs(model: PairPotentialModel, window: Window, boundary: Configuration,
                 params: SamplerParams) -> list[Configuration]:
    """Thinned chain samples of the window Gibbs state; seeded and reproducible."""
    chain = GibbsChain(model, window, params, boundary=boundary)
    return chain.run()


# ---------------------------------------------------------------------------
# Quadrature oracle for near-empty windows


def spin_sector(spins, sectors: int = 4) -> np.ndarray:
    return (np.asarray(spins, dtype=float) // (TWO_PI / sectors)).astype(np.int64) % sectors


def position_quadrant(positions) -> np.ndarray:
    p = np.asarray(positions, dtype=float).reshape(-1, 2)
    return (p[:, 0] >= 0).astype(np.int64) + 2 * (p[:, 1] >= 0).astype(np.int64)


def outcome_of(cfg: Configuration, window: Window, sectors: int = 4) -> tuple:
    """Discrete outcome of a configuration: sorted (quadrant, spin sector)
    codes of the particles inside the window."""
    if len(cfg) == 0:
        return ()
    mask = window.contains_many(cfg.positions)
    quads = position_quadrant(cfg.positions[mask])
    secs = spin_sector(cfg.spins[mask], sectors)
    return tuple(sorted(zip(quads.tolist(), secs.tolist())))


def empirical_distribution(samples: Sequence[Configuration], window: Window,
                           sectors: int = 4) -> dict[tuple, float]:
    counts: dict[tuple, float] = {}
    for cfg in samples:
        key = outcome_of(cfg, window, sectors)
        counts[key] = counts.get(key, 0.0) + 1.0
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def _boundary_field(model, points, spin_nodes, boundary):
    """exp(-W) factors between each (grid point, spin node) and the boundary."""
    npts, ns = points.shape[0], spin_nodes.shape[0]
    phi = np.zeros((npts, ns))
    if len(boundary):
        d = sup_distances(points, boundary.positions)  # (npts, nb)
        k = model.k_many(d)
        j = model.j_many(d)
        for l, sig in enumerate(spin_nodes):
            v = model.v_many(sig - boundary.spins)  # (nb,)
            phi[:, l] = np.sum(j * v[None, :] + k, axis=1)
    return phi


def exact_reference(model: PairPotentialModel, window: Window, boundary: Configuration,
                    z: float, kmax: int, grid: tuple[int, int]) -> dict[tuple, float]:
    """Quadrature of the window Gibbs state truncated at kmax particles.

    Returns the normalized law of the discrete outcome (particle count with
    per-particle quadrant and spin-sector codes).  Valid only when the
    Poisson mass above kmax is below 1e-6; raises otherwise.
    """
    if kmax < 0 or kmax > 3:
        raise ValueError("kmax must be between 0 and 3")
    lam = z * window.area
    tail = float(1.0 - poisson.cdf(kmax, lam))
    if tail > 1e-6:
        raise ValueError(f"truncation mass {tail:.2e} exceeds 1e-6; shrink z or the window")
    g, s = grid
    if s % 4 != 0:
        raise ValueError("spin grid must be a multiple of the 4 outcome sectors")

    weights: dict[tuple, float] = {(): 1.0}  # k = 0 term, exp(-0)

    t = window.half_width
    for k in range(1, kmax + 1):
        gk, sk = (g, s) if k <= 2 else (max(2, g // 2), max(4, s // 2 // 4 * 4))
        h = 2.0 * t / gk
        axis = -t + h * (np.arange(gk) + 0.5)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])  # (gk^2, 2)
        spin_nodes = (np.arange(sk) + 0.5) * (TWO_PI / sk)
        phi = _boundary_field(model, pts, spin_nodes, boundary)  # (P, sk)
        quad = position_quadrant(pts)
        sec = spin_sector(spin_nodes)
        code = None
        base = float(z**k) / math.factorial(k) * (h * h) ** k / float(sk**k)

        if k == 1:
            w = base * np.exp(-phi)
            _accumulate(weights, [quad], [sec], w)
        elif k == 2:
            d12 = sup_distances(pts, pts)
            k12 = model.k_many(d12)
            j12 = model.j_many(d12)
            vmat = model.v_many(spin_nodes[:, None] - spin_nodes[None, :])
            expo = (phi[:, None, :, None] + phi[None, :, None, :]
                    + j12[:, :, None, None] * vmat[None, None, :, :]
                    + k12[:, :, None, None])
            w = base * np.exp(-expo)
            _accumulate(weights, [quad, quad], [sec, sec], w)
        else:
            d = sup_distances(pts, pts)
            kk = model.k_many(d)
            jj = model.j_many(d)
            vmat = model.v_many(spin_nodes[:, None] - spin_nodes[None, :])
            P, S = pts.shape[0], sk
            expo = (phi[:, None, None, :, None, None] + phi[None, :, None, None, :, None]
                    + phi[None, None, :, None, None, :])
            expo = expo + (jj[:, :, None, None, None, None] * vmat[None, None, None, :, :, None]
                           + kk[:, :, None, None, None, None])
            expo = expo + (jj[:, None, :, None, None, None] * vmat[None, None, None, :, None, :]
                           + kk[:, None, :, None, None, None])
            expo = expo + (jj[None, :, :, None, None, None] * vmat[None, None, None, None, :, :]
                           + kk[None, :, :, None, None, None])
            w = base * np.exp(-expo)
            _accumulate(weights, [quad, quad, quad], [sec, sec, sec], w)

    total = sum(weights.values())
    return {key: val / total for key, val in weights.items()}


def _accumulate(weights: dict, quads: list[np.ndarray], secs: list[np.ndarray],
                w: np.ndarray) -> None:
    """Bin a k-particle weight tensor into canonical outcome keys."""
    k = len(quads)
    codes = [None] * k
    # per-particle code = quadrant * sectors + sector, broadcast to w's shape
    sectors = secs[0].shape[0]
    for a in range(k):
        shape = [1] * (2 * k)
        shape[a] = quads[a].shape[0]
        qa = quads[a].reshape(shape)
        shape = [1] * (2 * k)
        shape[k + a] = sectors
        sa = secs[a].reshape(shape)
        codes[a] = (qa * sectors + sa) + np.zeros(w.shape, dtype=np.int64)
    stacked = np.stack([c.ravel() for c in codes], axis=1)
    stacked.sort(axis=1)
    # pack the sorted codes of up to 3 particles into one integer key
    packed = np.zeros(stacked.shape[0], dtype=np.int64)
    base = 4 * sectors + 1
    for a in range(k):
        packed = packed * base + (stacked[:, a] + 1)
    vals = np.bincount(packed, weights=w.ravel())
    nz = np.nonzero(vals)[0]
    for p in nz:
        rem, parts = int(p), []
        while rem:
            rem, digit = divmod(rem, base)
            parts.append(digit - 1)
        parts.reverse()
        key = tuple(sorted((c // sectors, c % sectors) for c in parts))
        weights[key] = weights.get(key, 0.0) + float(vals[p])


# ---------------------------------------------------------------------------
# Correlation diagnostics


def correlation_diagnostic(samples: Sequence[Configuration], window: Window, z: float,
                           m: int, f: Callable[[np.ndarray], np.ndarray],
                           f_integral: float | None = None) -> RuelleDiagnostics:
    """Empirical bound constant for the m-point moment inequality.

    Estimates the mean of the sum of f over ordered m-tuples of distinct
    particle positions in the window and returns the smallest xi with
    estimate <= (z * xi)^m * integral(f).  f maps an (N, m, 2) array of
    position tuples to N nonnegative values.
    """
    if m < 1 or m > 2:
        raise ValueError("only orders m = 1 and m = 2 are supported")
    total = 0.0
    for cfg in samples:
        mask = window.contains_many(cfg.positions) if len(cfg) else np.zeros(0, bool)
        pts = cfg.positions[mask]
        n = pts.shape[0]
        if n < m:
            continue
        if m == 1:
            total += float(np.sum(f(pts[:, None, :])))
        else:
            ii, jj = np.nonzero(~np.eye(n, dtype=bool))
            tuples = np.stack([pts[ii], pts[jj]], axis=1)
            total += float(np.sum(f(tuples)))
    lhs = total / max(1, len(samples))

    if f_integral is None:
        t = window.half_width
        g = 64 if m == 1 else 20
        h = 2.0 * t / g
        axis = -t + h * (np.arange(g) + 0.5)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
        if m == 1:
            f_integral = float(np.sum(f(pts[:, None, :]))) * h * h
        else:
            ii, jj = np.meshgrid(np.arange(pts.shape[0]), np.arange(pts.shape[0]),
                                 indexing="ij")
            tuples = np.stack([pts[ii.ravel()], pts[jj.ravel()]], axis=1)
            f_integral = float(np.sum(f(tuples))) * (h * h) ** 2

    floor = 1e-12
    if lhs <= 0.0 or f_integral <= 0.0:
        return RuelleDiagnostics(xi_hat=floor, m=m)
    xi = (lhs / (z**m * f_integral)) ** (1.0 / m)
    return RuelleDiagnostics(xi_hat=max(xi, floor), m=m)
