"""Bond expansion of the Boltzmann weight and its percolation structure.

With the coupling split V = Vbar - v (0 < v < eps), the Boltzmann factor
expands over bond subsets:

    exp(-H) = sum over A subset of E of exp(-Hbar) * prod_{e in A} (exp(w_e) - 1),

where w_e = J(x1 - x2) v(s1 - s2) >= 0 and E holds the pairs with nonzero J
and at least one endpoint in the window.  Conditionally on the spins the
bonds are independent with probabilities 1 - exp(-w_e), and the whole bond
law is stochastically dominated by the spin-free Bernoulli field with
probabilities J(x1 - x2) * eps.  This module implements the conditional
sampler, the domination verifiers (single-bond bracket and exhaustive
up-set enumeration), cluster labeling with range statistics, path-counting
upper bounds on connection probabilities, and a quadrature consistency check
of the position/bond/spin factorization of the window Gibbs state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.stats import poisson

from .configuration import TWO_PI, Configuration, Window
from .neighbors import window_pairs
from .potential import PairPotentialModel, sup_distances
from .smoothing import SmoothDecomposition


class Bond(NamedTuple):
    """Unordered particle-index pair, canonicalized so i < j."""

    i: int
    j: int

    @classmethod
    def of(cls, a: int, b: int) -> "Bond":
        if a == b:
            raise ValueError("a bond needs two distinct particles")
        return cls(a, b) if a < b else cls(b, a)


@dataclass(frozen=True)
class BondSet:
    """Bonds over a fixed configuration, tied to a window radius."""

    pairs: np.ndarray  # (M, 2) int64, each row i < j
    window_n: float
    num_particles: int

    def __post_init__(self):
        p = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        if p.size and (np.any(p[:, 0] >= p[:, 1]) or np.any(p < 0)
                       or np.any(p >= self.num_particles)):
            raise ValueError("bond rows must satisfy 0 <= i < j < num_particles")
        object.__setattr__(self, "pairs", p)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def as_set(self) -> set[Bond]:
        return {Bond(int(a), int(b)) for a, b in self.pairs}


@dataclass(frozen=True)
class DominationParams:
    """Bernoulli field strength, constrained so every J * eps is a probability
    and the path series converges: c_j * eps < 2 c_j z xi eps < 1."""

    epsilon: float
    z: float
    xi: float
    c_j: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError("epsilon must be in (0, 1)")
        if not (2.0 * self.z * self.xi > 1.0):
            raise ValueError("need 2 * z * xi > 1 for the domination regime")
        if not (2.0 * self.c_j * self.z * self.xi * self.epsilon < 1.0):
            raise ValueError("epsilon too large: 2 c_j z xi eps must stay below 1")


def default_epsilon(model: PairPotentialModel, z: float, xi: float,
                    margin: float = 0.9) -> float:
    """Largest admissible Bernoulli strength, shrunk by the safety margin."""
    eps = margin / (2.0 * model.c_j * z * xi)
    return min(eps, margin)


def bond_set(cfg: Configuration, model: PairPotentialModel, n: float) -> BondSet:
    """All pairs with nonzero J and at least one endpoint in the window [-n, n)^2."""
    pos = cfg.positions
    rows = []
    for ii, jj, d in window_pairs(pos, n, None):
        jvals = model.j_many(d)
        keep = jvals != 0.0
        if np.any(keep):
            rows.append(np.column_stack([ii[keep], jj[keep]]))
    pairs = np.vstack(rows) if rows else np.empty((0, 2), dtype=np.int64)
    return BondSet(pairs=pairs, window_n=n, num_particles=len(cfg))


def bond_weight(model: PairPotentialModel, decomp: SmoothDecomposition,
                distance, dspin) -> np.ndarray:
    """Expansion exponents w = J(distance) * v(dspin); requires J >= 0."""
    j = model.j_many(distance)
    if np.any(j < 0.0):
        raise ValueError("negative J on the nonnegative branch; route via a sign split")
    return j * decomp.v_eval(dspin)


def conditional_bond_probability(model: PairPotentialModel, decomp: SmoothDecomposition,
                                 y1, y2) -> float:
    """Presence probability of one bond given the spins: 1 - exp(-J v).

    The subset expansion has weight prod (exp(w_e) - 1) for the present
    bonds; dividing by the full product exp(sum w_e) makes the bonds
    conditionally independent with this probability each.
    """
    d = max(abs(y1.position[0] - y2.position[0]), abs(y1.position[1] - y2.position[1]))
    w = float(bond_weight(model, decomp, np.array([d]), np.array([y1.spin - y2.spin]))[0])
    return -math.expm1(-w)


def expansion_identity_check(weights: Sequence[float]) -> float:
    """Relative gap between the exhaustive subset sum and the closed product.

    Computes sum over all subsets A of prod_{e in A} (exp(w_e) - 1) by brute
    enumeration and compares against prod_e exp(w_e).
    """
    w = np.asarray(list(weights), dtype=float)
    m = w.size
    if m > 20:
        raise ValueError("subset enumeration capped at 20 weights")
    factors = np.expm1(w)
    total = 0.0
    masks = np.arange(2**m, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, masks.size, chunk):
        blk = masks[start:start + chunk]
        present = (blk[:, None] >> np.arange(m)[None, :]) & 1
        total += float(np.sum(np.prod(np.where(present == 1, factors[None, :], 1.0), axis=1)))
    target = float(np.exp(np.sum(w)))
    return abs(total - target) / abs(target)


def sample_bonds(cfg: Configuration, model: PairPotentialModel,
                 decomp: SmoothDecomposition, n: float, seed,
                 cutoff: float | None = None) -> BondSet:
    """Draw the conditional bond field given the spins.

    Each qualifying pair enters independently with probability
    1 - exp(-J v).  Pairs beyond the cutoff are skipped; their probability
    is below J(cutoff) * eps, which the default model cutoff makes < 1e-12.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if cutoff is None:
        cutoff = model.interaction_range
    rows = []
    for ii, jj, d in window_pairs(cfg.positions, n, cutoff):
        w = bond_weight(model, decomp, d, cfg.spins[ii] - cfg.spins[jj])
        p = -np.expm1(-w)
        keep = rng.random(p.shape[0]) < p
        if np.any(keep):
            rows.append(np.column_stack([ii[keep], jj[keep]]))
    pairs = np.vstack(rows) if rows else np.empty((0, 2), dtype=np.int64)
    return BondSet(pairs=pairs, window_n=n, num_particles=len(cfg))


def bernoulli_probability(model: PairPotentialModel, epsilon: float, y1, y2) -> float:
    """Dominating spin-free bond probability J(x1 - x2) * epsilon."""
    d = max(abs(y1.position[0] - y2.position[0]), abs(y1.position[1] - y2.position[1]))
    p = float(model.j_many(np.array([d]))[0]) * epsilon
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"Bernoulli probability {p} outside [0, 1]; check the epsilon budget")
    return p


def holley_single_bond_check(model: PairPotentialModel, decomp: SmoothDecomposition,
                             epsilon: float, pair, spin_grid=256) -> bool:
    """Single-bond domination bracket over a spin-difference grid.

    Verifies eps_e + (eps_e - 1)(exp(J v(s)) - 1) >= 0 for all grid spins,
    the pointwise condition that makes every conditional presence
    probability at most the Bernoulli one.
    """
    x1, x2 = pair
    d = max(abs(x1[0] - x2[0]), abs(x1[1] - x2[1]))
    j = float(model.j_many(np.array([d]))[0])
    eps_e = j * epsilon
    if not (0.0 <= eps_e <= 1.0):
        raise ValueError("bond strength outside [0, 1]")
    grid = (np.linspace(0.0, TWO_PI, spin_grid, endpoint=False)
            if np.isscalar(spin_grid) else np.asarray(spin_grid, dtype=float))
    bracket = eps_e + (eps_e - 1.0) * np.expm1(j * decomp.v_eval(grid))
    return bool(np.all(bracket >= 0.0))


def upset_masks(num_bonds: int) -> list[int]:
    """All increasing families of subsets of a bond set, as bitmasks over the
    2^num_bonds subset lattice (subset s is in the family iff bit s is set)."""
    if num_bonds > 4:
        raise ValueError("up-set enumeration capped at 4 bonds")
    n_subsets = 1 << num_bonds
    candidates = np.arange(1 << n_subsets, dtype=np.int64)
    ok = np.ones(candidates.shape[0], dtype=bool)
    for s in range(n_subsets):
        for e in range(num_bonds):
            if s & (1 << e):
                continue
            sup = s | (1 << e)
            has_s = (candidates >> s) & 1
            has_sup = (candidates >> sup) & 1
            ok &= (has_s == 0) | (has_sup == 1)
    return [int(c) for c in candidates[ok]]


def exhaustive_domination_check(pi_weights: Sequence[float], epsilons: Sequence[float],
                                slack: float = 1e-9) -> bool:
    """Compare a subset law against the Bernoulli law on every increasing event.

    ``pi_weights[mask]`` is the probability of the bond subset encoded by
    ``mask``; ``epsilons`` are the Bernoulli bond probabilities.  Returns
    True iff pi(event) <= bernoulli(event) + slack for every up-set.
    """
    pi = np.asarray(list(pi_weights), dtype=float)
    m = int(round(math.log2(pi.size)))
    if 1 << m != pi.size:
        raise ValueError("pi_weights length must be a power of two")
    if m > 4:
        raise ValueError("exhaustive check capped at 4 bonds")
    if abs(float(np.sum(pi)) - 1.0) > 1e-9 or np.any(pi < -1e-15):
        raise ValueError("pi_weights must be a normalized distribution")
    eps = np.asarray(list(epsilons), dtype=float)
    if eps.size != m:
        raise ValueError("need one epsilon per bond")
    bern = np.ones(pi.size)
    for mask in range(pi.size):
        p = 1.0
        for e in range(m):
            p *= eps[e] if mask & (1 << e) else (1.0 - eps[e])
        bern[mask] = p
    for family in upset_masks(m):
        members = [s for s in range(pi.size) if family & (1 << s)]
        if float(np.sum(pi[members])) > float(np.sum(bern[members])) + slack:
            return False
    return True


# ---------------------------------------------------------------------------
# Clusters


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


@dataclass(frozen=True)
class ClusterDecomposition:
    """Connected components of the bond graph with per-cluster extremes."""

    labels: np.ndarray  # root id per particle
    members: dict[int, np.ndarray]
    max_norm: dict[int, float]

    def range_of(self, i: int) -> float:
        """Largest sup norm reached in the cluster of particle i."""
        return self.max_norm[int(self.labels[i])]


def clusters(cfg: Configuration, bondset: BondSet) -> ClusterDecomposition:
    """Union-find partition of the particles under the bond adjacency."""
    n = len(cfg)
    if bondset.num_particles != n:
        raise ValueError("bond set built over a different particle count")
    uf = UnionFind(n)
    for a, b in bondset.pairs:
        uf.union(int(a), int(b))
    labels = np.fromiter((uf.find(i) for i in range(n)), dtype=np.int64, count=n)
    norms = cfg.norms()
    members: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        members.setdefault(int(lab), []).append(i)
    mem = {lab: np.asarray(ix, dtype=np.int64) for lab, ix in members.items()}
    mx = {lab: float(np.max(norms[ix])) for lab, ix in mem.items()}
    return ClusterDecomposition(labels=labels, members=mem, max_norm=mx)


def cluster_range(cfg: Configuration, decomp: ClusterDecomposition, window: Window) -> float:
    """Largest cluster reach from the window: max over window particles of
    the top sup norm in their cluster; 0 when the window holds no particle."""
    if len(cfg) == 0:
        return 0.0
    mask = window.contains_many(cfg.positions)
    if not np.any(mask):
        return 0.0
    return max(decomp.range_of(int(i)) for i in np.nonzero(mask)[0])


def chain_bound(cfg: Configuration, model: PairPotentialModel, epsilon: float,
                start: int, end: int, max_len: int | None = None,
                z: float | None = None, xi: float | None = None) -> float:
    """Path-series upper bound on the Bernoulli connection probability.

    Sums eps^m * prod J over all vertex-distinct paths from start to end of
    length m <= max_len.  When the cap is below the longest possible path,
    a geometric tail (eps c_j z xi)^m remainder is added; it needs (z, xi).
    """
    n = len(cfg)
    if start == end or not (0 <= start < n and 0 <= end < n):
        raise ValueError("need two distinct valid particle indices")
    if max_len is None:
        max_len = n - 1
    jmat = model.j_many(sup_distances(cfg.positions, cfg.positions))
    np.fill_diagonal(jmat, 0.0)

    total = 0.0
    visited = [False] * n
    visited[start] = True

    def walk(current: int, length: int, weight: float) -> None:
        nonlocal total
        if length > max_len or weight == 0.0:
            return
        if jmat[current, end] != 0.0:
            total += weight * jmat[current, end] * epsilon**length
        if length == max_len:
            return
        for nxt in range(n):
            if not visited[nxt] and nxt != end and jmat[current, nxt] != 0.0:
                visited[nxt] = True
                walk(nxt, length + 1, weight * jmat[current, nxt])
                visited[nxt] = False

    walk(start, 1, 1.0)

    tail = 0.0
    if max_len < n - 1:
        if z is None or xi is None:
            raise ValueError("a truncated path series needs (z, xi) for the tail estimate")
        ratio = epsilon * model.c_j * z * xi
        if ratio >= 1.0:
            raise ValueError("geometric tail diverges; epsilon violates its budget")
        tail = ratio ** (max_len + 1) / (1.0 - ratio)
    return total + tail


def exact_connection_probability(num_particles: int, bonds: Sequence[Bond],
                                 probabilities: Sequence[float], start: int,
                                 end: int) -> float:
    """Brute-force Bernoulli connection probability by enumerating all 2^M
    bond patterns (oracle-grade; M capped at 20)."""
    m = len(bonds)
    if m > 20:
        raise ValueError("enumeration capped at 20 bonds")
    probs = np.asarray(list(probabilities), dtype=float)
    total = 0.0
    for mask in range(1 << m):
        uf = UnionFind(num_particles)
        weight = 1.0
        for e in range(m):
            if mask & (1 << e):
                weight *= probs[e]
                uf.union(bonds[e].i, bonds[e].j)
            else:
                weight *= 1.0 - probs[e]
        if uf.find(start) == uf.find(end):
            total += weight
    return total


# ---------------------------------------------------------------------------
# Factorization consistency of the window Gibbs state


def _event_library(window: Window) -> dict[str, Callable]:
    t = window.half_width

    def count_inside(pos):
        return int(np.sum((pos[:, 0] >= -t) & (pos[:, 0] < t)
                          & (pos[:, 1] >= -t) & (pos[:, 1] < t))) if pos.size else 0

    return {
        "everything": lambda pos, spins: True,
        "empty-window": lambda pos, spins: count_inside(pos) == 0,
        "one-particle": lambda pos, spins: count_inside(pos) == 1,
        "two-particles": lambda pos, spins: count_inside(pos) == 2,
        "half-circle-singleton": lambda pos, spins: count_inside(pos) == 1
        and bool(np.all(spins[: count_inside(pos)] < math.pi)),
        "right-half-plane": lambda pos, spins: count_inside(pos) >= 1
        and bool(np.all(pos[: count_inside(pos), 0] >= 0.0)),
    }


def decomposition_identity_check(model: PairPotentialModel, decomp: SmoothDecomposition,
                                 window: Window, boundary: Configuration, z: float,
                                 events: dict[str, Callable] | None = None,
                                 kmax: int = 2, grid: tuple[int, int] = (6, 8)) -> float:
    """Largest discrepancy between the direct Gibbs quadrature of test events
    and the route through the position marginal, the conditional bond law,
    and the bond-conditional spin law.

    Both routes share one grid, so the gap isolates the factorization
    algebra: the direct side weighs exp(-H) built from V, the factored side
    sums exp(-Hbar) times bond products over every subset of the qualifying
    pairs, normalizing each conditional explicitly.
    """
    lam = z * window.area
    tail = float(1.0 - poisson.cdf(kmax, lam))
    if tail > 1e-6:
        raise ValueError(f"truncation mass {tail:.2e} exceeds 1e-6")
    if events is None:
        events = _event_library(window)

    g, s = grid
    t = window.half_width
    h = 2.0 * t / g
    axis = -t + h * (np.arange(g) + 0.5)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    spin_nodes = (np.arange(s) + 0.5) * (TWO_PI / s)

    bpos, bspin = boundary.positions, boundary.spins
    names = list(events)
    lhs_sums = {name: 0.0 for name in names}
    rhs_sums = {name: 0.0 for name in names}
    z_norm = 0.0

    def accumulate(k: int, tuple_pts: np.ndarray, base: float) -> None:
        """Handle one ordered k-tuple of grid positions."""
        nonlocal z_norm
        npts = tuple_pts.shape[0]
        # spin lattice: one axis per inside particle
        shape = (s,) * k
        sig = [spin_nodes.reshape((1,) * a + (s,) + (1,) * (k - a - 1)) for a in range(k)]

        # pair lists: inside-inside and inside-boundary (window endpoint rule)
        hbar = np.zeros(shape)
        hu = np.zeros(shape)
        bond_w = []  # expansion exponent tensors per qualifying bond
        infinite = np.zeros(shape, dtype=bool)
        for a in range(k):
            for b in range(a + 1, k):
                d = float(np.max(np.abs(tuple_pts[a] - tuple_pts[b])))
                if d == 0.0:
                    infinite |= True
                    continue
                kv = float(model.k_many(np.array([d]))[0])
                jv = float(model.j_many(np.array([d]))[0])
                if math.isinf(kv):
                    infinite |= True
                    continue
                ds = sig[a] - sig[b]
                hbar = hbar + jv * decomp.vbar_eval(ds) + kv
                hu = hu + jv * model.v_many(ds) + kv
                if jv != 0.0:
                    bond_w.append(jv * decomp.v_eval(ds) + np.zeros(shape))
            for bi in range(len(boundary)):
                d = float(np.max(np.abs(tuple_pts[a] - bpos[bi])))
                kv = float(model.k_many(np.array([d]))[0])
                jv = float(model.j_many(np.array([d]))[0])
                if math.isinf(kv):
                    infinite |= True
                    continue
                ds = sig[a] - bspin[bi]
                hbar = hbar + jv * decomp.vbar_eval(ds) + kv
                hu = hu + jv * model.v_many(ds) + kv
                if jv != 0.0:
                    bond_w.append(jv * decomp.v_eval(ds) + np.zeros(shape))

        boltz_u = np.where(infinite, 0.0, np.exp(-hu))
        boltz_bar = np.where(infinite, 0.0, np.exp(-hbar))

        # event indicators on the spin lattice
        flat_masks = {}
        full_pos = np.vstack([tuple_pts, bpos]) if len(boundary) else tuple_pts
        idx_grids = np.meshgrid(*([np.arange(s)] * k), indexing="ij") if k else []
        for name, pred in events.items():
            if k == 0:
                flat_masks[name] = np.array(
                    bool(pred(full_pos if len(boundary) else np.empty((0, 2)),
                              bspin if len(boundary) else np.empty(0))))
            else:
                vals = np.empty(shape, dtype=bool)
                it = np.nditer(idx_grids[0], flags=["multi_index"])
                for _ in it:
                    combo = it.multi_index
                    spins_here = np.array([spin_nodes[combo[a]] for a in range(k)])
                    full_spin = np.concatenate([spins_here, bspin]) if len(boundary) else spins_here
                    vals[combo] = bool(pred(full_pos, full_spin))
                flat_masks[name] = vals

        mean = lambda arr: float(np.mean(arr)) if k else float(arr)

        w_x = mean(boltz_u)
        z_norm += base * w_x
        for name in names:
            lhs_sums[name] += base * mean(boltz_u * flat_masks[name])

        if w_x <= 0.0:
            # the conditional bond law defaults to a point mass on the empty
            # set and the spin conditional never gets weight; nothing to add
            return
        nb = len(bond_w)
        for mask in range(1 << nb):
            v_a = boltz_bar.copy() if k else np.array(boltz_bar, dtype=float)
            for e in range(nb):
                if mask & (1 << e):
                    v_a = v_a * np.expm1(bond_w[e])
            w_a = mean(v_a)
            if w_a <= 0.0:
                continue
            pi_a = w_a / w_x
            for name in names:
                alpha = mean(v_a * flat_masks[name]) / w_a
                rhs_sums[name] += base * w_x * pi_a * alpha

    # k = 0
    accumulate(0, np.empty((0, 2)), 1.0)
    # k = 1
    for p in range(pts.shape[0]):
        accumulate(1, pts[p:p + 1], z * h * h)
    # k = 2
    if kmax >= 2:
        base2 = 0.5 * (z * h * h) ** 2
        for p in range(pts.shape[0]):
            for q in range(pts.shape[0]):
                accumulate(2, np.vstack([pts[p], pts[q]]), base2)

    worst = 0.0
    for name in names:
        worst = max(worst, abs(lhs_sums[name] - rhs_sums[name]) / z_norm)
    return worst
