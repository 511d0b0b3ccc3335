"""Pair potentials of the form J(dx) * V(dspin) + K(dx) and their energies.

J and K are radial in the sup norm; V is a symmetric 2*pi-periodic function
of the spin difference.  |J|(1 + r^2) is bounded by a decreasing integrable
envelope, which yields the interaction constants used downstream: the
coupling budget ``c_j`` bounding 1 + psi(0) + integral of J(x)(1 + |x|^2),
and the tail integrals of J outside a radius.

Energies take values in (-inf, +inf]; +inf encodes a hard-core overlap and
saturates through sums, and exp(-inf) is treated as 0 in all weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .configuration import Configuration, Window, cell_indices

# sup-norm radial area element: the sphere of radius t is a square of
# perimeter 8t, so integral over the plane of g(|x|) dx = integral 8 t g(t) dt.
SUP_NORM_PERIMETER = 8.0

QUAD_TOL = 1e-9  # absolute tolerance of all radial quadratures


# ---------------------------------------------------------------------------
# Spin couplings


class SpinCoupling:
    """Symmetric 2*pi-periodic function of a spin difference."""

    def evaluate(self, dsigma) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, dsigma):
        return self.evaluate(dsigma)

    def sup_norm(self, grid: int = 4096) -> float:
        s = np.linspace(0.0, 2.0 * math.pi, grid, endpoint=False)
        return float(np.max(np.abs(self.evaluate(s))))


class TrigPolySpin(SpinCoupling):
    """Finite cosine series sum_m a_m cos(m * sigma); symmetric by construction."""

    def __init__(self, coefficients: dict[int, float]):
        self.coefficients = {int(m): float(a) for m, a in coefficients.items() if a != 0.0}
        for m in self.coefficients:
            if m < 0:
                raise ValueError("harmonic orders must be nonnegative")

    def evaluate(self, dsigma):
        s = np.asarray(dsigma, dtype=float)
        out = np.zeros_like(s)
        for m, a in self.coefficients.items():
            out = out + a * np.cos(m * s)
        return out

    def second_derivative(self, dsigma):
        s = np.asarray(dsigma, dtype=float)
        out = np.zeros_like(s)
        for m, a in self.coefficients.items():
            out = out - a * (m * m) * np.cos(m * s)
        return out

    def __repr__(self):
        return f"TrigPolySpin({self.coefficients})"


class TabulatedSpin(SpinCoupling):
    """Piecewise-linear interpolation of (angle, value) samples on [0, 2*pi].

    The table is wrapped periodically; symmetry V(s) = V(-s) is enforced by
    symmetrizing the samples.
    """

    def __init__(self, angles, values):
        a = np.asarray(angles, dtype=float)
        v = np.asarray(values, dtype=float)
        if a.ndim != 1 or a.shape != v.shape or a.size < 2:
            raise ValueError("need matching 1-d angle and value tables")
        order = np.argsort(a)
        a, v = a[order], v[order]
        if a[0] < -1e-9 or a[-1] > 2 * math.pi + 1e-6:
            raise ValueError("angles must lie in [0, 2*pi]")
        a = np.clip(a, 0.0, 2 * math.pi)
        # close the period and symmetrize: V(s) <- (V(s) + V(2*pi - s)) / 2
        grid = np.linspace(0.0, 2.0 * math.pi, 4097)
        vals = np.interp(grid, a, v, period=2.0 * math.pi)
        vals = 0.5 * (vals + vals[::-1])
        self.angles = grid
        self.values = vals

    def evaluate(self, dsigma):
        s = np.mod(np.asarray(dsigma, dtype=float), 2.0 * math.pi)
        return np.interp(s, self.angles, self.values)

    def __repr__(self):
        return f"TabulatedSpin(n={self.angles.size})"


# ---------------------------------------------------------------------------
# Radial envelope


@dataclass(frozen=True)
class PsiEnvelope:
    """Decreasing radial bound psi with finite first moment.

    ``psi_s`` is (an upper estimate of) the integral of psi(r) * r over
    [0, inf); finiteness of this moment is what makes the pair interaction
    summable over the plane.
    """

    psi: Callable[[np.ndarray], np.ndarray]
    psi_s: float

    def __post_init__(self):
        if not (math.isfinite(self.psi_s) and self.psi_s >= 0):
            raise ValueError("psi_s must be finite and nonnegative")

    def validate(self, r_max: float = 50.0, grid: int = 2048) -> None:
        """Check monotonicity on a grid and psi_s against quadrature."""
        r = np.linspace(0.0, r_max, grid)
        v = np.asarray(self.psi(r), dtype=float)
        if np.any(np.diff(v) > 1e-12):
            raise ValueError("envelope is not decreasing on the sampled grid")
        val, _ = quad(lambda t: float(self.psi(np.array([t]))[0]) * t, 0.0, r_max,
                      epsabs=QUAD_TOL, limit=200)
        if self.psi_s < val - 1e-6:
            raise ValueError(f"psi_s={self.psi_s} below quadrature value {val}")


def zero_envelope() -> PsiEnvelope:
    return PsiEnvelope(psi=lambda r: np.zeros_like(np.asarray(r, dtype=float)), psi_s=0.0)


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True)
class PairPotentialModel:
    """Bundle (J, K, V) with envelope and instance-diagnostic constants.

    ``j_profile`` and ``k_profile`` are vectorized functions of the sup-norm
    distance; ``k_profile`` may return +inf (hard core).  The superstability
    pair (A, B) and the lower-regularity decay ``lower_reg_psi`` are shipped
    constants validated by randomized sweeps, not proofs.
    """

    name: str
    j_profile: Callable[[np.ndarray], np.ndarray]
    k_profile: Callable[[np.ndarray], np.ndarray]
    spin_coupling: SpinCoupling
    envelope: PsiEnvelope
    c_j: float
    superstability_a: float
    superstability_b: float
    lower_reg_psi: Callable[[np.ndarray], np.ndarray]
    hardcore_radius: float = 0.0
    interaction_range: float = 1.0  # distance beyond which pair terms are < truncation_tol
    truncation_tol: float = 1e-12
    j_support: float = math.inf  # radius beyond which J is exactly 0 (inf if never)

    def j_many(self, r):
        return np.asarray(self.j_profile(np.asarray(r, dtype=float)), dtype=float)

    def k_many(self, r):
        return np.asarray(self.k_profile(np.asarray(r, dtype=float)), dtype=float)

    def v_many(self, dsigma):
        return self.spin_coupling.evaluate(dsigma)

    def pair_terms(self, r, dsigma):
        """Vectorized J(r) V(ds) + K(r)."""
        return self.j_many(r) * self.v_many(dsigma) + self.k_many(r)

    def with_spin_coupling(self, coupling: SpinCoupling, name: str | None = None) -> "PairPotentialModel":
        """Same positional kernels with a different spin coupling."""
        return PairPotentialModel(
            name=name or f"{self.name}[{coupling!r}]",
            j_profile=self.j_profile,
            k_profile=self.k_profile,
            spin_coupling=coupling,
            envelope=self.envelope,
            c_j=self.c_j,
            superstability_a=self.superstability_a,
            superstability_b=self.superstability_b,
            lower_reg_psi=self.lower_reg_psi,
            hardcore_radius=self.hardcore_radius,
            interaction_range=self.interaction_range,
            truncation_tol=self.truncation_tol,
            j_support=self.j_support,
        )


def sup_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise sup-norm distances, shape (len(a), len(b))."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    return np.max(np.abs(a[:, None, :] - b[None, :, :]), axis=2)


def pair_energy(model: PairPotentialModel, y1, y2) -> float:
    """J(x1-x2) V(s1-s2) + K(x1-x2); symmetric; +inf inside a hard core."""
    (x1, y1c), s1 = y1.position, y1.spin
    (x2, y2c), s2 = y2.position, y2.spin
    d = max(abs(x1 - x2), abs(y1c - y2c))
    if d == 0.0:
        raise ValueError("pair energy undefined for coincident positions")
    k = float(model.k_many(np.array([d]))[0])
    if math.isinf(k):
        return math.inf
    j = float(model.j_many(np.array([d]))[0])
    v = float(model.v_many(np.array([s1 - s2]))[0])
    return j * v + k


def _pairwise_energy_sum(model, pos_a, spin_a, pos_b, spin_b, *, cutoff=None,
                         allow_coincident=False) -> float:
    """Sum of pair terms over the full cross product of two particle sets."""
    if pos_a.shape[0] == 0 or pos_b.shape[0] == 0:
        return 0.0
    total = 0.0
    chunk = max(1, int(2_000_000 / max(1, pos_b.shape[0])))
    for start in range(0, pos_a.shape[0], chunk):
        stop = min(start + chunk, pos_a.shape[0])
        d = sup_distances(pos_a[start:stop], pos_b)
        if not allow_coincident and np.any(d == 0.0):
            raise ValueError("configurations share a position")
        k = model.k_many(d)
        if np.any(np.isinf(k)):
            return math.inf
        ds = spin_a[start:stop, None] - spin_b[None, :]
        contrib = model.j_many(d) * model.v_many(ds) + k
        if cutoff is not None:
            contrib = np.where(d <= cutoff, contrib, 0.0)
        total += float(np.sum(contrib))
    return total


def energy(model: PairPotentialModel, cfg: Configuration, *, cutoff=None) -> float:
    """Total energy: sum of pair terms over all unordered particle pairs."""
    n = len(cfg)
    if n <= 1:
        return 0.0
    pos, spn = cfg.positions, cfg.spins
    cols = np.arange(n)[None, :]
    total = 0.0
    chunk = max(1, int(2_000_000 / n))
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d = sup_distances(pos[start:stop], pos)
        mask = cols > np.arange(start, stop)[:, None]
        if cutoff is not None:
            mask &= d <= cutoff
        dd = d[mask]
        k = model.k_many(dd)
        if np.any(np.isinf(k)):
            return math.inf
        ds = (spn[start:stop, None] - spn[None, :])[mask]
        total += float(np.sum(model.j_many(dd) * model.v_many(ds) + k))
    return total


def interaction(model: PairPotentialModel, cfg_a: Configuration, cfg_b: Configuration,
                *, cutoff=None) -> float:
    """Cross-interaction energy: double sum over pairs (a in A, b in B)."""
    if len(cfg_a) == 0 or len(cfg_b) == 0:
        return 0.0
    return _pairwise_energy_sum(model, cfg_a.positions, cfg_a.spins,
                                cfg_b.positions, cfg_b.spins, cutoff=cutoff)


def hamiltonian(model: PairPotentialModel, window: Window, inside: Configuration,
                boundary: Configuration, *, cutoff=None) -> float:
    """Window energy with boundary condition.

    Equals energy(inside) + interaction(inside, boundary), i.e. the sum over
    pairs with at least one endpoint in the window.  Raises if a particle is
    on the wrong side of the window.
    """
    if len(inside) and not np.all(window.contains_many(inside.positions)):
        raise ValueError("inside configuration has a particle outside the window")
    if len(boundary) and np.any(window.contains_many(boundary.positions)):
        raise ValueError("boundary configuration has a particle inside the window")
    h = energy(model, inside, cutoff=cutoff)
    if math.isinf(h):
        return math.inf
    w = interaction(model, inside, boundary, cutoff=cutoff)
    return h + w


def cell_occupancies(cfg: Configuration) -> dict[tuple[int, int], int]:
    """Occupied unit cells of a configuration with their particle counts."""
    if len(cfg) == 0:
        return {}
    labels = cell_indices(cfg.positions)
    out: dict[tuple[int, int], int] = {}
    for i, j in labels:
        out[(int(i), int(j))] = out.get((int(i), int(j)), 0) + 1
    return out


def superstability_margin(model: PairPotentialModel, cfg: Configuration) -> float:
    """Energy minus the per-cell quadratic lower bound A N^2 - B N.

    Nonnegative output certifies the superstability inequality on this
    instance for the model's shipped (A, B).
    """
    h = energy(model, cfg)
    if math.isinf(h):
        return math.inf
    a, b = model.superstability_a, model.superstability_b
    bound = sum(a * n * n - b * n for n in cell_occupancies(cfg).values())
    return h - bound


def lower_regularity_margin(model: PairPotentialModel, cfg_a: Configuration,
                            cfg_b: Configuration) -> float:
    """Cross energy minus its summable per-cell lower bound.

    The bound is -sum over occupied cell pairs (r, s) of
    Psi(|r - s|) * (N_r^2 + N_s^2) / 2, with the sup-norm lattice distance.
    """
    w = interaction(model, cfg_a, cfg_b)
    if math.isinf(w):
        return math.inf
    occ_a = cell_occupancies(cfg_a)
    occ_b = cell_occupancies(cfg_b)
    bound = 0.0
    for (ra, ca), na in occ_a.items():
        for (rb, cb), nb in occ_b.items():
            dist = max(abs(ra - rb), abs(ca - cb))
            psi = float(model.lower_reg_psi(np.array([dist]))[0])
            bound -= psi * 0.5 * (na * na + nb * nb)
    return w - bound


def tail_constant(model: PairPotentialModel, radius: float) -> float:
    """Upper quadrature estimate of the integral of |J| outside the radius."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    upper = model.j_support
    if not math.isfinite(upper):
        # integrate to where the envelope makes the remainder negligible,
        # then add the envelope tail as a rigorous remainder bound
        upper = max(radius + 1.0, envelope_radius(model.envelope, 1e-16))
    if upper <= radius:
        return 0.0
    val, err = quad(lambda t: abs(float(model.j_many(np.array([t]))[0])) * SUP_NORM_PERIMETER * t,
                    radius, upper, epsabs=QUAD_TOL, limit=400)
    remainder = 0.0
    if not math.isfinite(model.j_support):
        # |J| <= psi, so the dropped mass beyond `upper` is at most the
        # envelope's first-moment tail 8 (psi_s - integral_0^upper psi t dt)
        head, herr = quad(lambda t: float(model.envelope.psi(np.array([t]))[0]) * t,
                          0.0, upper, epsabs=QUAD_TOL, limit=400)
        remainder = SUP_NORM_PERIMETER * max(0.0, model.envelope.psi_s - head + abs(herr))
    return float(val + abs(err) + remainder)


def envelope_radius(env: PsiEnvelope, tol: float) -> float:
    """Smallest radius (by bisection) where the decreasing envelope is <= tol."""
    lo, hi = 0.0, 1.0
    while float(env.psi(np.array([hi]))[0]) > tol and hi < 1e6:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(env.psi(np.array([mid]))[0]) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def coupling_budget(j_profile, env: PsiEnvelope, r_max: float) -> float:
    """Quadrature upper estimate of 1 + psi(0) + integral J(x)(1 + |x|^2) dx."""
    val, err = quad(lambda t: abs(float(j_profile(np.array([t]))[0])) * (1.0 + t * t)
                    * SUP_NORM_PERIMETER * t, 0.0, r_max, epsabs=QUAD_TOL, limit=400)
    psi0 = float(env.psi(np.array([0.0]))[0])
    return 1.0 + psi0 + float(val) + abs(err) + 1e-9


# ---------------------------------------------------------------------------
# Bundled models


def _hardcore_profile(radius: float):
    def k(r):
        r = np.asarray(r, dtype=float)
        return np.where(r < radius, math.inf, 0.0)

    return k


def _zero_profile(r):
    return np.zeros_like(np.asarray(r, dtype=float))


def _superstability_constants(j0: float, hardcore_radius: float) -> tuple[float, float]:
    """Shipped (A, B) for a Gaussian coupling with a hard core.

    At most ceil(1/r_hc)^2 particles fit in a unit cell, and the total
    attraction per cell pair is controlled by the lattice sum of the
    worst-case Gaussian weight; any (A, B) with B >= A n_max + j0 c_lat
    n_max / 2 then certifies the bound for all admissible occupancies.
    """
    n_max = math.ceil(1.0 / hardcore_radius) ** 2
    c_lat = 0.0
    for dx in range(-8, 9):
        for dy in range(-8, 9):
            d = max(abs(dx), abs(dy))
            c_lat += math.exp(-max(0.0, d - 1.0) ** 2)
    a = 0.05
    b = math.ceil(a * n_max + j0 * c_lat * n_max / 2.0)
    return a, float(b)


def reference_model(j0: float = 1.0, hardcore_radius: float = 0.2) -> PairPotentialModel:
    """Gaussian coupling, cosine spin interaction, hard core.

    J(r) = j0 exp(-r^2), V(s) = -cos(s), K = +inf inside the core else 0.
    The envelope j0 (1 + r^2) exp(-r^2) matches |J|(1 + r^2) exactly and is
    decreasing.
    """
    if j0 <= 0:
        raise ValueError("j0 must be positive")
    if not (0 < hardcore_radius < 0.5):
        raise ValueError("hardcore radius must be in (0, 0.5)")

    def j(r):
        r = np.asarray(r, dtype=float)
        return j0 * np.exp(-r * r)

    def psi(r):
        r = np.asarray(r, dtype=float)
        return j0 * (1.0 + r * r) * np.exp(-r * r)

    # integral of psi(r) r dr = j0 * (1/2 + 1/2) = j0, exactly
    env = PsiEnvelope(psi=psi, psi_s=j0 * 1.0)
    r_quad = envelope_radius(env, 1e-16)
    c_j = coupling_budget(j, env, r_quad)
    a, b = _superstability_constants(j0, hardcore_radius)

    def lr_psi(k):
        k = np.asarray(k, dtype=float)
        return j0 * np.exp(-np.maximum(0.0, k - 1.0) ** 2)

    rng = envelope_radius(env, 1e-12)
    return PairPotentialModel(
        name="reference-xy",
        j_profile=j,
        k_profile=_hardcore_profile(hardcore_radius),
        spin_coupling=TrigPolySpin({1: -1.0}),
        envelope=env,
        c_j=c_j,
        superstability_a=a,
        superstability_b=b,
        lower_reg_psi=lr_psi,
        hardcore_radius=hardcore_radius,
        interaction_range=max(rng, 3.0 * hardcore_radius, 1.0),
        j_support=math.inf,
    )


def ideal_gas_model() -> PairPotentialModel:
    """Non-interacting model: J = K = 0, V = 0.

    The shipped diagnostic constants (A, B) = (0.01, 10) certify the cell
    bound only up to occupancy B/A = 1000 per unit cell, far beyond any
    desk-scale draw.
    """
    return PairPotentialModel(
        name="ideal-gas",
        j_profile=_zero_profile,
        k_profile=_zero_profile,
        spin_coupling=TrigPolySpin({}),
        envelope=zero_envelope(),
        c_j=1.0,
        superstability_a=0.01,
        superstability_b=10.0,
        lower_reg_psi=_zero_profile,
        hardcore_radius=0.0,
        interaction_range=1.0,
        j_support=0.0,
    )


# ---------------------------------------------------------------------------
# Model description files


def _parse_keyvalue(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"expected 'key = value' line, got {raw!r}")
            key, val = line.split("=", 1)
            out[key.strip()] = val.strip()
    return out


def _load_table(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"expected two columns in {path}")
    return data[:, 0], data[:, 1]


def load_model(path) -> PairPotentialModel:
    """Load a model description file.

    Recognized keys: ``model.kind`` (``xy`` or ``custom-table``),
    ``model.j0``, ``model.hardcore_radius``, ``model.j_table`` and
    ``model.v_table`` (CSV paths with (radius, value) and (angle, value)
    rows, linearly interpolated).
    """
    import os

    kv = _parse_keyvalue(path)
    kind = kv.get("model.kind", "xy")
    if kind == "xy":
        return reference_model(
            j0=float(kv.get("model.j0", "1.0")),
            hardcore_radius=float(kv.get("model.hardcore_radius", "0.2")),
        )
    if kind != "custom-table":
        raise ValueError(f"unknown model.kind {kind!r}")

    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    radii, jvals = _load_table(resolve(kv["model.j_table"]))
    angles, vvals = _load_table(resolve(kv["model.v_table"]))
    if radii[0] != 0.0:
        raise ValueError("J table must start at radius 0")
    r_support = float(radii[-1])

    def j(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= r_support, np.interp(r, radii, jvals), 0.0)

    # decreasing envelope: running max of |J|(1+r^2) from the right
    dense = np.linspace(0.0, r_support, 4096)
    pointwise = np.abs(j(dense)) * (1.0 + dense**2)
    env_vals = np.maximum.accumulate(pointwise[::-1])[::-1]

    def psi(r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= r_support, np.interp(r, dense, env_vals), 0.0)

    psi_s = float(np.trapezoid(env_vals * dense, dense)) + 1e-9
    env = PsiEnvelope(psi=psi, psi_s=psi_s)
    hardcore = float(kv.get("model.hardcore_radius", "0.0"))
    k_prof = _hardcore_profile(hardcore) if hardcore > 0 else _zero_profile
    c_j = coupling_budget(j, env, r_support)
    if "model.superstability_a" in kv:
        a = float(kv["model.superstability_a"])
        b = float(kv["model.superstability_b"])
    elif hardcore > 0:
        n_max = math.ceil(1.0 / hardcore) ** 2
        peak = float(np.max(np.abs(jvals)))
        vmax = float(np.max(np.abs(vvals))) if len(vvals) else 0.0
        # worst-case attraction per neighbor cell within the support radius
        cells = (2 * math.ceil(r_support) + 1) ** 2
        a = 0.05
        b = math.ceil(a * n_max + peak * vmax * cells * n_max / 2.0)
    else:
        a, b = 0.01, 10.0

    def lr_psi(k):
        k = np.asarray(k, dtype=float)
        return psi(np.maximum(0.0, k - 1.0))

    return PairPotentialModel(
        name=kv.get("model.name", "custom-table"),
        j_profile=j,
        k_profile=k_prof,
        spin_coupling=TabulatedSpin(angles, vvals),
        envelope=env,
        c_j=c_j,
        superstability_a=a,
        superstability_b=float(b),
        lower_reg_psi=lr_psi,
        hardcore_radius=hardcore,
        interaction_range=max(r_support, 3.0 * hardcore, 1.0),
        j_support=r_support,
    )
