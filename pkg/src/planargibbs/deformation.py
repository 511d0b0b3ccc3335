"""Tapered spin rotations that are constant on percolation clusters.

The taper profile rotates spins by a full angle inside a plateau radius and
decays to zero at the window edge along an integrated 1/(s log s) ramp, so
its slope (and hence the quadratic energy cost of the deformation) vanishes
as the window grows while the plateau keeps the test region fully rotated.
Making the field constant on bond clusters costs nothing inside clusters and
preserves the expansion weights; whether an instance is usable is decided by
two clauses: the clusters touching the test region stay inside the plateau,
and the quadratic form of the field against J stays below 2 / sup|Vbar''|.
Under those clauses the smooth part of the energy obeys a convexity
inequality between the original and the two oppositely rotated
configurations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .bonds import BondSet, ClusterDecomposition, cluster_range
from .configuration import Configuration, Window, wrap_angle
from .neighbors import window_pairs
from .potential import PairPotentialModel
from .smoothing import SmoothDecomposition

LOG_LOG_2 = math.log(math.log(2.0))


@dataclass(frozen=True)
class TaperParams:
    """Rotation angle and radii: plateau R, outer zero radius n, test radius n'."""

    tau: float
    plateau_radius: int
    outer_radius: int
    test_radius: int

    def __post_init__(self):
        if not (0.0 < self.tau < math.pi):
            raise ValueError("tau must lie in (0, pi)")
        if not (self.outer_radius > self.plateau_radius > self.test_radius >= 1):
            raise ValueError("need outer > plateau > test >= 1")
        if self.plateau_radius < 2:
            raise ValueError("plateau radius must be at least 2")


def taper_rate(s) -> np.ndarray:
    """Ramp speed: 1 up to 2, then 1 / (s log s); values in (0, 1]."""
    s = np.asarray(s, dtype=float)
    out = np.ones_like(s)
    far = s > 2.0
    sf = s[far]
    out[far] = 1.0 / (sf * np.log(sf))
    return out


def taper_rate_integral(k) -> np.ndarray:
    """Closed-form integral of the ramp speed from 0 to k.

    Equals k up to 2 and 2 + log log k - log log 2 beyond; strictly
    increasing and unbounded.
    """
    k = np.asarray(k, dtype=float)
    if np.any(k < 0):
        raise ValueError("negative upper limit")
    out = np.where(k <= 2.0, k, 0.0)
    far = k > 2.0
    if np.any(far):
        out = np.where(far, 2.0 + np.log(np.log(np.maximum(k, 2.0))) - LOG_LOG_2, out)
    return out


def taper_rate_integral_quadrature(k: float) -> float:
    """Numeric integral of the ramp speed (oracle for the closed form)."""
    if k < 0:
        raise ValueError("negative upper limit")
    val, _ = quad(lambda s: float(taper_rate(np.array([s]))[0]), 0.0, k,
                  points=[2.0] if k > 2.0 else None, limit=200)
    return float(val)


def taper_profile(s, k: float) -> np.ndarray:
    """Normalized decreasing profile: 1 for s <= 0, 0 for s >= k, and the
    remaining ramp mass fraction (Q(k) - Q(s)) / Q(k) in between."""
    if not k > 0:
        raise ValueError("profile width must be positive")
    s = np.asarray(s, dtype=float)
    qk = float(taper_rate_integral(np.array([k]))[0])
    mid = (qk - taper_rate_integral(np.clip(s, 0.0, k))) / qk
    return np.where(s <= 0.0, 1.0, np.where(s >= k, 0.0, mid))


def taper_angle(position, params: TaperParams) -> np.ndarray:
    """Rotation angle at a position: tau times the profile of |x| - R over n - R."""
    p = np.asarray(position, dtype=float)
    norms = np.max(np.abs(p.reshape(-1, 2)), axis=1)
    return taper_angle_from_norm(norms, params)


def taper_angle_from_norm(norms, params: TaperParams) -> np.ndarray:
    norms = np.asarray(norms, dtype=float)
    return params.tau * taper_profile(norms - params.plateau_radius,
                                      params.outer_radius - params.plateau_radius)


@dataclass(frozen=True)
class DeformationField:
    """Per-particle rotation angles, constant on clusters, with the witness
    particle realizing each cluster minimum."""

    angles: np.ndarray
    witness: np.ndarray

    def __len__(self) -> int:
        return self.angles.shape[0]


def cluster_taper(cfg: Configuration, decomp: ClusterDecomposition,
                  params: TaperParams) -> DeformationField:
    """Minimum of the taper angle over each cluster.

    The witness of a particle is itself when its own angle already attains
    the cluster minimum (so its norm certifies the minimum), otherwise the
    smallest-id member realizing the minimum; either way the witness norm is
    at least the particle's.
    """
    n = len(cfg)
    if decomp.labels.shape[0] != n:
        raise ValueError("cluster decomposition built over a different configuration")
    norms = cfg.norms()
    base = taper_angle_from_norm(norms, params)
    angles = np.empty(n)
    witness = np.empty(n, dtype=np.int64)
    for members in decomp.members.values():
        vals = base[members]
        low = float(np.min(vals))
        arg = int(members[int(np.argmin(vals))])  # argmin scans in id order
        for i in members:
            angles[i] = low
            witness[i] = i if base[i] == low else arg
    return DeformationField(angles=angles, witness=witness)


def dirichlet_energy(cfg: Configuration, model: PairPotentialModel, n: float,
                     field: DeformationField, cutoff: float | None = None) -> float:
    """Quadratic cost of a rotation field across the window bond candidates:
    sum of J(x - x') (theta(x) - theta(x'))^2 over pairs with an endpoint in
    [-n, n)^2 and nonzero J."""
    if len(field) != len(cfg):
        raise ValueError("field must cover every particle")
    total = 0.0
    for ii, jj, d in window_pairs(cfg.positions, n, cutoff):
        dtheta = field.angles[ii] - field.angles[jj]
        total += float(np.sum(model.j_many(d) * dtheta * dtheta))
    return total


@dataclass(frozen=True)
class GoodSetVerdict:
    range_ok: bool
    energy_ok: bool
    cluster_reach: float
    energy_value: float
    energy_threshold: float

    @property
    def is_good(self) -> bool:
        return self.range_ok and self.energy_ok


def good_set_verdict(cfg: Configuration, model: PairPotentialModel,
                     decomp: SmoothDecomposition, bondset: BondSet,
                     params: TaperParams,
                     clustering: ClusterDecomposition | None = None,
                     cutoff: float | None = None) -> GoodSetVerdict:
    """Evaluate both usability clauses for one sampled bond set.

    The range clause keeps every cluster touching the test window inside the
    plateau; the energy clause keeps the field's quadratic cost below
    2 / sup|Vbar''| (a flat Vbar makes it vacuous).
    """
    from .bonds import clusters as make_clusters

    if clustering is None:
        clustering = make_clusters(cfg, bondset)
    reach = cluster_range(cfg, clustering, Window(float(params.test_radius)))
    field = cluster_taper(cfg, clustering, params)
    cost = dirichlet_energy(cfg, model, float(params.outer_radius), field, cutoff=cutoff)
    threshold = decomp.curvature_threshold()
    return GoodSetVerdict(
        range_ok=bool(reach < params.plateau_radius),
        energy_ok=bool(cost < threshold),
        cluster_reach=reach,
        energy_value=cost,
        energy_threshold=threshold,
    )


def apply_deformation(cfg: Configuration, field: DeformationField,
                      direction: int) -> Configuration:
    """Shift every spin by direction * angle(x) modulo 2*pi; positions fixed."""
    if direction not in (-1, 1):
        raise ValueError("direction must be +1 or -1")
    if len(field) != len(cfg):
        raise ValueError("field must cover every particle")
    return Configuration(cfg.positions, wrap_angle(cfg.spins + direction * field.angles))


@dataclass(frozen=True)
class TaylorReport:
    """Convexity comparison of the smooth energy under the two rotations."""

    h_base: float
    h_minus: float
    h_plus: float
    margin: float
    curvature_gap: float  # (h_minus + h_plus - 2 h_base) - sup|Vbar''| * cost
    energy_cost: float
    saturated: bool


def taylor_report(cfg: Configuration, model: PairPotentialModel,
                  decomp: SmoothDecomposition, n: float, field: DeformationField,
                  cutoff: float | None = None) -> TaylorReport:
    """Evaluate the smooth-energy convexity inequality for one field.

    Compares (e/2) exp(-Hbar(rotated back)) + (e/2) exp(-Hbar(rotated
    forward)) against exp(-Hbar); all three energies run over the same
    window pair set, so the shifts isolate the smooth coupling exactly.
    A hard-core overlap saturates every weight to zero (margin 0, flagged).
    """
    if len(field) != len(cfg):
        raise ValueError("field must cover every particle")
    h0 = 0.0
    dminus = 0.0
    dplus = 0.0
    cost = 0.0
    infinite = False
    for ii, jj, d in window_pairs(cfg.positions, n, cutoff):
        k = model.k_many(d)
        if np.any(np.isinf(k)):
            infinite = True
        k = np.where(np.isinf(k), 0.0, k)
        j = model.j_many(d)
        eta = cfg.spins[ii] - cfg.spins[jj]
        theta = field.angles[ii] - field.angles[jj]
        vbar0 = decomp.vbar_eval(eta)
        h0 += float(np.sum(j * vbar0 + k))
        dminus += float(np.sum(j * (decomp.vbar_eval(eta - theta) - vbar0)))
        dplus += float(np.sum(j * (decomp.vbar_eval(eta + theta) - vbar0)))
        cost += float(np.sum(j * theta * theta))

    if infinite:
        return TaylorReport(h_base=math.inf, h_minus=math.inf, h_plus=math.inf,
                            margin=0.0, curvature_gap=0.0, energy_cost=cost,
                            saturated=True)

    bracket = (0.5 * math.e * _safe_exp(-dminus) + 0.5 * math.e * _safe_exp(-dplus) - 1.0)
    margin = _safe_exp(-h0) * bracket
    gap = (dminus + dplus) - decomp.vbar_second_sup * cost
    return TaylorReport(h_base=h0, h_minus=h0 + dminus, h_plus=h0 + dplus,
                        margin=margin, curvature_gap=gap, energy_cost=cost,
                        saturated=False)


def _safe_exp(x: float) -> float:
    # saturate instead of raising; sign information is carried by the factor
    if x > 700.0:
        return math.inf
    if x < -700.0:
        return 0.0
    return math.exp(x)


def taylor_margin(cfg: Configuration, model: PairPotentialModel,
                  decomp: SmoothDecomposition, n: float, field: DeformationField,
                  cutoff: float | None = None) -> float:
    """Left minus right side of the convexity inequality (see taylor_report)."""
    return taylor_report(cfg, model, decomp, n, field, cutoff=cutoff).margin


def taper_square_cost_bound(plateau_radius: float, outer_radius: float) -> float:
    """Area-weighted square of the ramp speed over the window, bounded in
    closed form by 8 (R + 3)^2 + 8 R Q(n - R)."""
    q_span = float(taper_rate_integral(np.array([outer_radius - plateau_radius]))[0])
    return 8.0 * (plateau_radius + 3.0) ** 2 + 8.0 * plateau_radius * q_span


def taper_square_cost_quadrature(plateau_radius: float, outer_radius: float) -> float:
    """2-D integral of taper_rate(|x| - R)^2 over the window, reduced to the
    radial line by the sup-norm area element 8 t dt."""
    kink = plateau_radius + 2.0

    def integrand(t):
        return 8.0 * t * float(taper_rate(np.array([t - plateau_radius]))[0]) ** 2

    pts = [kink] if kink < outer_radius else None
    val, _ = quad(integrand, 0.0, outer_radius, points=pts, limit=400)
    return float(val)
