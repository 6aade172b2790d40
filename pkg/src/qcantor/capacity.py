"""Riesz capacity estimators and the distortion index algebra.

Two normalization conventions coexist and are recorded on every estimate:
"wolff_sup" estimates sup{mu(F) : W(x) <= 1} (mass after renormalizing the
potential sup to 1), while "definition" estimates sup mu(F)^p over measures
with ||I_alpha(mu)||_{p'} <= 1.  Cross-estimator comparisons take the p-th
root of definitional values (``wolff_scale``) so conventions never mix
silently.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cantor import CantorTree
from .measure import PlanarMeasure
from .potentials import (IndexDomainError, check_indices, conjugate_minus_one,
                         wolff_dyadic, wolff_tree)

LOWER_BOUND = "lower_bound"
COMPARABILITY = "comparability_proxy"
WOLFF_SUP = "wolff_sup"
DEFINITION = "definition"


@dataclass(frozen=True)
class CapacityIndices:
    """Indices (alpha, p) with 0 < alpha*p < 2 and p > 1."""

    alpha: float
    p: float
    K: float | None = None

    def __post_init__(self):
        check_indices(self.alpha, self.p)

    @property
    def p_prime(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def conjugate_minus_one(self) -> float:
        """p' - 1 = 1/(p - 1), the outer exponent of the Wolff integrand."""
        return conjugate_minus_one(self.p)

    @property
    def homogeneity(self) -> float:
        """Scaling degree 2 - alpha*p of the capacity."""
        return 2.0 - self.alpha * self.p


def distortion_indices(K) -> CapacityIndices:
    """(2K/(2K+1), (2K+1)/(K+1)): the source-side indices paired with
    analytic capacity on the distorted side; homogeneity 2/(K+1)."""
    if not (K >= 1.0):
        raise IndexDomainError(f"distortion K must be >= 1, got {K}")
    return CapacityIndices(2.0 * K / (2.0 * K + 1.0), (2.0 * K + 1.0) / (K + 1.0), K=K)


@dataclass(frozen=True)
class DistortedIndices:
    """Index algebra mapping target-side (alpha, p) to source-side (beta, q).

    t = 2 - alpha*p is the target homogeneity, t' = 2t/(2K - K*t + t) the
    source one; the identity 2 - beta*q = t' holds for all inputs.
    """

    alpha: float
    p: float
    K: float
    t: float
    t_prime: float
    beta: float
    q: float

    @property
    def image(self) -> CapacityIndices:
        return CapacityIndices(self.beta, self.q, K=self.K)


def distorted_index_map(alpha, p, K) -> DistortedIndices:
    check_indices(alpha, p)
    if not (K >= 1.0):
        raise IndexDomainError(f"distortion K must be >= 1, got {K}")
    t = 2.0 - alpha * p
    denom = 2.0 * K - K * t + t
    t_prime = 2.0 * t / denom
    num = 2.0 * K * p * t - 3.0 * K * t + 2.0 * K + t
    beta = (4.0 * K - 2.0 * K * t) / num
    q = num / denom
    return DistortedIndices(alpha, p, K, t, t_prime, beta, q)


@dataclass(frozen=True)
class CapacityEstimate:
    """A capacity value with its direction, indices and normalization record."""

    value: float
    direction: str
    convention: str
    indices: CapacityIndices | None
    normalization: dict
    kind: str = "riesz"

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("capacity estimates are nonnegative")
        if self.direction == LOWER_BOUND and not self.normalization:
            raise ValueError("lower bounds must record their normalization")

    def wolff_scale(self) -> float:
        """Value in the wolff_sup convention (p-th root of definitional)."""
        if self.convention == WOLFF_SUP or self.indices is None:
            return self.value
        return self.value ** (1.0 / self.indices.p)

    def to_json_dict(self):
        d = {"value": self.value, "direction": self.direction,
             "convention": self.convention, "kind": self.kind,
             "normalization": self.normalization}
        if self.indices is not None:
            d["alpha"] = self.indices.alpha
            d["p"] = self.indices.p
            d["homogeneity"] = self.indices.homogeneity
        return d


def wolff_capacity_lower(obj, indices, *, side=None, depth=None,
                         mass_convention="ideal", query_points=None,
                         k_range=None, seed=0, query_set_id=None) -> CapacityEstimate:
    """mass * S^(-1/(p'-1)) where S is the Wolff sup over the query set.

    The mass scaling law W(c*mu) = c^(p'-1) W(mu) makes the measure with
    potential sup exactly 1 a rescale of mu, so this is the admissible-mass
    lower estimate in the wolff_sup convention.  On a CantorTree the sup over
    paths is the exact tree sum (path independent); depth-0 trees fall back
    to the closed-form single-ball term.  A divergent potential yields value
    0 with the divergence rate recorded.
    """
    eta = indices.conjugate_minus_one
    if isinstance(obj, CantorTree):
        if side is None:
            raise ValueError("side required for tree estimates")
        depth = obj.depth if depth is None else depth
        mass = math.exp(obj.log_total_mass(mass_convention))
        if depth == 0:
            # uniform unit ball: area law below the radius, constant mass above
            homog = indices.homogeneity
            log_ball = obj.log_mass(0, mass_convention) - homog * math.log(obj.scale)
            sup = math.exp(eta * log_ball) * (1.0 / ((2.0 - homog) * eta)
                                              + 1.0 / (homog * eta))
            record = {"sup": sup, "query_set": "root_ball_closed_form",
                      "seed": seed, "mass": mass, "mass_convention": mass_convention}
            return CapacityEstimate(mass * sup ** (-1.0 / eta), LOWER_BOUND, WOLFF_SUP,
                                    indices, record)
        profile = wolff_tree(obj, side, indices.alpha, indices.p, depth=depth,
                             mass_convention=mass_convention)
        sup = profile.total
        record = {"sup": sup, "query_set": f"tree_paths:{side}:depth={depth}",
                  "seed": seed, "mass": mass, "mass_convention": mass_convention}
        if profile.divergent:
            record["divergence_rate"] = profile.divergence_rate
            return CapacityEstimate(0.0, LOWER_BOUND, WOLFF_SUP, indices, record)
        return CapacityEstimate(mass * sup ** (-1.0 / eta), LOWER_BOUND, WOLFF_SUP,
                                indices, record)

    if not isinstance(obj, PlanarMeasure):
        raise TypeError("expected a CantorTree or PlanarMeasure")
    if query_points is None or k_range is None:
        raise ValueError("measure estimates need query_points and k_range")
    k_min, k_max = k_range
    sup, rate, divergent = 0.0, None, False
    for x in np.asarray(query_points, dtype=float):
        prof = wolff_dyadic(obj, x, indices.alpha, indices.p, k_min, k_max)
        sup = max(sup, prof.total)
        if prof.divergent:
            divergent = True
            rate = prof.divergence_rate
    record = {"sup": sup, "query_set": query_set_id or f"points[{len(query_points)}]",
              "seed": seed, "mass": obj.total_mass, "k_range": [k_min, k_max]}
    if divergent:
        record["divergence_rate"] = rate
        return CapacityEstimate(0.0, LOWER_BOUND, WOLFF_SUP, indices, record)
    value = obj.total_mass * sup ** (-1.0 / eta) if sup > 0 else 0.0
    return CapacityEstimate(value, LOWER_BOUND, WOLFF_SUP, indices, record)


def direct_capacity_lower(measure, indices, cells=64, farfield_factor=4.0) -> CapacityEstimate:
    """(mass / ||I_alpha(mu)||_{p'})^p by planar quadrature.

    The L^{p'} norm is a cell sum over a support-relative grid (so geometric
    scaling is exact) plus a closed-form far-field tail using
    I_alpha(mu)(x) <= mass / (|x - c| - diam)^{2 - alpha} beyond
    farfield_factor * diam.  Cells near an atom use the equal-area disk
    average of the kernel, so no infinities propagate.
    """
    alpha, p = indices.alpha, indices.p
    p_prime = indices.p_prime
    m = measure.total_mass
    if m == 0.0:
        return CapacityEstimate(0.0, LOWER_BOUND, DEFINITION, indices,
                                {"lambda": 0.0, "cells": cells, "note": "zero measure"})
    diam = measure.diameter()
    if diam == 0.0:
        diam = 1e-9  # single atom: pick a nominal support size
    center = measure.support_center()
    r_far = farfield_factor * diam
    h = 2.0 * r_far / cells
    ax = center[0] - r_far + h * (np.arange(cells) + 0.5)
    ay = center[1] - r_far + h * (np.arange(cells) + 0.5)
    gx, gy = np.meshgrid(ax, ay)
    cc = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = np.hypot(cc[:, 0] - center[0], cc[:, 1] - center[1]) <= r_far
    cc = cc[inside]
    rho = h / math.sqrt(math.pi)
    cap = 2.0 / alpha * rho ** (alpha - 2.0)
    live = measure.weights > 0
    pts, w = measure.points[live], measure.weights[live]
    vals = np.empty(cc.shape[0])
    block = 1 << 22
    step = max(1, block // max(1, pts.shape[0]))
    for i in range(0, cc.shape[0], step):
        d = np.hypot(cc[i:i + step, None, 0] - pts[None, :, 0],
                     cc[i:i + step, None, 1] - pts[None, :, 1])
        with np.errstate(divide="ignore"):
            kern = np.where(d > 0, d ** (alpha - 2.0), np.inf)
        vals[i:i + step] = np.sum(w[None, :] * np.minimum(kern, cap), axis=1)
    cell_sum = float(np.sum(vals ** p_prime)) * h * h

    a = (2.0 - alpha) * p_prime  # > 2 whenever 0 < alpha*p < 2
    u = r_far - diam
    tail = 2.0 * math.pi * m ** p_prime * (
        u ** (2.0 - a) / (a - 2.0) + diam * u ** (1.0 - a) / (a - 1.0))
    lam = (cell_sum + tail) ** (1.0 / p_prime)
    value = (m / lam) ** p
    record = {"lambda": lam, "cells": cells, "farfield_factor": farfield_factor,
              "farfield_tail": tail, "diam": diam}
    return CapacityEstimate(value, LOWER_BOUND, DEFINITION, indices, record)


def melnikov_gamma_lower(measure, curvature, growth) -> CapacityEstimate:
    """Analytic-capacity lower proxy: rescale mu until linear growth and
    pointwise curvature are both admissible, then report the mass.

    Growth scales linearly and curvature quadratically in the mass, so the
    admissible rescale is c = min(1/growth, sup_curvature^(-1/2)) and the
    value c * mass is invariant under global mass scaling.
    """
    if not (growth > 0.0) or not math.isfinite(growth):
        raise ValueError(
            "growth must be positive and finite; realize the measure at "
            "sufficient sampling density before estimating")
    sup_c2 = curvature.sup_pointwise
    if sup_c2 < 0:
        raise ValueError("curvature sup must be nonnegative")
    c = 1.0 / growth if sup_c2 == 0.0 else min(1.0 / growth, sup_c2 ** -0.5)
    record = {"growth": growth, "sup_curvature": sup_c2, "rescale": c,
              "curvature_method": getattr(curvature, "method", "")}
    return CapacityEstimate(c * measure.total_mass, LOWER_BOUND, WOLFF_SUP,
                            None, record, kind="analytic_capacity")
