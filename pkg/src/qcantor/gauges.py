"""Ball gauges, regularity classes, h-contents and Frostman measures.

A gauge assigns every ball B(x, t) a density eps(B) >= 0 and the set
function h(B) = t^gamma * eps(B).  The smoothed density of a measure,

    eps_mu_a(x, t) = (1/t) * sum_i w_i * psi_a((y_i - x) / t),
    psi_a(u) = 1 / (|u|^(1+a) + 1),

is the mollified version of mu(B)/t: it keeps the doubling bound
eps(x, 2t) <= 2^a * eps(x, t) pointwise, which plain ball densities lack.

Contents restrict coverings to tree-aligned balls: the exact optimum over
every antichain of nodes is a bottom-up dynamic program, and the matching
Frostman measure is the tree max-flow, which equals the min-cut (= the DP
value) exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cantor import SOURCE, TARGET, _check_side
from .potentials import _diagnose, conjugate_minus_one, wolff_dyadic

LN2 = math.log(2.0)


def psi_a(x, a):
    """Radial kernel 1/(|x|^(1+a) + 1); accepts radii or (n, 2) points."""
    if a <= 0:
        raise ValueError("kernel parameter a must be positive")
    x = np.asarray(x, dtype=float)
    r = np.hypot(x[..., 0], x[..., 1]) if x.ndim >= 1 and x.shape[-1] == 2 else np.abs(x)
    return 1.0 / (r ** (1.0 + a) + 1.0)


def eps_mu_a(measure, x, t, a) -> float:
    """Smoothed density of a planar measure on B(x, t)."""
    if not (t > 0.0):
        raise ValueError("radius t must be positive")
    d = measure.distances(x)
    return float(np.sum(measure.weights * psi_a(d / t, a)) / t)


def h_mu_a(measure, x, t, a) -> float:
    return t * eps_mu_a(measure, x, t, a)


# -- gauge objects -----------------------------------------------------------


class ConstantGauge:
    """eps identically equal to a constant."""

    def __init__(self, value=1.0, gamma=1.0):
        self.value = float(value)
        self.gamma = float(gamma)
        self.description = f"constant({value})"

    def eps(self, x, r):
        return self.value

    def h(self, x, r):
        return r ** self.gamma * self.eps(x, r)


class RadialGauge:
    """eps depending on the radius only, supplied as a function of log r.

    gamma_tag "qc" marks the exponent gamma = 2/(K+1) symbolically so that
    generation sums can cancel the radius products exactly in log space.
    """

    def __init__(self, eps_log_fn, gamma=1.0, gamma_tag=None, description="radial"):
        self.eps_log_fn = eps_log_fn
        self.gamma = float(gamma)
        self.gamma_tag = gamma_tag
        self.description = description

    def eps(self, x, r):
        return float(self.eps_log_fn(math.log(r)))

    def eps_log(self, log_r):
        return float(self.eps_log_fn(log_r))

    def h(self, x, r):
        return r ** self.gamma * self.eps(x, r)


def qc_radial_gauge(K, eps_log_fn, description="radial"):
    """Radial gauge with the distortion exponent gamma = 2/(K+1)."""
    return RadialGauge(eps_log_fn, gamma=2.0 / (K + 1.0), gamma_tag="qc",
                       description=description)


def log_power_eps(beta):
    """eps(r) = log(1/r)^(-beta), defined for r < 1."""

    def fn(log_r):
        if log_r >= 0:
            raise ValueError("log-power gauge needs r < 1")
        return (-log_r) ** (-beta) if beta != 0.0 else 1.0

    return fn


class SmoothedDensityGauge:
    """eps = eps_mu_a of a fixed measure; the canonical member of G1."""

    def __init__(self, measure, a, gamma=1.0):
        self.measure = measure
        self.a = float(a)
        self.gamma = float(gamma)
        self.description = f"eps_mu_a(a={a})"

    def eps(self, x, r):
        return eps_mu_a(self.measure, x, r, self.a)

    def h(self, x, r):
        return r ** self.gamma * self.eps(x, r)


class TreeSmoothedDensityGauge:
    """eps_mu_a of a realized side, evaluated on that side's node balls.

    Uses the realization's ancestor-relative frames, so values stay exact at
    depths where absolute coordinates would have collapsed.
    """

    def __init__(self, realization, a, side=SOURCE, gamma=1.0):
        _check_side(side)
        self.realization = realization
        self.a = float(a)
        self.side = side
        self.gamma = float(gamma)
        self.description = f"tree_eps_mu_a(a={a},side={side})"

    def eps_node(self, path):
        return self.realization.node_eps(self.side, path, self.a)

    def h_node(self, path):
        r = math.exp(self.realization.tree.log_radius(self.side, len(path)))
        return r ** self.gamma * self.eps_node(path)


class DistortedTreeGauge:
    """Gauge on target node balls pulled back through the tree correspondence.

    eps(target ball of node) = eps_mu_a(source ball of the same node)^(2K/(K+1)),
    h = t^(2/(K+1)) * eps.  The correspondence is known exactly only on tree
    balls; any other ball query raises.
    """

    def __init__(self, realization, a):
        self.realization = realization
        self.a = float(a)
        K = realization.tree.K
        self.K = K
        self.gamma = 2.0 / (K + 1.0)
        self.exponent = 2.0 * K / (K + 1.0)
        self.description = f"distorted(a={a},K={K})"

    def eps_node(self, path):
        return self.realization.node_eps(SOURCE, path, self.a) ** self.exponent

    def h_node(self, path):
        t = math.exp(self.realization.tree.log_radius(TARGET, len(path)))
        return t ** self.gamma * self.eps_node(path)

    def eps(self, x, r):
        raise ValueError(
            "the inverse correspondence is known only on tree balls; "
            "use eps_node(path)")


def distorted_gauge(realization, a) -> DistortedTreeGauge:
    return DistortedTreeGauge(realization, a)


class TableGauge:
    """Explicit per-node h values keyed by path; for hand-set gauges."""

    def __init__(self, table, description="table"):
        self.table = {tuple(k): float(v) for k, v in table.items()}
        self.description = description

    def h_node(self, path):
        return self.table[tuple(path)]


# -- regularity classes ------------------------------------------------------


@dataclass(frozen=True)
class DoublingReport:
    """Empirical comparability (G1) and summability (G2) constants."""

    c0: float | None
    c0_prime: float | None
    pairs: int
    truncation_k: int | None = None
    threshold: float | None = None
    passed: bool | None = None
    notes: str = field(default="", compare=False)

    def to_json_dict(self):
        return {"C0": self.c0, "C0_prime": self.c0_prime, "pairs": self.pairs,
                "truncation_k": self.truncation_k, "threshold": self.threshold,
                "passed": self.passed}


def sample_ball_pairs(center, spread, n, seed, log_r_range=(-8.0, 0.0)):
    """Admissible comparability pairs: |x - y| <= 2r and r/2 <= s <= 2r."""
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=float)
    pairs = []
    for _ in range(n):
        x = center + spread * rng.uniform(-1.0, 1.0, size=2)
        r = math.exp(rng.uniform(*log_r_range))
        phi = rng.uniform(0.0, 2.0 * np.pi)
        rad = rng.uniform(0.0, 2.0 * r)
        y = x + rad * np.array([math.cos(phi), math.sin(phi)])
        s = r * rng.uniform(0.5, 2.0)
        pairs.append(((x, r), (y, s)))
    return pairs


def check_G1(gauge, pairs, threshold=None) -> DoublingReport:
    """Empirical C0 with C0^-1 eps(x,r) <= eps(y,s) <= C0 eps(x,r)."""
    worst = 1.0
    for (x, r), (y, s) in pairs:
        e1 = gauge.eps(x, r)
        e2 = gauge.eps(y, s)
        if e1 <= 0.0 or e2 <= 0.0:
            if e1 != e2:
                return DoublingReport(math.inf, None, len(pairs), threshold=threshold,
                                      passed=False if threshold else None,
                                      notes="vanishing density on one ball only")
            continue
        worst = max(worst, e1 / e2, e2 / e1)
    passed = None if threshold is None else worst <= threshold
    return DoublingReport(worst, None, len(pairs), threshold=threshold, passed=passed)


def check_G2(gauge, balls, swallow_radius, threshold=None) -> DoublingReport:
    """Empirical C0' with sum_k 2^-k eps(x, 2^k r) <= C0' eps(x, r).

    The sum is truncated two scales past the radius that swallows the
    support, where terms of mass-type gauges have stabilized; a geometric
    bound on the remainder (ratio 1/2 per scale) is added.
    """
    worst = 0.0
    k_used = 0
    for (x, r) in balls:
        k_trunc = max(1, int(math.ceil(math.log2(max(swallow_radius / r, 1.0)))) + 2)
        k_used = max(k_used, k_trunc)
        total = 0.0
        last = 0.0
        for k in range(k_trunc + 1):
            last = 2.0 ** (-k) * gauge.eps(x, (2.0 ** k) * r)
            total += last
        total += last  # geometric remainder bound: sum_{j>k} <= last
        base = gauge.eps(x, r)
        if base <= 0.0:
            return DoublingReport(None, math.inf, len(balls), truncation_k=k_used,
                                  threshold=threshold,
                                  passed=False if threshold else None,
                                  notes="vanishing density at base scale")
        worst = max(worst, total / base)
    passed = None if threshold is None else worst <= threshold
    return DoublingReport(None, worst, len(balls), truncation_k=k_used,
                          threshold=threshold, passed=passed)


def check_G2_tree_gauge(gauge, paths, threshold=None) -> DoublingReport:
    """G2 proxy for node-keyed gauges along ancestor chains.

    Tree balls admit no true dilations; the ancestor ball of radius ratio
    rho_g stands in for the dilate 2^k r with 2^k ~ rho_g, weighted
    accordingly.  Only this chain is checkable for the distorted gauge.
    """
    real = gauge.realization
    tree = real.tree
    side = TARGET if isinstance(gauge, DistortedTreeGauge) else gauge.side
    worst = 0.0
    for path in paths:
        d = len(path)
        log_r = tree.log_radius(side, d)
        base = gauge.eps_node(path)
        if base <= 0.0:
            continue
        total = 0.0
        for g in range(d, -1, -1):
            ratio = math.exp(tree.log_radius(side, g) - log_r)  # ~ 2^k
            total += gauge.eps_node(path[:g]) / ratio
        worst = max(worst, total / base)
    passed = None if threshold is None else worst <= threshold
    return DoublingReport(None, worst, len(paths), truncation_k=None,
                          threshold=threshold, passed=passed,
                          notes="ancestor-chain proxy for tree-aligned balls")


@dataclass(frozen=True)
class EpsIntegralResult:
    dyadic_sum: float
    wolff_total: float
    ratio: float
    divergent_eps: bool
    divergent_wolff: bool


def eps_integral_check(measure, x, a, p, k_min, k_max) -> EpsIntegralResult:
    """Dyadic sum of eps_mu_a(x, 2^k)^(p'-1) against the Wolff sum at (1/p, p).

    The smoothed-density integral is dominated by the Wolff potential; the
    ratio and both divergence flags are returned for inspection.
    """
    if measure.n_atoms == 0:
        return EpsIntegralResult(0.0, 0.0, 0.0, False, False)
    eta = conjugate_minus_one(p)
    ks = np.arange(k_max, k_min - 1, -1)
    terms = np.array([eps_mu_a(measure, x, 2.0 ** float(k), a) ** eta for k in ks])
    div_eps, _ = _diagnose(list(ks), terms, "dyadic")
    wolff = wolff_dyadic(measure, x, 1.0 / p, p, k_min, k_max, sub_scale_tail=False)
    total = float(np.sum(terms))
    ratio = total / wolff.total if wolff.total > 0 else math.inf
    return EpsIntegralResult(total, wolff.total, ratio, div_eps, wolff.divergent)


def geometric_kernel_sum_constant(a, b, radii=None) -> float:
    """Empirical constant C with sum_k 2^(-bk) psi-type term <= C/(|z|^m + 1),
    m = min(a, b).  The constant blows up as a -> b, which is excluded."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if a == b:
        raise ValueError("a == b is excluded")
    m = min(a, b)
    if radii is None:
        radii = np.concatenate([[0.0], np.power(2.0, np.arange(-12.0, 24.0, 0.25))])
    worst = 0.0
    for z in np.asarray(radii, dtype=float):
        k_top = int(math.ceil((64.0 + a * math.log2(1.0 + z)) / b)) + 4
        k = np.arange(k_top + 1, dtype=float)
        lhs = float(np.sum(2.0 ** (-b * k) / ((2.0 ** (-k) * z) ** a + 1.0)))
        worst = max(worst, lhs * (z ** m + 1.0))
    return worst


# -- h-contents on trees -----------------------------------------------------


@dataclass(frozen=True)
class ContentResult:
    """Tree-aligned h-content: exact optimum over antichain covers."""

    value: float
    cover: tuple
    gauge: str


def _node_h_values(tree, side, gauge, depth, realization):
    """Per-generation arrays of h over all nodes, for any supported gauge."""
    values = []
    for g in range(depth + 1):
        count = tree.n_nodes(g)
        if isinstance(gauge, (ConstantGauge, RadialGauge)):
            r = math.exp(tree.log_radius(side, g))
            values.append(np.full(count, gauge.h(None, r)))
        elif hasattr(gauge, "h_node"):
            vals = np.empty(count)
            for i, path in enumerate(tree.paths_at(g)):
                vals[i] = gauge.h_node(path)
            values.append(vals)
        elif isinstance(gauge, SmoothedDensityGauge):
            if realization is None:
                raise ValueError("ball gauges on trees need realized centers")
            r = math.exp(tree.log_radius(side, g))
            vals = np.empty(count)
            for i, path in enumerate(tree.paths_at(g)):
                vals[i] = gauge.h(realization.node_center(side, path), r)
            values.append(vals)
        else:
            raise TypeError(f"unsupported gauge {gauge!r}")
    return values


def content_Mh_tree(tree, side, gauge, depth=None, realization=None) -> ContentResult:
    """min over antichain covers of sum h(node ball), by bottom-up DP.

    cost(node) = min(h(node), sum over children of cost); an upper bound for
    the unrestricted content and exact among tree-aligned covers.
    """
    _check_side(side)
    depth = tree.depth if depth is None else depth
    if realization is None:
        realization = tree._realization
    h = _node_h_values(tree, side, gauge, depth, realization)
    cost = h[depth].copy()
    take = [None] * (depth + 1)
    take[depth] = np.ones(len(cost), dtype=bool)
    for g in range(depth - 1, -1, -1):
        m = tree.branching(g + 1)
        child_sum = cost.reshape(-1, m).sum(axis=1)
        take[g] = h[g] <= child_sum
        cost = np.where(take[g], h[g], child_sum)
    cover = []

    def walk(g, i, path):
        if take[g][i]:
            cover.append(path)
            return
        m = tree.branching(g + 1)
        for j in range(m):
            walk(g + 1, i * m + j, path + (j,))

    walk(0, 0, ())
    return ContentResult(float(cost[0]), tuple(cover),
                         getattr(gauge, "description", repr(gauge)))


@dataclass(frozen=True)
class FrostmanResult:
    """Max-flow leaf allocation: nu(subtree) <= h(node) for every node."""

    leaf_weights: np.ndarray
    value: float
    content_value: float

    def as_measure(self, realization, side):
        from .measure import PlanarMeasure
        return PlanarMeasure(realization.leaf_centers(side), self.leaf_weights)


def frostman_tree(tree, side, gauge, depth=None, realization=None) -> FrostmanResult:
    """Leaf masses maximizing the total subject to every node's h-constraint.

    On a tree the max flow equals the min cut, i.e. the content DP value,
    so nu(F) matches M^h exactly within the tree-aligned class.
    """
    _check_side(side)
    depth = tree.depth if depth is None else depth
    if realization is None:
        realization = tree._realization
    h = _node_h_values(tree, side, gauge, depth, realization)
    flow = [None] * (depth + 1)
    flow[depth] = h[depth].copy()
    for g in range(depth - 1, -1, -1):
        m = tree.branching(g + 1)
        flow[g] = np.minimum(h[g], flow[g + 1].reshape(-1, m).sum(axis=1))
    alloc = np.array([flow[0][0]])
    for g in range(1, depth + 1):
        m = tree.branching(g)
        child = flow[g].reshape(-1, m)
        denom = child.sum(axis=1)
        share = np.where(denom[:, None] > 0, child / np.where(denom[:, None] > 0,
                                                              denom[:, None], 1.0), 0.0)
        alloc = (alloc[:, None] * share).ravel()
    content = content_Mh_tree(tree, side, gauge, depth=depth, realization=realization)
    # the flow value is the min cut, bitwise equal to the DP; the proportional
    # leaf split re-sums to it only up to rounding
    return FrostmanResult(alloc, float(flow[0][0]), content.value)


def generation_cover_sum(tree, side, gauge, generation) -> float:
    """Ideal-convention sum of h over one generation's balls.

    In the fully filled construction the level masses sum to 1, so for the
    distortion exponent gamma = 2/(K+1) on the source side the radius
    products cancel exactly and the sum telescopes to
    eps(r_N) * prod(d_k)^(2K/(K+1)); the gamma = 1 target analogue
    telescopes to eps(r_N) * prod(d_k).  Those two cancellations are done
    symbolically (no catastrophic log-space subtraction), anything else by
    the direct formula.
    """
    _check_side(side)
    if not isinstance(gauge, (RadialGauge, ConstantGauge)):
        raise TypeError("generation sums are defined for radial gauges")
    log_r = tree.log_radius(side, generation)
    eps = gauge.eps_log(log_r) if isinstance(gauge, RadialGauge) else gauge.value
    K = tree.K
    log_d = float(tree.cum_log_d[generation])
    tag = getattr(gauge, "gamma_tag", None)
    if side == SOURCE and tag == "qc":
        return eps * math.exp((2.0 * K / (K + 1.0)) * log_d)
    if side == TARGET and gauge.gamma == 1.0:
        return eps * math.exp(log_d)
    log_sum = gauge.gamma * log_r - float(tree.cum_log_mass[generation])
    return eps * math.exp(log_sum)
