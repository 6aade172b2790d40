"""Depth-sweep verification experiments with recomputable verdicts.

Every experiment emits an ExperimentReport: parameters, one row per depth
(or per gauge), declared thresholds, and a verdict computed by a pure
function of the rows alone, so a report on disk can always be re-judged.
The distortion inequalities come with unquantified constants; "ratio stable"
operationalizes them as: the empirical ratio spans less than one decade over
the depth range.  Divergence is always reported with a fitted rate.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cantor import SOURCE, TARGET, build_tree, harmonic_schedule, shrunk_schedule, \
    doubly_exponential_schedule, sharpness_schedule
from .capacity import (CapacityIndices, melnikov_gamma_lower, distorted_index_map,
                       distortion_indices, wolff_capacity_lower)
from .gauges import (TreeSmoothedDensityGauge, content_Mh_tree, distorted_gauge,
                     generation_cover_sum, qc_radial_gauge)
from .potentials import CurvatureEstimate, wolff_tree

LN2 = math.log(2.0)

#: "spans less than one decade": min ratio >= RATIO_STABILITY * max ratio
RATIO_STABILITY = 0.1


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    columns: list
    rows: list
    thresholds: dict
    verdict: str = ""
    passed: bool = False
    notes: str = field(default="")

    def finalize(self):
        self.verdict, self.passed = recompute_verdict(self.experiment, self.rows,
                                                      self.thresholds)
        return self

    def to_json(self) -> str:
        doc = {"experiment": self.experiment, "params": self.params,
               "columns": self.columns, "rows": self.rows,
               "thresholds": self.thresholds, "verdict": self.verdict,
               "passed": self.passed, "notes": self.notes}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(row[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, out_dir, stem=None):
        import os
        stem = stem or self.experiment
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}.json")
        with open(csv_path, "w", newline="") as f:
            f.write(self.to_csv())
        with open(json_path, "w", newline="") as f:
            f.write(self.to_json())
        return csv_path, json_path


# -- verdict functions (pure in the rows) ------------------------------------


def _decade_stable(values, rho):
    values = [v for v in values if math.isfinite(v)]
    if not values or min(values) <= 0.0:
        return False
    return min(values) >= rho * max(values)


def _verdict_ratio_stable(rows, thresholds):
    ratios = [r["ratio"] for r in rows]
    ok = _decade_stable(ratios, thresholds["ratio_stability"])
    span = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    return f"ratio-stable: span {span:.4g} over {len(rows)} depths", ok


def _linfit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _verdict_sharpness(rows, thresholds):
    depths = [r["depth"] for r in rows]
    src = [r["source_sum"] for r in rows]
    slope, _, r2 = _linfit(np.log(depths), src)
    ok_src = thresholds["slope_lo"] <= slope <= thresholds["slope_hi"] \
        and r2 >= thresholds["r2_min"]
    tail_frac = rows[-1]["target_tail_fraction"]
    ok_tgt = tail_frac < thresholds["target_tail_max"]
    vs = [r["capacity"] for r in rows if r["capacity"] > 0]
    ls = [math.log(math.log(d)) for d, r in zip(depths, rows) if r["capacity"] > 0]
    vslope, _, _ = _linfit(ls, np.log(vs))
    expected = -thresholds["capacity_exponent"]
    ok_cap = abs(vslope - expected) <= thresholds["capacity_exponent_tol"] * abs(expected)
    ok_bounded = _decade_stable([r["bounded_source_capacity"] for r in rows],
                                thresholds["ratio_stability"])
    verdict = (f"divergent-at-rate: source slope {slope:.4f} (R2={r2:.5f}), "
               f"target tail {tail_frac:.4g}, capacity exponent {vslope:.4f} "
               f"vs {expected:.4f}")
    return verdict, bool(ok_src and ok_tgt and ok_cap and ok_bounded)


def _verdict_gauge_criterion(rows, thresholds):
    ok = all((r["exponent"] <= 1.0) == (r["classified"] == "divergent") for r in rows)
    n_div = sum(r["classified"] == "divergent" for r in rows)
    return f"boundary-consistent: {n_div} divergent / {len(rows) - n_div} convergent", ok


def _verdict_vanishing_content(rows, thresholds):
    tol = thresholds["closed_form_rtol"]
    ok_exact = all(abs(r["unit_gauge_sum"] - r["closed_form"]) <= tol * r["closed_form"]
                   for r in rows)
    sums = [r["shrunk_gauge_sum"] for r in rows]
    ok_vanish = all(b < a for a, b in zip(sums, sums[1:])) and \
        sums[-1] <= thresholds["vanish_factor"] * sums[0]
    targets = [r["target_total"] for r in rows]
    ok_target = max(targets) <= thresholds["target_bound"] and \
        all(b >= a for a, b in zip(targets, targets[1:]))
    return (f"monotone: shrunk sums {sums[0]:.4g} -> {sums[-1]:.4g}, "
            f"target bounded by {max(targets):.6g}",
            bool(ok_exact and ok_vanish and ok_target))


def _verdict_doubly_exponential(rows, thresholds):
    # caps are hit by accumulation, so allow ulp-scale slack relative to |cap|
    ok_cap = all(r["source_log_radius"] <= r["cap_log"] + 1e-9 * (1.0 + abs(r["cap_log"]))
                 for r in rows)
    sums = [r["gauge_sum"] for r in rows]
    ok_vanish = all(b < a for a, b in zip(sums, sums[1:]))
    tol = thresholds["schedule_equality_rtol"]
    ok_eq = all(abs(r["target_total"] - r["harmonic_target_total"])
                <= tol * r["harmonic_target_total"] for r in rows)
    return (f"monotone: gauge sums {sums[0]:.4g} -> {sums[-1]:.4g}",
            bool(ok_cap and ok_vanish and ok_eq))


_VERDICTS = {
    "thm1": _verdict_ratio_stable,
    "thm2a": _verdict_ratio_stable,
    "content_ratio": _verdict_ratio_stable,
    "sharpness": _verdict_sharpness,
    "gauge_criterion": _verdict_gauge_criterion,
    "vanishing_content": _verdict_vanishing_content,
    "doubly_exponential": _verdict_doubly_exponential,
}


def recompute_verdict(experiment, rows, thresholds):
    return _VERDICTS[experiment](rows, thresholds)


# -- distortion inequality experiments ---------------------------------------


def _tree_growth(tree, side, depth) -> float:
    """sup over generations 0..depth of the ideal generation density."""
    return max(math.exp(tree.log_mass(n, "ideal") - tree.log_radius(side, n))
               for n in range(depth + 1))


def verify_gamma_distortion(K, depths, a=0.1, branching=4, seed=0) -> ExperimentReport:
    """Source capacity at the distortion indices vs the analytic-capacity
    proxy of the rearranged side, normalized by ball diameters.

    Per depth N: LHS = wolff lower estimate on the source tree at
    (2K/(2K+1), (2K+1)/(K+1)) over diam(B)^(2/(K+1)); RHS = Melnikov proxy
    (growth sup and pointwise-curvature proxy taken from ideal-convention
    tree data; the realization supplies the support and diameter record)
    over diam of the image ball; ratio = LHS / RHS^(2K/(K+1)).  Passes when
    the ratio spans less than one decade.
    """
    depths = list(depths)
    idx = distortion_indices(K)
    schedules = harmonic_schedule(K, max(depths), branching=branching)
    rows = []
    for depth in depths:
        tree = build_tree(schedules, depth, seed=seed)
        lhs_est = wolff_capacity_lower(tree, idx, side=SOURCE, seed=seed)
        diam_b = 2.0 * tree.scale
        lhs = lhs_est.value / diam_b ** (2.0 / (K + 1.0))

        real = tree.realize(seed=seed)
        mu = real.measure(TARGET)
        mu_hat = mu.weighted(1.0 / mu.total_mass)  # ideal total mass 1
        curv_proxy = wolff_tree(tree, TARGET, 2.0 / 3.0, 1.5, depth=depth,
                                homogeneity=1.0).total
        growth = _tree_growth(tree, TARGET, depth)
        curv = CurvatureEstimate(curv_proxy, 0.0, curv_proxy, 0, seed,
                                 method="tree_dyadic_proxy")
        rhs_est = melnikov_gamma_lower(mu_hat, curv, growth)
        rhs = rhs_est.value / (2.0 * tree.scale)
        ratio = lhs / rhs ** (2.0 * K / (K + 1.0))
        rows.append({"depth": depth, "lhs": lhs, "rhs": rhs, "ratio": ratio,
                     "wolff_sup": lhs_est.normalization["sup"],
                     "growth": growth, "curvature_proxy": curv_proxy,
                     "realized_mass": mu.total_mass, "n_leaves": tree.n_leaves})
    report = ExperimentReport(
        "thm1",
        {"K": K, "a": a, "branching": branching, "seed": seed, "depths": depths,
         "alpha": idx.alpha, "p": idx.p,
         "rhs_inputs": "growth and curvature proxy from ideal tree data"},
        ["depth", "lhs", "rhs", "ratio", "wolff_sup", "growth", "curvature_proxy",
         "realized_mass", "n_leaves"],
        rows, {"ratio_stability": RATIO_STABILITY})
    return report.finalize()


def verify_riesz_distortion(K, p, depths, branching=4, seed=0) -> ExperimentReport:
    """Same pipeline with the Wolff estimator at (1/p, p) on the target side
    and the mapped indices (beta, q) on the source side."""
    depths = list(depths)
    di = distorted_index_map(1.0 / p, p, K)
    target_idx = CapacityIndices(1.0 / p, p)
    schedules = harmonic_schedule(K, max(depths), branching=branching)
    rows = []
    for depth in depths:
        tree = build_tree(schedules, depth, seed=seed)
        lhs_est = wolff_capacity_lower(tree, di.image, side=SOURCE, seed=seed)
        lhs = lhs_est.value / (2.0 * tree.scale) ** (2.0 / (K + 1.0))
        rhs_est = wolff_capacity_lower(tree, target_idx, side=TARGET, seed=seed)
        rhs = rhs_est.value / (2.0 * tree.scale)
        ratio = lhs / rhs ** (2.0 * K / (K + 1.0))
        rows.append({"depth": depth, "lhs": lhs, "rhs": rhs, "ratio": ratio,
                     "beta": di.beta, "q": di.q,
                     "source_sup": lhs_est.normalization["sup"],
                     "target_sup": rhs_est.normalization["sup"]})
    report = ExperimentReport(
        "thm2a",
        {"K": K, "p": p, "branching": branching, "seed": seed, "depths": depths,
         "beta": di.beta, "q": di.q, "t": di.t, "t_prime": di.t_prime},
        ["depth", "lhs", "rhs", "ratio", "beta", "q", "source_sup", "target_sup"],
        rows, {"ratio_stability": RATIO_STABILITY})
    return report.finalize()


def sharpness_experiment(K, q, depths=None, branching=4, seed=0) -> ExperimentReport:
    """Harmonic source divergence at the sharpness indices.

    The source Wolff partial sums must fit c * ln(N) (c in [1/2, 2],
    R^2 >= 0.99), the target sum at (2/3, 3/2) must converge (estimated tail
    beyond the final depth below 5% of the total), the capacity estimate must
    decay like (ln N)^(-1/(q'-1)) (fitted exponent within 10%), and the
    source capacity at the distortion indices must stay decade-stable.
    """
    depths = list(depths) if depths is not None else list(range(8, 65))
    q_conj_minus_1 = 1.0 / (q - 1.0)
    beta = 2.0 * K / ((K + 1.0) * q)
    src_idx = CapacityIndices(beta, q, K=K)
    thm1_idx = distortion_indices(K)
    schedules = sharpness_schedule(K, q, max(depths), branching=branching)
    # convergence exponent of the target terms (n+1)^(-s)
    s = (K + 1.0) / (K * q_conj_minus_1)
    rows = []
    for depth in depths:
        tree = build_tree(schedules, depth, seed=seed)
        src = wolff_tree(tree, SOURCE, beta, q, depth=depth)
        tgt = wolff_tree(tree, TARGET, 2.0 / 3.0, 1.5, depth=depth, homogeneity=1.0)
        cap = wolff_capacity_lower(tree, src_idx, side=SOURCE, seed=seed)
        bounded = wolff_capacity_lower(tree, thm1_idx, side=SOURCE, seed=seed)
        last_term = tgt.entries[-1][1]
        tail = last_term * (depth + 1) / (s - 1.0)  # integral bound of the tail
        rows.append({"depth": depth, "source_sum": src.total, "target_total": tgt.total,
                     "target_tail_fraction": tail / (tgt.total + tail),
                     "capacity": cap.value,
                     "bounded_source_capacity": bounded.value})
    report = ExperimentReport(
        "sharpness",
        {"K": K, "q": q, "beta": beta, "branching": branching, "seed": seed,
         "depths": depths, "target_exponent": s},
        ["depth", "source_sum", "target_total", "target_tail_fraction", "capacity",
         "bounded_source_capacity"],
        rows,
        {"slope_lo": 0.5, "slope_hi": 2.0, "r2_min": 0.99, "target_tail_max": 0.05,
         "capacity_exponent": 1.0 / q_conj_minus_1,
         "capacity_exponent_tol": 0.10, "ratio_stability": RATIO_STABILITY})
    return report.finalize()


def content_distortion_experiment(K, depths, a=0.1, branching=4,
                                  seed=0) -> ExperimentReport:
    """Distortion of h-contents on the realized pair.

    Per depth: the source content with h0 = s * eps_{nu,a} against the target
    content with the pulled-back gauge h = t^(2/(K+1)) * eps^(2K/(K+1)), both
    by exact tree DP; the ratio M_source / M_target^((K+1)/(2K)) must stay
    within one decade across the depth range.  The ratio is invariant under
    global mass scaling, so the truncation renormalization cancels.
    """
    depths = list(depths)
    schedules = harmonic_schedule(K, max(depths), branching=branching)
    rows = []
    for depth in depths:
        tree = build_tree(schedules, depth, seed=seed)
        real = tree.realize(seed=seed)
        h0 = TreeSmoothedDensityGauge(real, a, side=SOURCE, gamma=1.0)
        m_src = content_Mh_tree(tree, SOURCE, h0, realization=real).value
        m_tgt = content_Mh_tree(tree, TARGET, distorted_gauge(real, a),
                                realization=real).value
        rows.append({"depth": depth, "source_content": m_src,
                     "target_content": m_tgt,
                     "ratio": m_src / m_tgt ** ((K + 1.0) / (2.0 * K))})
    report = ExperimentReport(
        "content_ratio",
        {"K": K, "a": a, "branching": branching, "seed": seed, "depths": depths},
        ["depth", "source_content", "target_content", "ratio"],
        rows, {"ratio_stability": RATIO_STABILITY})
    return report.finalize()


# -- gauge experiments --------------------------------------------------------


def gauge_criterion_experiment(K, betas=None, n_scales=4096) -> ExperimentReport:
    """Classify log-power gauges by the divergence of the criterion sum.

    For eps(r) = log(1/r)^(-beta) the dyadic terms of the criterion integral
    are (k ln 2)^(-e) with e = beta * (1 + 1/K): divergent iff e <= 1.  The
    classifier fits the power-law exponent of the terms, which reproduces the
    boundary exactly; partial sums and tail fractions are reported alongside.
    """
    if betas is None:
        grid = np.concatenate([np.linspace(0.1, 1.0, 10), np.linspace(1.05, 2.0, 10)])
        betas = [float(e / (1.0 + 1.0 / K)) for e in grid]
    power = 1.0 + 1.0 / K
    ks = np.arange(2, n_scales + 1, dtype=float)
    rows = []
    for beta in betas:
        e = beta * power
        terms = (ks * LN2) ** (-e)
        half = ks >= ks[len(ks) // 2]
        slope, _, _ = _linfit(np.log(ks[half]), np.log(terms[half]))
        fitted_e = -slope
        classified = "divergent" if fitted_e <= 1.0 + 1e-9 else "convergent"
        partial = float(np.sum(terms))
        after = ks > 1000
        tail_1000 = float(np.sum(terms[after])) / partial if np.any(after) else 0.0
        if fitted_e > 1.0 + 1e-9:
            rate = "convergent"
        elif abs(fitted_e - 1.0) <= 1e-9:
            rate = "log"
        else:
            rate = f"power:{1.0 - fitted_e:.6g}"
        rows.append({"beta": beta, "exponent": e, "fitted_exponent": fitted_e,
                     "classified": classified, "rate": rate,
                     "partial_sum": partial, "tail_fraction_1000": tail_1000})
    report = ExperimentReport(
        "gauge_criterion",
        {"K": K, "n_scales": n_scales, "betas": [float(b) for b in betas]},
        ["beta", "exponent", "fitted_exponent", "classified", "rate", "partial_sum",
         "tail_fraction_1000"],
        rows, {"boundary": 1.0})
    return report.finalize()


def vanishing_content_experiment(K, depths, eps_log_fn=None, shrink_exponent=3.0,
                                 branching=4, seed=0) -> ExperimentReport:
    """Generation gauge sums vanish under thinning while the target potential
    stays bounded.

    With the unit gauge the generation sum is (N+1)^(2K/(K+1)) exactly.  With
    eps(r) -> 0 (default 1/log(1/r)) and radii thinned so that
    log s_N <= -(N+1)^shrink_exponent, the sums tend to 0 monotonically;
    thinning leaves the multipliers untouched, so the target-side (2/3, 3/2)
    sum is unchanged and bounded by pi^2/6 - 1.
    """
    depths = list(depths)
    if eps_log_fn is None:
        eps_log_fn = lambda log_r: 1.0 / (-log_r)  # noqa: E731
    gauge = qc_radial_gauge(K, eps_log_fn, description="eps=1/log(1/r)")
    unit = qc_radial_gauge(K, lambda log_r: 1.0, description="eps=1")
    cap = lambda n: -float((n + 1) ** shrink_exponent)  # noqa: E731
    schedules = shrunk_schedule(K, max(depths), cap, branching=branching)
    rows = []
    for depth in depths:
        tree = build_tree(schedules, depth, seed=seed)
        closed = (depth + 1) ** (2.0 * K / (K + 1.0))
        rows.append({
            "depth": depth,
            "unit_gauge_sum": generation_cover_sum(tree, SOURCE, unit, depth),
            "closed_form": closed,
            "shrunk_gauge_sum": generation_cover_sum(tree, SOURCE, gauge, depth),
            "source_log_radius": tree.log_radius(SOURCE, depth),
            "target_total": wolff_tree(tree, TARGET, 2.0 / 3.0, 1.5, depth=depth,
                                       homogeneity=1.0).total,
        })
    report = ExperimentReport(
        "vanishing_content",
        {"K": K, "branching": branching, "seed": seed, "depths": depths,
         "shrink_exponent": shrink_exponent, "gauge": gauge.description},
        ["depth", "unit_gauge_sum", "closed_form", "shrunk_gauge_sum",
         "source_log_radius", "target_total"],
        rows,
        {"closed_form_rtol": 1e-12, "vanish_factor": 1.0,
         "target_bound": math.pi ** 2 / 6.0 - 1.0 + 1e-12})
    return report.finalize()


def doubly_exponential_experiment(K, depths, criterion_a=1.0, branching=4,
                                  seed=0) -> ExperimentReport:
    """Radii at log s_N <= -e^N kill every gauge with a convergent criterion
    integral, while the target side matches the plain harmonic schedule.

    Uses eps(s) = log(1/s)^(-2/a): its a-th power integrates like
    log(1/s)^(-2) ds/s, which converges.  Generation sums are computed in
    log space throughout.
    """
    depths = list(depths)
    a = criterion_a
    gauge = qc_radial_gauge(K, lambda log_r: (-log_r) ** (-2.0 / a),
                            description=f"eps=log(1/s)^(-2/{a})")
    schedules = doubly_exponential_schedule(K, max(depths), branching=branching)
    harmonic = harmonic_schedule(K, max(depths), branching=branching)
    rows = []
    for depth in depths:
        tree = build_tree(schedules, depth, seed=seed)
        htree = build_tree(harmonic, depth, seed=seed)
        rows.append({
            "depth": depth,
            "source_log_radius": tree.log_radius(SOURCE, depth),
            "cap_log": -math.exp(depth),
            "gauge_sum": generation_cover_sum(tree, SOURCE, gauge, depth),
            "target_total": wolff_tree(tree, TARGET, 2.0 / 3.0, 1.5, depth=depth,
                                       homogeneity=1.0).total,
            "harmonic_target_total": wolff_tree(htree, TARGET, 2.0 / 3.0, 1.5,
                                                depth=depth, homogeneity=1.0).total,
        })
    report = ExperimentReport(
        "doubly_exponential",
        {"K": K, "branching": branching, "seed": seed, "depths": depths,
         "criterion_a": a, "gauge": gauge.description},
        ["depth", "source_log_radius", "cap_log", "gauge_sum", "target_total",
         "harmonic_target_total"],
        rows, {"schedule_equality_rtol": 1e-12})
    return report.finalize()
