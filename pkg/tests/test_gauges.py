import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcantor.cantor import SOURCE, TARGET, build_tree, harmonic_schedule
from qcantor.gauges import (ConstantGauge, RadialGauge,
                            SmoothedDensityGauge, TableGauge,
                            TreeSmoothedDensityGauge, check_G1, check_G2,
                            check_G2_tree_gauge, content_Mh_tree, distorted_gauge,
                            eps_integral_check, eps_mu_a, frostman_tree,
                            generation_cover_sum, geometric_kernel_sum_constant,
                            h_mu_a, psi_a, qc_radial_gauge, sample_ball_pairs)
from qcantor.measure import PlanarMeasure
from qcantor.potentials import default_dyadic_range, standard_query_points


# -- kernel and smoothed density ----------------------------------------------


def test_psi_at_origin():
    assert psi_a(np.zeros(2), 0.7) == pytest.approx(1.0)


def test_psi_at_unit_point():
    assert psi_a(np.array([1.0, 0.0]), 1.0) == pytest.approx(0.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.0, 5.0), st.floats(0.0, 5.0))
def test_psi_radially_decreasing(a, r1, r2):
    lo, hi = sorted((r1, r2))
    assert psi_a(np.array([hi, 0.0]), a) <= psi_a(np.array([lo, 0.0]), a) + 1e-15


def test_eps_single_atom_at_center():
    mu = PlanarMeasure(np.array([[0.3, -0.2]]), np.array([1.0]))
    for t in (0.1, 1.0, 7.0):
        assert eps_mu_a(mu, (0.3, -0.2), t, 0.5) == pytest.approx(1.0 / t, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.01, 4.0))
def test_eps_doubling_bound(a, t):
    mu = PlanarMeasure.uniform_disk(40, seed=12)
    x = (0.2, 0.1)
    assert eps_mu_a(mu, x, 2.0 * t, a) <= 2.0 ** a * eps_mu_a(mu, x, t, a) * (1 + 1e-12)


def test_eps_dominates_plain_density():
    # psi_a(1) = 1/2 at a = 1, so eps >= mu(B(x,t)) / (2t)
    mu = PlanarMeasure.uniform_disk(200, seed=13)
    for t in (0.2, 0.7, 1.5):
        x = (0.1, 0.0)
        assert eps_mu_a(mu, x, t, 1.0) >= mu.ball_mass(x, t) / (2.0 * t) - 1e-15


def test_gauge_h_vanishes_monotonically():
    mu = PlanarMeasure.uniform_disk(100, seed=14)
    x = (0.05, 0.05)
    hs = [h_mu_a(mu, x, 2.0 ** -k, 0.5) for k in range(6, 17)]
    assert all(b < a for a, b in zip(hs, hs[1:]))


# -- eps integral vs Wolff ----------------------------------------------------


def test_eps_integral_empty_measure():
    mu = PlanarMeasure(np.zeros((0, 2)), np.zeros(0))
    res = eps_integral_check(mu, (0.0, 0.0), 0.1, 1.5, -10, 2)
    assert res.dyadic_sum == 0.0


def test_eps_integral_single_atom_flags_agree():
    mu = PlanarMeasure(np.zeros((1, 2)), np.ones(1))
    res = eps_integral_check(mu, (0.0, 0.0), 0.5, 1.5, -40, 2)
    assert res.divergent_eps and res.divergent_wolff


def test_eps_integral_ratio_bounded(tree_k2_d3, real_k2_d3):
    mu = real_k2_d3.measure(SOURCE)
    pts, _ = standard_query_points(real_k2_d3, SOURCE, seed=2)
    k_min, k_max = default_dyadic_range(tree_k2_d3, SOURCE)
    ratios = [eps_integral_check(mu, x, 0.1, 1.5, k_min, k_max).ratio
              for x in pts[:50]]
    assert all(r <= 64.0 for r in ratios)


# -- regularity classes -------------------------------------------------------


def test_constant_gauge_doubling_constants():
    gauge = ConstantGauge(1.0)
    pairs = sample_ball_pairs((0.0, 0.0), 1.0, 64, seed=3)
    g1 = check_G1(gauge, pairs)
    assert g1.c0 == pytest.approx(1.0)
    g2 = check_G2(gauge, [(np.zeros(2), 0.5)], swallow_radius=2.0)
    # sum_k 2^-k = 2, and the geometric remainder bound reproduces it exactly
    assert g2.c0_prime == pytest.approx(2.0, rel=1e-12)


def test_smoothed_gauge_in_G1():
    mu = PlanarMeasure.uniform_disk(150, seed=15)
    a = 0.4
    gauge = SmoothedDensityGauge(mu, a)
    pairs = sample_ball_pairs((0.0, 0.0), 1.0, 400, seed=5, log_r_range=(-6.0, 1.0))
    report = check_G1(gauge, pairs, threshold=4.0 * 2.0 ** (1.0 + a))
    assert report.passed


def test_inverse_radius_gauge_summable():
    mu = PlanarMeasure.uniform_disk(50, seed=16)
    gauge = RadialGauge(lambda log_r: math.exp(-log_r), gamma=1.0)
    report = check_G2(gauge, [(np.zeros(2), 0.25)], swallow_radius=2.0)
    # eps = 1/r telescopes: sum 2^-k eps(2^k r) = (4/3) eps(r)
    assert report.c0_prime == pytest.approx(4.0 / 3.0, rel=0.05)


def test_distorted_gauge_chain_summability(real_k2_d3):
    gauge = distorted_gauge(real_k2_d3, a=0.1)
    paths = list(real_k2_d3.tree.paths_at(3))[:8]
    report = check_G2_tree_gauge(gauge, paths)
    assert math.isfinite(report.c0_prime)
    assert "ancestor-chain" in report.notes


# -- two-parameter kernel sum bound -------------------------------------------


def test_kernel_sum_constant_at_zero():
    # z = 0: LHS = 1/(1 - 2^-b); b = 2 gives 4/3
    c = geometric_kernel_sum_constant(1.0, 2.0, radii=[0.0])
    assert c == pytest.approx(4.0 / 3.0, rel=1e-10)


def test_kernel_sum_constant_finite_on_grid():
    c = geometric_kernel_sum_constant(1.0, 2.0)
    assert math.isfinite(c)
    assert c >= 4.0 / 3.0


def test_kernel_sum_constant_blows_up_near_diagonal():
    cs = [geometric_kernel_sum_constant(1.0, b) for b in (1.5, 1.1, 1.01)]
    assert cs[0] < cs[1] < cs[2]


def test_kernel_sum_equal_exponents_rejected():
    with pytest.raises(ValueError, match="excluded"):
        geometric_kernel_sum_constant(1.0, 1.0)


# -- contents: DP vs exhaustive enumeration ------------------------------------


def _bruteforce_content(tree, h_table):
    """Min of sum h over all node subsets that cover every leaf."""
    nodes = []
    for g in range(tree.depth + 1):
        nodes.extend(tree.paths_at(g))
    leaves = list(tree.paths_at(tree.depth))
    best = math.inf
    for mask in range(1, 1 << len(nodes)):
        chosen = [nodes[i] for i in range(len(nodes)) if mask >> i & 1]
        if all(any(leaf[:len(c)] == c for c in chosen) for leaf in leaves):
            best = min(best, sum(h_table[c] for c in chosen))
    return best


def _random_integer_gauge(tree, rng):
    table = {}
    for g in range(tree.depth + 1):
        for path in tree.paths_at(g):
            table[path] = float(rng.integers(1, 1000))
    return table


def _all_cuts(tree, path=()):
    """Every antichain cover below a node, as explicit path lists."""
    g = len(path)
    if g == tree.depth:
        return [[path]]
    combos = [[]]
    for j in range(tree.branching(g + 1)):
        child = _all_cuts(tree, path + (j,))
        combos = [acc + c for acc in combos for c in child]
    return [[path]] + combos


@pytest.mark.parametrize("branching,depth", [(2, 2), (2, 3), (3, 2)])
def test_content_dp_equals_enumeration(branching, depth):
    tree = build_tree(harmonic_schedule(2.0, depth, branching=branching), depth)
    rng = np.random.default_rng(100 * branching + depth)
    for trial in range(20):
        table = _random_integer_gauge(tree, rng)
        got = content_Mh_tree(tree, SOURCE, TableGauge(table)).value
        assert got == _bruteforce_content(tree, table)  # integer sums: exact


@pytest.mark.parametrize("branching,depth", [(2, 4), (5, 2), (3, 3)])
def test_content_dp_equals_cut_enumeration_wider(branching, depth):
    # up to 32 leaves: the bitmask oracle is out of reach, explicitly listing
    # every antichain cover and summing it is not
    tree = build_tree(harmonic_schedule(2.0, depth, branching=branching), depth)
    assert tree.n_leaves <= 32
    cuts = _all_cuts(tree)
    rng = np.random.default_rng(7 * branching + depth)
    for trial in range(5):
        table = _random_integer_gauge(tree, rng)
        got = content_Mh_tree(tree, SOURCE, TableGauge(table)).value
        assert got == min(sum(table[p] for p in cut) for cut in cuts)


def test_content_mass_gauge_returns_total_mass():
    tree = build_tree(harmonic_schedule(2.0, 3), 3)
    table = {path: math.exp(tree.log_mass(g))
             for g in range(4) for path in tree.paths_at(g)}
    got = content_Mh_tree(tree, SOURCE, TableGauge(table)).value
    assert got == pytest.approx(math.exp(tree.log_total_mass()), rel=1e-12)


def test_content_root_optimal_when_subadditive():
    tree = build_tree(harmonic_schedule(2.0, 2), 2)
    table = {(): 1.0}
    for g in (1, 2):
        for path in tree.paths_at(g):
            table[path] = 2.0  # children always cost more
    res = content_Mh_tree(tree, SOURCE, TableGauge(table))
    assert res.value == 1.0
    assert res.cover == ((),)


def test_cover_is_antichain_partition(tree_k2_d3, real_k2_d3):
    gauge = TreeSmoothedDensityGauge(real_k2_d3, 0.1, side=SOURCE)
    res = content_Mh_tree(tree_k2_d3, SOURCE, gauge, realization=real_k2_d3)
    cover = res.cover
    for a in cover:
        for b in cover:
            if a != b:
                assert a != b[:len(a)]  # no ancestor pairs
    leaves = list(tree_k2_d3.paths_at(3))
    assert all(any(leaf[:len(c)] == c for c in cover) for leaf in leaves)


# -- Frostman flow -------------------------------------------------------------


def test_frostman_equals_content_on_random_gauges():
    tree = build_tree(harmonic_schedule(2.0, 3, branching=2), 3)
    rng = np.random.default_rng(77)
    for trial in range(20):
        table = _random_integer_gauge(tree, rng)
        fr = frostman_tree(tree, SOURCE, TableGauge(table))
        assert fr.value == fr.content_value  # max flow = min cut, bitwise


def test_frostman_feasibility():
    tree = build_tree(harmonic_schedule(2.0, 3), 3, seed=2)
    tree.realize(seed=2)
    real = tree.realize(seed=2)
    gauge = TreeSmoothedDensityGauge(real, 0.1, side=SOURCE)
    fr = frostman_tree(tree, SOURCE, gauge, realization=real)
    w = fr.leaf_weights
    for g in range(4):
        for path in tree.paths_at(g):
            lo, hi = real.leaf_range(path)
            assert np.sum(w[lo:hi]) <= gauge.h_node(path) * (1 + 1e-9)


def test_frostman_mass_gauge_proportional():
    tree = build_tree(harmonic_schedule(2.0, 2), 2)
    table = {path: math.exp(tree.log_mass(g))
             for g in range(3) for path in tree.paths_at(g)}
    fr = frostman_tree(tree, SOURCE, TableGauge(table))
    assert fr.value == pytest.approx(math.exp(tree.log_total_mass()), rel=1e-12)
    leaf_mass = math.exp(tree.log_mass(2))
    assert np.allclose(fr.leaf_weights, leaf_mass, rtol=1e-12)


# -- distorted gauge -----------------------------------------------------------


def test_distorted_gauge_k1_reduces_to_smoothed():
    tree = build_tree(harmonic_schedule(1.0, 2), 2, seed=3)
    real = tree.realize(seed=3)
    dist = distorted_gauge(real, a=0.2)
    plain = TreeSmoothedDensityGauge(real, 0.2, side=SOURCE, gamma=1.0)
    assert dist.gamma == pytest.approx(1.0)
    for path in [(), (0,), (0, 1)]:
        # K = 1: exponent collapses and source radii equal target radii
        assert dist.eps_node(path) == pytest.approx(plain.eps_node(path), rel=1e-12)
        assert dist.h_node(path) == pytest.approx(plain.h_node(path), rel=1e-12)


def test_distorted_gauge_root_ball_closed_form(real_k2_d3):
    real = real_k2_d3
    K = real.tree.K
    dist = distorted_gauge(real, a=0.3)
    eps0 = real.node_eps(SOURCE, (), 0.3)
    assert dist.eps_node(()) == pytest.approx(eps0 ** (2 * K / (K + 1)), rel=1e-12)
    assert dist.h_node(()) == pytest.approx(dist.eps_node(()), rel=1e-12)  # t = 1


def test_distorted_gauge_rejects_off_tree_balls(real_k2_d3):
    with pytest.raises(ValueError, match="tree balls"):
        distorted_gauge(real_k2_d3, 0.1).eps((0.0, 0.0), 0.123)


def test_main_lemma_ratio_stable_small_depths():
    K, a = 2.0, 0.1
    schedules = harmonic_schedule(K, 5)
    ratios = []
    for depth in range(2, 6):
        tree = build_tree(schedules, depth, seed=5)
        real = tree.realize(seed=5)
        h0 = TreeSmoothedDensityGauge(real, a, side=SOURCE, gamma=1.0)
        m_src = content_Mh_tree(tree, SOURCE, h0, realization=real).value
        m_tgt = content_Mh_tree(tree, TARGET, distorted_gauge(real, a),
                                realization=real).value
        ratios.append(m_src / m_tgt ** ((K + 1.0) / (2.0 * K)))
    assert min(ratios) >= 0.1 * max(ratios)


# -- generation cover sums ----------------------------------------------------


def test_generation_sum_unit_gauge_closed_form():
    for K in (1.0, 2.0, 3.5):
        tree = build_tree(harmonic_schedule(K, 8), 8)
        unit = qc_radial_gauge(K, lambda log_r: 1.0)
        for n in (1, 4, 8):
            got = generation_cover_sum(tree, SOURCE, unit, n)
            assert got == pytest.approx((n + 1) ** (2 * K / (K + 1)), rel=1e-13)


def test_generation_sum_k1_is_linear():
    tree = build_tree(harmonic_schedule(1.0, 6), 6)
    unit = qc_radial_gauge(1.0, lambda log_r: 1.0)
    for n in (2, 5):
        assert generation_cover_sum(tree, SOURCE, unit, n) == pytest.approx(n + 1.0,
                                                                            rel=1e-13)


def test_generation_sum_target_gamma_one():
    tree = build_tree(harmonic_schedule(2.0, 5), 5)
    gauge = RadialGauge(lambda log_r: 1.0, gamma=1.0)
    assert generation_cover_sum(tree, TARGET, gauge, 4) == pytest.approx(5.0,
                                                                         rel=1e-13)
