"""Two-sided multiscale Cantor disk constructions.

Each level of the construction keeps M congruent *protecting* disks of
relative radius R inside the parent disk, and inside each protecting disk a
concentric *generating* disk of relative radius sigma = R * d.  Running the
levels with the relative factor sigma**K * R on one side ("source") and
sigma * R on the other ("target") produces the pair of sets exchanged by a
K-quasiconformal rearrangement; only this exact radii correspondence is used,
the map itself is never evaluated (and no quasiconformality of a finite stage
is certified).

Radii shrink like 1e-4 per level, so all radius and mass arithmetic is kept
in log space.  Mass splits by area: a node of generation N carries the
fraction prod(R_k**2) of the unit mass, times the tail renormalization
prod_{n>N}(1 - eps_n) with eps_n = 1 - M_n * R_n**2 once the construction is
truncated at a finite depth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .measure import PlanarMeasure

SOURCE = "source"
TARGET = "target"
SIDES = (SOURCE, TARGET)

#: hard smallness bound for both R and sigma = R*d
SMALLNESS = 1.0 / 100.0
_SMALL_TOL = 1e-12

# realization guards
MAX_REALIZED_LEAVES = 200_000
_LOG_UNDERFLOW = -700.0


class ConstructionError(ValueError):
    """Inconsistent or infeasible level schedule."""


class PackingError(ConstructionError):
    """Requested disk packing is infeasible."""


def _check_side(side):
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}, got {side!r}")


@dataclass(frozen=True)
class LevelSchedule:
    """Parameters of one construction level.

    index       1-based generation this level produces
    branching   M, number of protecting disks kept per parent
    multiplier  d >= 1, the generating/protecting gap: sigma = R * d
    log_protect natural log of the protecting radius fraction R
    distortion  K >= 1, shared across levels
    """

    index: int
    branching: int
    multiplier: float
    log_protect: float
    distortion: float

    def __post_init__(self):
        if self.index < 1:
            raise ConstructionError(f"level {self.index}: index must be >= 1")
        if self.branching < 1 or int(self.branching) != self.branching:
            raise ConstructionError(f"level {self.index}: branching must be a positive integer")
        if not (self.multiplier >= 1.0):
            raise ConstructionError(f"level {self.index}: multiplier d must be >= 1")
        if not (self.distortion >= 1.0):
            raise ConstructionError(f"level {self.index}: distortion K must be >= 1")
        if not (self.log_protect < 0.0):
            raise ConstructionError(f"level {self.index}: protecting radius must be < 1")
        if self.log_protect > math.log(SMALLNESS) + _SMALL_TOL:
            raise ConstructionError(
                f"level {self.index}: R = {math.exp(self.log_protect):.6g} violates the "
                f"smallness convention R <= {SMALLNESS}")
        if self.log_sigma > math.log(SMALLNESS) + _SMALL_TOL:
            raise ConstructionError(
                f"level {self.index}: sigma = R*d = {math.exp(self.log_sigma):.6g} violates "
                f"the smallness convention sigma <= {SMALLNESS}")
        if self.branching * self.protect ** 2 > 1.0 + _SMALL_TOL:
            raise ConstructionError(
                f"level {self.index}: M*R^2 = {self.branching * self.protect**2:.6g} exceeds 1 "
                f"(eps would be negative)")

    @classmethod
    def from_eps(cls, index, branching, multiplier, eps, distortion):
        """Protecting radius from the leftover area fraction: M*R^2 = 1 - eps."""
        if not (0.0 <= eps < 1.0):
            raise ConstructionError(f"level {index}: eps must lie in [0, 1)")
        log_r = 0.5 * math.log((1.0 - eps) / branching)
        return cls(index, branching, multiplier, log_r, distortion)

    @property
    def protect(self) -> float:
        """Protecting radius fraction R."""
        return math.exp(self.log_protect)

    @property
    def eps(self) -> float:
        """Leftover area fraction: 1 - M*R^2."""
        return 1.0 - self.branching * math.exp(2.0 * self.log_protect)

    @property
    def log_sigma(self) -> float:
        return self.log_protect + math.log(self.multiplier)

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    @property
    def log_keep(self) -> float:
        """log(1 - eps) = log(M * R^2), the per-level retained mass fraction."""
        return math.log(self.branching) + 2.0 * self.log_protect

    @property
    def log_target_step(self) -> float:
        """log(sigma * R), the per-level target generating factor."""
        return self.log_sigma + self.log_protect

    @property
    def log_source_step(self) -> float:
        """log(sigma**K * R), the per-level source generating factor."""
        return self.distortion * self.log_sigma + self.log_protect


def harmonic_schedule(K, depth, branching=4, eps=None):
    """Levels with multiplier d_j = (j+1)/j (telescoping to prod d_j = N+1).

    With eps=None each level takes the largest admissible radius,
    R_j = SMALLNESS / d_j, so sigma_j = SMALLNESS exactly.  An explicit eps
    fixes R = sqrt((1-eps)/M) at every level and fails if sigma = R*d_1
    breaks smallness.
    """
    if K < 1.0:
        raise ConstructionError("distortion K must be >= 1")
    levels = []
    for j in range(1, depth + 1):
        d = (j + 1) / j
        if d > 2.0:
            raise ConstructionError(f"level {j}: multiplier {d} outside [1, 2]")
        if eps is None:
            log_r = math.log(SMALLNESS) - math.log(d)
        else:
            log_r = 0.5 * math.log((1.0 - eps) / branching)
        levels.append(LevelSchedule(j, branching, d, log_r, K))
    return levels


def sharpness_exponent(K, q):
    """Exponent e with d_j = ((j+1)/j)**e making the source sum harmonic.

    Valid only in the regime beta*q = 2K/(K+1) with q > (2K+1)/(K+1).
    """
    if K < 1.0:
        raise ConstructionError("distortion K must be >= 1")
    q_min = (2.0 * K + 1.0) / (K + 1.0)
    if not (q > q_min):
        raise ConstructionError(
            f"indices not in sharpness regime: need q > (2K+1)/(K+1) = {q_min}, got q = {q}")
    q_conj_minus_1 = 1.0 / (q - 1.0)
    return (K + 1.0) / (2.0 * K * q_conj_minus_1)


def sharpness_schedule(K, q, depth, branching=4, eps=None):
    """Levels with d_j = ((j+1)/j)**e, e = (K+1)/(2K(q'-1)).

    The choice makes the source-side generation terms at the sharpness
    indices exactly 1/(n+1) while keeping the target side summable.  Early
    multipliers exceed 2 once q > (3K+1)/(K+1); sigma <= 1/100 still holds.
    """
    e = sharpness_exponent(K, q)
    levels = []
    for j in range(1, depth + 1):
        d = ((j + 1) / j) ** e
        if eps is None:
            log_r = math.log(SMALLNESS) - math.log(d)
        else:
            log_r = 0.5 * math.log((1.0 - eps) / branching)
        levels.append(LevelSchedule(j, branching, d, log_r, K))
    return levels


def shrunk_schedule(K, depth, source_log_cap, branching=4):
    """Harmonic multipliers with radii thinned to meet a source-radius cap.

    source_log_cap(N) is the required upper bound on log s_N.  Each level
    keeps the largest admissible radius unless the cap binds, in which case
    log s_N equals the cap exactly.  Thinning never touches the multipliers,
    so target-side potentials are unchanged.
    """
    if K < 1.0:
        raise ConstructionError("distortion K must be >= 1")
    levels = []
    log_s = 0.0
    for j in range(1, depth + 1):
        d = (j + 1) / j
        log_d = math.log(d)
        log_r_wide = math.log(SMALLNESS) - log_d
        log_r_cap = (float(source_log_cap(j)) - log_s - K * log_d) / (K + 1.0)
        log_r = min(log_r_wide, log_r_cap)
        levels.append(LevelSchedule(j, branching, d, log_r, K))
        log_s += (K + 1.0) * log_r + K * log_d
    return levels


def doubly_exponential_schedule(K, depth, branching=4):
    """Radii capped so log s_max(N) <= -e**N; log-space only beyond depth 4."""
    return shrunk_schedule(K, depth, lambda n: -math.exp(n), branching=branching)


class CantorTree:
    """A validated schedule prefix with per-generation cumulative products.

    Nodes are not materialized: every per-generation quantity is a prefix sum
    over the schedules, so potentials and contents at depth 64 cost O(depth).
    Geometry (centers, atoms) lives in a CantorRealization.
    """

    def __init__(self, schedules, depth, seed=0, scale=1.0):
        schedules = tuple(schedules)
        if depth > len(schedules):
            raise ConstructionError(
                f"depth {depth} exceeds the {len(schedules)} scheduled levels")
        if depth < 0:
            raise ConstructionError("depth must be >= 0")
        if not (scale > 0.0) or not math.isfinite(scale):
            raise ConstructionError("scale must be positive and finite")
        ks = {s.distortion for s in schedules[:depth]}
        if len(ks) > 1:
            raise ConstructionError(f"distortion K must be shared across levels, got {sorted(ks)}")
        for i, s in enumerate(schedules[:depth], start=1):
            if s.index != i:
                raise ConstructionError(f"level {i}: schedule index {s.index} out of order")
        self.schedules = schedules[:depth]
        self.depth = depth
        self.seed = int(seed)
        self.scale = float(scale)
        self._realization = None

        # cumulative per-generation logs, entry n = generation n (entry 0 = root)
        n = depth + 1
        self.cum_log_t = np.zeros(n)
        self.cum_log_s = np.zeros(n)
        self.cum_log_mass = np.zeros(n)       # ideal: 2 * sum log R_k
        self.cum_log_d = np.zeros(n)          # sum log d_k
        self.cum_log_keep = np.zeros(n)       # sum log(1 - eps_k)
        for g, lv in enumerate(self.schedules, start=1):
            self.cum_log_t[g] = self.cum_log_t[g - 1] + lv.log_target_step
            self.cum_log_s[g] = self.cum_log_s[g - 1] + lv.log_source_step
            self.cum_log_mass[g] = self.cum_log_mass[g - 1] + 2.0 * lv.log_protect
            self.cum_log_d[g] = self.cum_log_d[g - 1] + math.log(lv.multiplier)
            self.cum_log_keep[g] = self.cum_log_keep[g - 1] + lv.log_keep

    @property
    def K(self) -> float:
        return self.schedules[0].distortion if self.schedules else 1.0

    def level(self, generation) -> LevelSchedule:
        return self.schedules[generation - 1]

    def branching(self, generation) -> int:
        return self.schedules[generation - 1].branching

    def n_nodes(self, generation) -> int:
        n = 1
        for lv in self.schedules[:generation]:
            n *= lv.branching
        return n

    @property
    def n_leaves(self) -> int:
        return self.n_nodes(self.depth)

    def log_radius(self, side, generation) -> float:
        """log of the generating radius at a generation (includes scale)."""
        _check_side(side)
        cum = self.cum_log_s if side == SOURCE else self.cum_log_t
        return math.log(self.scale) + float(cum[generation])

    def log_protect_radius(self, side, generation) -> float:
        """log of the protecting radius at a generation >= 1."""
        if generation < 1:
            raise ValueError("protecting disks exist for generations >= 1")
        lv = self.level(generation)
        gap = lv.distortion * lv.log_sigma if side == SOURCE else lv.log_sigma
        return self.log_radius(side, generation) - gap

    def log_mass(self, generation, convention="realized") -> float:
        """log node mass at a generation.

        "realized": area-split mass of the depth-truncated construction,
        prod(R_k^2) * prod_{n>N}(1 - eps_n); generation totals are constant.
        "ideal": prod(R_k^2) alone, the fully filled construction where each
        level keeps total mass 1.
        """
        ideal = float(self.cum_log_mass[generation])
        if convention == "ideal":
            return ideal
        if convention == "realized":
            tail = float(self.cum_log_keep[self.depth] - self.cum_log_keep[generation])
            return ideal + tail
        raise ValueError(f"unknown mass convention {convention!r}")

    def log_total_mass(self, convention="realized") -> float:
        if convention == "ideal":
            return 0.0
        return float(self.cum_log_keep[self.depth])

    def scaled(self, lam) -> "CantorTree":
        """The same construction with the ambient picture scaled by lam."""
        return CantorTree(self.schedules, self.depth, seed=self.seed, scale=self.scale * lam)

    # -- node access ------------------------------------------------------

    def node(self, path=()) -> "TreeNode":
        path = tuple(int(j) for j in path)
        if len(path) > self.depth:
            raise ValueError(f"path {path} deeper than tree depth {self.depth}")
        for g, j in enumerate(path, start=1):
            if not (0 <= j < self.branching(g)):
                raise ValueError(f"path entry {j} out of range at generation {g}")
        return TreeNode(self, path)

    @property
    def root(self) -> "TreeNode":
        return self.node(())

    def node_index(self, path) -> int:
        """Mixed-radix rank of a node among its generation."""
        idx = 0
        for g, j in enumerate(path, start=1):
            idx = idx * self.branching(g) + j
        return idx

    def paths_at(self, generation):
        """All paths of a generation, in index order."""

        def rec(prefix, g):
            if g == generation:
                yield prefix
                return
            for j in range(self.branching(g + 1)):
                yield from rec(prefix + (j,), g + 1)

        yield from rec((), 0)

    def realize(self, seed=None, samples_per_leaf=1):
        """Materialize centers and leaf atoms; cached on the tree."""
        from .realization import CantorRealization  # local import, avoids cycle
        seed = self.seed if seed is None else int(seed)
        if (self._realization is None or self._realization.seed != seed
                or self._realization.samples_per_leaf != samples_per_leaf):
            self._realization = CantorRealization(self, seed, samples_per_leaf)
        return self._realization

    def to_json(self, max_nodes=100_000) -> str:
        """Export per-node logs: {"path", "s_log", "t_log", "mass_log"}."""
        total = sum(self.n_nodes(g) for g in range(self.depth + 1))
        if total > max_nodes:
            raise ValueError(f"{total} nodes exceed the export cap of {max_nodes}")
        nodes = []
        for g in range(self.depth + 1):
            log_s = self.log_radius(SOURCE, g)
            log_t = self.log_radius(TARGET, g)
            log_m = self.log_mass(g)
            for path in self.paths_at(g):
                nodes.append({"path": list(path), "s_log": log_s, "t_log": log_t,
                              "mass_log": log_m})
        doc = {"K": self.K, "depth": self.depth, "seed": self.seed, "scale": self.scale,
               "nodes": nodes}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class TreeNode:
    """A node identified by its path; all numbers derived from the tree."""

    tree: CantorTree
    path: tuple

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def log_source_radius(self) -> float:
        return self.tree.log_radius(SOURCE, self.depth)

    @property
    def log_target_radius(self) -> float:
        return self.tree.log_radius(TARGET, self.depth)

    @property
    def source_gen_radius(self) -> float:
        return math.exp(self.log_source_radius)

    @property
    def target_gen_radius(self) -> float:
        return math.exp(self.log_target_radius)

    @property
    def source_protect_radius(self) -> float:
        return math.exp(self.tree.log_protect_radius(SOURCE, self.depth))

    @property
    def target_protect_radius(self) -> float:
        return math.exp(self.tree.log_protect_radius(TARGET, self.depth))

    @property
    def log_mass(self) -> float:
        return self.tree.log_mass(self.depth)

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)

    def log_radius(self, side) -> float:
        return self.tree.log_radius(side, self.depth)

    def children(self):
        if self.depth == self.tree.depth:
            return []
        m = self.tree.branching(self.depth + 1)
        return [TreeNode(self.tree, self.path + (j,)) for j in range(m)]

    def center(self, side) -> np.ndarray:
        """Absolute center; requires tree.realize() first."""
        real = self.tree._realization
        if real is None:
            raise ConstructionError("centers not realized; call tree.realize() first")
        return real.node_center(side, self.path)


def build_tree(schedules, depth, seed=0, scale=1.0) -> CantorTree:
    """Validate a schedule prefix and return the (lazy) tree.

    Deterministic: radii and masses are pure products of the schedule; the
    seed only affects later center realization.
    """
    return CantorTree(schedules, depth, seed=seed, scale=scale)


# -- disk packing ----------------------------------------------------------


def pack_disks(M, rho, seed=0):
    """Centers of M pairwise disjoint disks of radius rho in the unit disk.

    Hex-first greedy: lattice with spacing 2*rho, rotated by a seeded angle,
    candidates sorted by distance from the origin.  Tangency is accepted to
    within 1e-12 (the classical 7-disk packing at rho = 1/3 is tangent).
    """
    if M < 1 or int(M) != M:
        raise PackingError("M must be a positive integer")
    if not (0.0 < rho <= 1.0):
        raise PackingError(f"radius fraction rho = {rho} must lie in (0, 1]")
    if M * rho * rho > 1.0 + _SMALL_TOL:
        raise PackingError(
            f"area bound violated: M*rho^2 = {M * rho * rho:.6g} > 1")
    if M == 1:
        return np.zeros((1, 2))
    if rho > 0.5:
        raise PackingError(f"no two disjoint disks of radius {rho} > 1/2 fit in the unit disk")

    u = 2.0 * rho
    theta = np.random.default_rng(seed).uniform(0.0, np.pi / 3.0)
    reach = max(4, int(math.ceil(math.sqrt(2.0 * M))) + 2)
    reach_cap = int(math.ceil(1.0 / u)) + 2
    while True:
        ij = np.arange(-reach, reach + 1)
        i, j = np.meshgrid(ij, ij)
        x = u * (i + 0.5 * j).ravel()
        y = u * (math.sqrt(3.0) / 2.0) * j.ravel()
        norms = np.hypot(x, y)
        # grid of half-width `reach` surely holds every lattice point with
        # norm <= u * reach / sqrt(2); only trust candidates inside that
        safe = min(1.0 - rho + _SMALL_TOL, u * reach / math.sqrt(2.0))
        keep = norms <= safe
        if np.count_nonzero(keep) >= M or reach >= reach_cap:
            break
        reach = min(2 * reach, reach_cap)
    x, y, norms = x[keep], y[keep], norms[keep]
    c, s = math.cos(theta), math.sin(theta)
    pts = np.stack([c * x - s * y, s * x + c * y], axis=1)
    order = np.lexsort((np.round(np.arctan2(pts[:, 1], pts[:, 0]), 9),
                        np.round(norms, 12)))
    pts = pts[order]
    if pts.shape[0] < M:
        raise PackingError(
            f"hex-lattice feasibility: only {pts.shape[0]} of {M} disks of radius "
            f"{rho:.6g} fit in the unit disk")
    return np.ascontiguousarray(pts[:M])


def realize_measure(tree, side, samples_per_leaf=1, seed=None) -> PlanarMeasure:
    """Atoms uniformly sampled in each leaf generating disk of one side.

    Each leaf's atoms share equal weights summing to the leaf mass
    prod(R_k^2), so the total mass is prod(1 - eps_n) exactly.
    """
    real = tree.realize(seed=seed, samples_per_leaf=samples_per_leaf)
    return real.measure(side)


# -- JSON schedule schema ---------------------------------------------------


class ConfigError(ValueError):
    """Invalid run configuration."""


def _resolve_multiplier(dspec, index, K):
    if isinstance(dspec, (int, float)) and not isinstance(dspec, bool):
        return float(dspec)
    if dspec in ("harmonic", "example2"):
        return (index + 1) / index
    if isinstance(dspec, dict) and set(dspec) == {"sharpness_q"}:
        e = sharpness_exponent(K, float(dspec["sharpness_q"]))
        return ((index + 1) / index) ** e
    raise ConfigError(
        f"level {index}: d must be a number, \"harmonic\"/\"example2\", "
        f"or {{\"sharpness_q\": q}}, got {dspec!r}")


def schedules_from_config(cfg):
    """Parse the schedule JSON schema into (schedules, depth, seed).

    Schema: {"K": number, "depth": int, "seed": int,
             "levels": [{"M": int, "eps": number, "d": <selector>}, ...]}.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    missing = {"K", "depth", "levels"} - set(cfg)
    if missing:
        raise ConfigError(f"config missing keys: {sorted(missing)}")
    try:
        K = float(cfg["K"])
        depth = int(cfg["depth"])
        seed = int(cfg.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scalar field: {exc}") from None
    levels_cfg = cfg["levels"]
    if not isinstance(levels_cfg, list) or len(levels_cfg) < depth:
        raise ConfigError(f"levels must list at least depth={depth} entries")
    schedules = []
    for i, lv in enumerate(levels_cfg, start=1):
        if not isinstance(lv, dict) or not {"M", "d"} <= set(lv):
            raise ConfigError(f"level {i}: needs keys M and d")
        d = _resolve_multiplier(lv["d"], i, K)
        try:
            m = int(lv["M"])
        except (TypeError, ValueError):
            raise ConfigError(f"level {i}: M must be an integer") from None
        try:
            if "eps" in lv and lv["eps"] is not None:
                sched = LevelSchedule.from_eps(i, m, d, float(lv["eps"]), K)
            else:
                sched = LevelSchedule(i, m, d, math.log(SMALLNESS) - math.log(d), K)
        except ConstructionError as exc:
            raise ConfigError(str(exc)) from None
        schedules.append(sched)
    return schedules, depth, seed
