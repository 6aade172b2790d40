"""Realized geometry of a CantorTree: centers, leaf atoms, relative frames.

Absolute coordinates lose sibling separations once node radii drop below
~1e-16 of the coordinate magnitude (around generation 5 under the smallness
convention), so next to the flat atom cloud the realization keeps, for every
generation g, each atom's position *relative to its generation-g ancestor*.
Distances from a node center to the atoms are then assembled blockwise at the
scale of the deepest common ancestor, which is exact at every depth.
"""
from __future__ import annotations

import math

import numpy as np

from .measure import PlanarMeasure
from . import cantor


class CantorRealization:
    def __init__(self, tree, seed, samples_per_leaf=1):
        if samples_per_leaf < 1:
            raise ValueError("samples_per_leaf must be >= 1")
        depth = tree.depth
        n_leaves = tree.n_leaves
        if n_leaves > cantor.MAX_REALIZED_LEAVES:
            raise cantor.ConstructionError(
                f"{n_leaves} leaves exceed the realization cap of "
                f"{cantor.MAX_REALIZED_LEAVES}")
        for side in cantor.SIDES:
            if tree.log_radius(side, depth) < cantor._LOG_UNDERFLOW:
                raise cantor.ConstructionError(
                    "leaf radii underflow double precision; this schedule is "
                    "log-space only and cannot be realized")
        if tree.log_mass(depth) < cantor._LOG_UNDERFLOW:
            raise cantor.ConstructionError("leaf masses underflow double precision")

        self.tree = tree
        self.seed = int(seed)
        self.samples_per_leaf = int(samples_per_leaf)
        self.depth = depth
        self.n_leaves = n_leaves
        self.n_atoms = n_leaves * samples_per_leaf

        m = [tree.branching(g) for g in range(1, depth + 1)]
        self._counts = [1]
        for mg in m:
            self._counts.append(self._counts[-1] * mg)          # nodes per generation
        self._leaf_stride = [n_leaves // c for c in self._counts]  # leaves per node

        rng = np.random.default_rng(np.random.SeedSequence([self.seed & (2**32 - 1), 0xC0]))

        # one packed layout per level, rotated by a seeded angle per parent
        # (rotation preserves the packing), expanded to offsets per side
        self._offsets = {side: [None] for side in cantor.SIDES}  # index g >= 1
        for g in range(1, depth + 1):
            lv = tree.level(g)
            layout = cantor.pack_disks(lv.branching, lv.protect,
                                       seed=int(rng.integers(2**32)))
            phis = rng.uniform(0.0, 2.0 * np.pi, size=self._counts[g - 1])
            cos, sin = np.cos(phis), np.sin(phis)
            rot = np.stack([np.stack([cos, -sin], axis=-1),
                            np.stack([sin, cos], axis=-1)], axis=-2)
            units = np.einsum("pij,cj->pci", rot, layout).reshape(self._counts[g], 2)
            for side in cantor.SIDES:
                parent_radius = math.exp(tree.log_radius(side, g - 1))
                self._offsets[side].append(units * parent_radius)

        # per-leaf atom positions, as unit-disk samples shared by both sides
        s = samples_per_leaf
        if s == 1:
            unit_atoms = np.zeros((self.n_atoms, 2))
        else:
            r = np.sqrt(rng.uniform(size=self.n_atoms))
            th = rng.uniform(0.0, 2.0 * np.pi, size=self.n_atoms)
            unit_atoms = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)

        # relative frames: atom position w.r.t. its generation-g ancestor center
        self._atom_rel = {}
        for side in cantor.SIDES:
            leaf_radius = math.exp(tree.log_radius(side, depth))
            rel = [None] * (depth + 1)
            rel[depth] = unit_atoms * leaf_radius
            for g in range(depth - 1, -1, -1):
                step = np.repeat(self._offsets[side][g + 1],
                                 self._leaf_stride[g + 1] * s, axis=0)
                rel[g] = rel[g + 1] + step
            self._atom_rel[side] = rel

        leaf_mass = math.exp(tree.log_mass(depth))
        self.weights = np.full(self.n_atoms, leaf_mass / s)
        self.weights.setflags(write=False)

    # -- indexing ----------------------------------------------------------

    def node_index(self, path) -> int:
        return self.tree.node_index(path)

    def leaf_range(self, path):
        """Half-open range of leaf indices below a node."""
        idx = self.node_index(path)
        stride = self._leaf_stride[len(path)]
        return idx * stride, (idx + 1) * stride

    # -- geometry ----------------------------------------------------------

    def node_center(self, side, path) -> np.ndarray:
        """Absolute center (meaningful to ~1e-16 of the coordinate size)."""
        cantor._check_side(side)
        c = np.zeros(2)
        for g in range(1, len(path) + 1):
            c = c + self._offsets[side][g][self.node_index(path[:g])]
        return c

    def node_ball(self, side, path):
        """(absolute center, generating radius) of a node's disk."""
        return self.node_center(side, path), math.exp(
            self.tree.log_radius(side, len(path)))

    def measure(self, side) -> PlanarMeasure:
        """Flat atom cloud with absolute positions.

        Safe for brute-force oracles while sibling separations stay above
        the double-precision floor (depth <= 4 under the smallness
        convention); at greater depth use the frame-based evaluators.
        """
        cantor._check_side(side)
        return PlanarMeasure(self._atom_rel[side][0], self.weights,
                             label=f"cantor:{side}:depth{self.depth}:seed{self.seed}")

    def node_atom_distances(self, side, path) -> np.ndarray:
        """Distances from a node center to every atom, assembled blockwise.

        Atoms below the node use the node's own frame; the rest are grouped
        by the generation of the deepest common ancestor and measured in that
        ancestor's frame, so no catastrophic cancellation occurs.
        """
        cantor._check_side(side)
        d = len(path)
        s = self.samples_per_leaf
        rel = self._atom_rel[side]
        out = np.empty(self.n_atoms)
        lo_leaf, hi_leaf = self.leaf_range(path)
        lo, hi = lo_leaf * s, hi_leaf * s
        below = rel[d][lo:hi]
        out[lo:hi] = np.hypot(below[:, 0], below[:, 1])

        nrel = np.zeros(2)
        prev_lo, prev_hi = lo, hi
        for g in range(d - 1, -1, -1):
            nrel = nrel + self._offsets[side][g + 1][self.node_index(path[:g + 1])]
            blo_leaf, bhi_leaf = self.leaf_range(path[:g])
            blo, bhi = blo_leaf * s, bhi_leaf * s
            for a, b in ((blo, prev_lo), (prev_hi, bhi)):
                if a < b:
                    diff = rel[g][a:b] - nrel
                    out[a:b] = np.hypot(diff[:, 0], diff[:, 1])
            prev_lo, prev_hi = blo, bhi
        return out

    def node_eps(self, side, path, a) -> float:
        """Smoothed density of the realized measure on a node's generating ball."""
        from .gauges import psi_a
        r = math.exp(self.tree.log_radius(side, len(path)))
        dist = self.node_atom_distances(side, path)
        return float(np.sum(self.weights * psi_a(dist / r, a)) / r)

    def leaf_centers(self, side) -> np.ndarray:
        """Absolute leaf centers (one per leaf, regardless of samples)."""
        rel0 = self._atom_rel[side][0]
        s = self.samples_per_leaf
        leaf_frame = self._atom_rel[side][self.depth]
        return (rel0 - leaf_frame)[::s]
