"""Hierarchical density clustering with noise, plus the retained hierarchy.

The pipeline is: core distances -> minimum spanning tree of the
mutual-reachability graph -> single-linkage dendrogram -> condensed tree
keeping only splits where both sides reach ``min_cluster_size`` ->
excess-of-mass selection of flat clusters. Points outside every surviving
cluster get the noise label -1.

The full condensed hierarchy (with member sets) is kept on the result
because downstream overlap statistics compare later clusters against every
node of the first iteration's tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ConfigurationError
from .neighbors import EXACT_THRESHOLD, kth_neighbor_distance

# density level used for zero-distance merges (duplicate points); chosen so
# sums of per-point contributions stay well inside float64 range
_LAMBDA_CAP = 1e12

NOISE = -1


@dataclass
class ClusterConfig:
    min_cluster_size: int
    min_samples: int

    def validate(self) -> None:
        if self.min_cluster_size < 2:
            raise ConfigurationError(
                f"min_cluster_size must be >= 2, got {self.min_cluster_size}"
            )
        if self.min_samples < 1:
            raise ConfigurationError(
                f"min_samples must be >= 1, got {self.min_samples}"
            )


@dataclass
class HierarchyNode:
    id: int
    parent: int  # -1 for the root
    lambda_birth: float
    lambda_death: float
    members: np.ndarray  # sorted point indices present at birth
    stability: float

    @property
    def member_count(self) -> int:
        return int(self.members.shape[0])


@dataclass
class ClusterResult:
    labels: np.ndarray  # n ints in [-1, K)
    hierarchy: list[HierarchyNode] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max() + 1) if self.labels.size else 0

    def cluster_members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)

    def noise_count(self) -> int:
        return int(np.count_nonzero(self.labels == NOISE))

    def hierarchy_to_json(self, include_members: bool = True) -> dict:
        nodes = []
        for node in self.hierarchy:
            obj = {
                "id": node.id,
                "parent": node.parent,
                "lambda_birth": node.lambda_birth,
                "lambda_death": node.lambda_death,
                "member_count": node.member_count,
                "stability": node.stability,
            }
            if include_members:
                obj["members"] = [int(p) for p in node.members]
            nodes.append(obj)
        return {"nodes": nodes}

    @staticmethod
    def hierarchy_from_json(obj: dict) -> list[HierarchyNode]:
        nodes = []
        for entry in obj["nodes"]:
            members = np.asarray(entry.get("members", []), dtype=np.int64)
            nodes.append(
                HierarchyNode(
                    id=int(entry["id"]),
                    parent=int(entry["parent"]),
                    lambda_birth=float(entry["lambda_birth"]),
                    lambda_death=float(entry["lambda_death"]),
                    members=members,
                    stability=float(entry["stability"]),
                )
            )
        return nodes

    def save_hierarchy(self, path: str | Path, include_members: bool = True) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            json.dump(self.hierarchy_to_json(include_members), fh, sort_keys=True)


def core_distances(
    points: np.ndarray,
    min_samples: int,
    exact_threshold: int = EXACT_THRESHOLD,
) -> np.ndarray:
    """Distance from each point to its min_samples-th nearest neighbor."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    k = min(min_samples, n - 1)
    return kth_neighbor_distance(points, k, exact_threshold=exact_threshold)


def mutual_reachability(d_ij: float, core_i: float, core_j: float) -> float:
    """Mutual reachability distance: max of the two core radii and d."""
    return max(core_i, core_j, d_ij)


def minimum_spanning_tree(
    points: np.ndarray, core: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """MST edges of the mutual-reachability graph, sorted for linkage.

    Sorting is by (weight, smaller endpoint, larger endpoint) so equal-weight
    edges merge in a fixed order.
    """
    heads, tails, weights = _kernels.prim_mst(points, core)
    lo = np.minimum(heads, tails)
    hi = np.maximum(heads, tails)
    order = np.lexsort((hi, lo, weights))
    return lo[order], hi[order], weights[order]


def build_hierarchy(
    points: np.ndarray,
    config: ClusterConfig,
    exact_threshold: int = EXACT_THRESHOLD,
) -> ClusterResult:
    """Cluster points, returning flat labels and the condensed hierarchy."""
    config.validate()
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        return ClusterResult(labels=np.full(n, NOISE, dtype=np.int64))
    core = core_distances(points, config.min_samples, exact_threshold)
    us, vs, ws = minimum_spanning_tree(points, core)
    linkage = _kernels.union_find_linkage(us, vs, ws, n)
    return _extract_clusters(linkage, n, config.min_cluster_size)


def _subtree_points(linkage: np.ndarray, n: int, start: int) -> list[int]:
    points: list[int] = []
    stack = [start]
    while stack:
        cid = stack.pop()
        if cid < n:
            points.append(cid)
        else:
            row = cid - n
            stack.append(int(linkage[row, 0]))
            stack.append(int(linkage[row, 1]))
    return points


def _condense(linkage: np.ndarray, n: int, min_cluster_size: int):
    """Prune the dendrogram to splits where both sides stay above size.

    Returns per-node parents/birth/death lists plus, for every point, the
    condensed node it fell out of and the density level where it left.
    """

    def subtree_size(cid: int) -> int:
        return 1 if cid < n else int(linkage[cid - n, 3])

    parents = [-1]
    births = [0.0]
    deaths = [0.0]
    point_node = np.zeros(n, dtype=np.int64)
    point_lambda = np.zeros(n, dtype=np.float64)

    def drop(cid: int, cnode: int, lam: float) -> None:
        for p in _subtree_points(linkage, n, cid):
            point_node[p] = cnode
            point_lambda[p] = lam

    stack = [(2 * n - 2, 0)]
    while stack:
        cid, cnode = stack.pop()
        while True:
            row = cid - n
            a = int(linkage[row, 0])
            b = int(linkage[row, 1])
            d = float(linkage[row, 2])
            lam = min(1.0 / d, _LAMBDA_CAP) if d > 0.0 else _LAMBDA_CAP
            size_a = subtree_size(a)
            size_b = subtree_size(b)
            big_a = size_a >= min_cluster_size
            big_b = size_b >= min_cluster_size
            if big_a and big_b:
                deaths[cnode] = lam
                for child in (a, b):
                    parents.append(cnode)
                    births.append(lam)
                    deaths.append(0.0)
                    stack.append((child, len(parents) - 1))
                break
            if big_a or big_b:
                keep, shed = (a, b) if big_a else (b, a)
                drop(shed, cnode, lam)
                cid = keep
                continue
            deaths[cnode] = lam
            drop(a, cnode, lam)
            drop(b, cnode, lam)
            break
    return parents, births, deaths, point_node, point_lambda


def _extract_clusters(
    linkage: np.ndarray, n: int, min_cluster_size: int
) -> ClusterResult:
    parents, births, deaths, point_node, point_lambda = _condense(
        linkage, n, min_cluster_size
    )
    n_nodes = len(parents)
    children: list[list[int]] = [[] for _ in range(n_nodes)]
    for node, parent in enumerate(parents):
        if parent >= 0:
            children[parent].append(node)

    # member sets: points falling out anywhere inside the node's subtree
    member_lists: list[list[int]] = [[] for _ in range(n_nodes)]
    for p in range(n):
        member_lists[point_node[p]].append(p)
    for node in range(n_nodes - 1, 0, -1):
        member_lists[parents[node]].extend(member_lists[node])
    members = [np.sort(np.asarray(m, dtype=np.int64)) for m in member_lists]

    # stability: every member contributes the density span it stayed inside
    stability = np.zeros(n_nodes)
    passed_down = np.zeros(n_nodes)  # members handed to surviving children
    for node in range(n_nodes):
        for child in children[node]:
            passed_down[node] += members[child].shape[0]
    for p in range(n):
        node = point_node[p]
        stability[node] += point_lambda[p] - births[node]
    for node in range(n_nodes):
        stability[node] += passed_down[node] * (deaths[node] - births[node])

    # excess-of-mass: keep a node when it beats the sum of its children;
    # the root is never selectable
    score = np.zeros(n_nodes)
    selected = np.zeros(n_nodes, dtype=bool)
    for node in range(n_nodes - 1, -1, -1):
        kids = children[node]
        if not kids:
            score[node] = stability[node]
            selected[node] = node != 0
            continue
        child_sum = float(sum(score[k] for k in kids))
        if node != 0 and stability[node] >= child_sum:
            selected[node] = True
            score[node] = stability[node]
            stack = list(kids)
            while stack:
                d = stack.pop()
                selected[d] = False
                stack.extend(children[d])
        else:
            score[node] = child_sum

    chosen = np.flatnonzero(selected)
    order = sorted(
        chosen,
        key=lambda c: (-members[c].shape[0], int(members[c][0]) if members[c].size else 0),
    )
    labels = np.full(n, NOISE, dtype=np.int64)
    for rank, node in enumerate(order):
        labels[members[node]] = rank

    hierarchy = [
        HierarchyNode(
            id=node,
            parent=parents[node],
            lambda_birth=births[node],
            lambda_death=deaths[node],
            members=members[node],
            stability=float(stability[node]),
        )
        for node in range(n_nodes)
    ]
    return ClusterResult(labels=labels, hierarchy=hierarchy)
