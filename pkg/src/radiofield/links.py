"""k-nearest-neighbor link structure between points, probes, receivers, and
transmitters, with the (distance, elevation, azimuth) geometry the model needs.

Distances use normalized coordinates; ties are broken by the lower index so
link construction is deterministic and brute-force-comparable.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

_LEAF_SIZE = 16


class KDTree:
    """Static 3-D kd-tree returning exact k-NN under (distance, index) order."""

    def __init__(self, points: np.ndarray):
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValidationError(f"KDTree expects (N, 3) points, got {self.points.shape}")
        if len(self.points) == 0:
            raise ValidationError("KDTree needs at least one point")
        idx = np.arange(len(self.points), dtype=np.int64)
        # Nodes: (axis, split_value, left, right) internal; (-1, lo, hi, -1) leaf
        # over self._order[lo:hi].
        self._order = np.empty(len(idx), dtype=np.int64)
        self._nodes = []
        self._fill = 0
        self._build(idx, 0)

    def _build(self, idx: np.ndarray, depth: int) -> int:
        node_id = len(self._nodes)
        self._nodes.append(None)
        if len(idx) <= _LEAF_SIZE:
            lo = self._fill
            hi = lo + len(idx)
            self._order[lo:hi] = np.sort(idx)
            self._fill = hi
            self._nodes[node_id] = (-1, lo, hi, -1)
            return node_id
        pts = self.points[idx]
        axis = int(np.argmax(pts.max(axis=0) - pts.min(axis=0)))
        mid = len(idx) // 2
        part = idx[np.argsort(pts[:, axis], kind="stable")]
        split = float(self.points[part[mid], axis])
        left = self._build(part[:mid], depth + 1)
        right = self._build(part[mid:], depth + 1)
        self._nodes[node_id] = (axis, split, left, right)
        return node_id

    def query(self, q: np.ndarray, k: int) -> np.ndarray:
        """Indices of the k nearest points to q, ascending by (distance, index).
        If fewer than k points exist, returns all of them."""
        q = np.asarray(q, dtype=np.float64)
        k = min(k, len(self.points))
        # Max-heap of the current best k as (-d2, -idx).
        heap: list = []

        def visit(node_id):
            axis, a, b, c = self._nodes[node_id]
            if axis == -1:
                ids = self._order[a:b]
                d2 = ((self.points[ids] - q) ** 2).sum(axis=1)
                for dist2, i in zip(d2, ids):
                    key = (-dist2, -int(i))
                    if len(heap) < k:
                        heapq.heappush(heap, key)
                    elif key > heap[0]:
                        heapq.heapreplace(heap, key)
                return
            split, left, right = a, b, c
            delta = q[axis] - split
            near, far = (right, left) if delta >= 0 else (left, right)
            visit(near)
            # A tie on the far side could still win on index, so recurse on >=.
            if len(heap) < k or delta * delta <= -heap[0][0]:
                visit(far)

        visit(0)
        best = sorted(((-d2, -i) for d2, i in heap))
        return np.array([i for _, i in best], dtype=np.int64)

    def query_many(self, qs: np.ndarray, k: int) -> np.ndarray:
        qs = np.atleast_2d(np.asarray(qs, dtype=np.float64))
        return np.stack([self.query(q, k) for q in qs])


def spherical_triplets(src: np.ndarray, dst: np.ndarray):
    """(distance, elevation-from-+z, azimuth-atan2(y,x)) and unit directions
    from src to dst; both (..., 3).  Zero-length links get theta=phi=0 and
    direction +z."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    delta = dst - src
    d = np.linalg.norm(delta, axis=-1)
    safe = np.where(d > 0, d, 1.0)
    dirs = delta / safe[..., None]
    dirs = np.where(d[..., None] > 0, dirs, np.array([0.0, 0.0, 1.0]))
    theta = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
    phi = np.arctan2(dirs[..., 1], dirs[..., 0])
    phi = np.where(phi >= np.pi, -np.pi, phi)  # atan2 returns (-pi, pi]; we use [-pi, pi)
    theta = np.where(d > 0, theta, 0.0)
    phi = np.where(d > 0, phi, 0.0)
    geom = np.stack([d, theta, phi], axis=-1)
    return geom, dirs


_DENSE_KNN_LIMIT = 4_000_000  # queries x points budget for the matrix path


def _knn_dense(points: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Exact k-NN via a full distance matrix with (distance, index) ordering;
    used when the problem is small enough that one matrix beats tree walks.
    Produces indices identical to KDTree.query, including tie-breaks."""
    # Accumulate per axis: same addition order as sum(axis) over the last
    # axis, so distances (and thus tie-breaks) match the tree path bitwise.
    d2 = (queries[:, 0, None] - points[None, :, 0]) ** 2
    d2 += (queries[:, 1, None] - points[None, :, 1]) ** 2
    d2 += (queries[:, 2, None] - points[None, :, 2]) ** 2
    n = points.shape[0]
    if k >= n:
        order = np.lexsort((np.broadcast_to(np.arange(n), d2.shape), d2), axis=1)
        return order[:, :k]
    part = np.argpartition(d2, k - 1, axis=1)[:, :k]
    pd = np.take_along_axis(d2, part, axis=1)
    order = np.lexsort((part, pd), axis=1)
    out = np.take_along_axis(part, order, axis=1)
    # argpartition selects an arbitrary subset among boundary ties; rows where
    # the k-th distance is not strict get an exact per-row resolve.
    dmax = pd.max(axis=1)
    ties = np.nonzero((d2 <= dmax[:, None]).sum(axis=1) != k)[0]
    for r in ties:
        out[r] = np.lexsort((np.arange(n), d2[r]))[:k]
    return out


def _knn_links(tree: KDTree, queries: np.ndarray, k: int):
    """k-NN index matrix.  When fewer than k candidates exist, the nearest
    candidate is repeated in front so distances stay sorted ascending, and the
    padding is flagged."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    avail = len(tree.points)
    kk = min(k, avail)
    if len(queries) * avail <= _DENSE_KNN_LIMIT:
        raw = _knn_dense(tree.points, queries, kk)
    else:
        raw = tree.query_many(queries, kk)
    padded = avail < k
    if padded:
        fill = np.repeat(raw[:, :1], k - avail, axis=1)
        raw = np.concatenate([fill, raw], axis=1)
    return raw, padded


@dataclass
class ProbeGraph:
    """Link structure: probes -> K nearest points, receivers -> n nearest probes,
    plus probe->transmitter and receiver->transmitter geometry.  All coordinates
    normalized."""

    n: int
    K: int
    probe_positions: np.ndarray      # (m, 3)
    probe_point_idx: np.ndarray      # (m, K)
    probe_point_geom: np.ndarray     # (m, K, 3)
    probe_point_dirs: np.ndarray     # (m, K, 3)
    probe_padded: bool
    tx_positions: np.ndarray         # (T, 3)
    probe_tx_geom: np.ndarray        # (T, m, 3)
    probe_tx_dirs: np.ndarray        # (T, m, 3)
    rx_positions: np.ndarray         # (R, 3)
    rx_probe_idx: np.ndarray         # (R, n)
    rx_probe_geom: np.ndarray        # (R, n, 3)
    rx_probe_dirs: np.ndarray        # (R, n, 3)
    rx_padded: bool
    rx_tx_geom: np.ndarray           # (T, R, 3)
    rx_tx_dirs: np.ndarray           # (T, R, 3), LoS directions rx -> tx
    # Receiver -> K nearest points, used by the no-probe ablation arm.
    rx_point_idx: np.ndarray | None = None
    rx_point_geom: np.ndarray | None = None
    rx_point_dirs: np.ndarray | None = None


def build_links(points: np.ndarray, probes: np.ndarray, transmitters: np.ndarray,
                receivers: np.ndarray, n: int, K: int,
                with_rx_point_links: bool = False,
                probe_links=None) -> ProbeGraph:
    """Exact nearest-neighbor link construction in normalized space.

    `transmitters` and `receivers` are normalized positions; probe->tx and
    rx->tx geometry is computed for every pair.  `probe_links` optionally
    reuses a precomputed (probe_point_idx, geom, dirs, padded) tuple, since
    probe->point links are independent of transmitters and receivers.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    probes = np.atleast_2d(np.asarray(probes, dtype=np.float64))
    transmitters = np.atleast_2d(np.asarray(transmitters, dtype=np.float64))
    receivers = np.atleast_2d(np.asarray(receivers, dtype=np.float64))
    if n < 1 or K < 1:
        raise ValidationError(f"link fan-ins must be >= 1, got n={n}, K={K}")
    if len(points) == 0 or len(probes) == 0:
        raise ValidationError("link construction needs at least one point and one probe")

    point_tree = KDTree(points)
    probe_tree = KDTree(probes)

    if probe_links is not None:
        pp_idx, pp_geom, pp_dirs, probe_padded = probe_links
    else:
        pp_idx, probe_padded = _knn_links(point_tree, probes, K)
        pp_geom, pp_dirs = spherical_triplets(probes[:, None, :], points[pp_idx])

    rp_idx, rx_padded = _knn_links(probe_tree, receivers, n)
    rp_geom, rp_dirs = spherical_triplets(receivers[:, None, :], probes[rp_idx])

    pt_geom, pt_dirs = spherical_triplets(probes[None, :, :], transmitters[:, None, :])
    rt_geom, rt_dirs = spherical_triplets(receivers[None, :, :], transmitters[:, None, :])

    graph = ProbeGraph(
        n=n, K=K,
        probe_positions=probes,
        probe_point_idx=pp_idx, probe_point_geom=pp_geom, probe_point_dirs=pp_dirs,
        probe_padded=probe_padded,
        tx_positions=transmitters,
        probe_tx_geom=pt_geom, probe_tx_dirs=pt_dirs,
        rx_positions=receivers,
        rx_probe_idx=rp_idx, rx_probe_geom=rp_geom, rx_probe_dirs=rp_dirs,
        rx_padded=rx_padded,
        rx_tx_geom=rt_geom, rx_tx_dirs=rt_dirs,
    )
    if with_rx_point_links:
        rpt_idx, _ = _knn_links(point_tree, receivers, K)
        graph.rx_point_idx = rpt_idx
        graph.rx_point_geom, graph.rx_point_dirs = spherical_triplets(
            receivers[:, None, :], points[rpt_idx]
        )
    return graph
