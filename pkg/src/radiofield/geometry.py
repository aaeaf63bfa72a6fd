"""Scene ingestion, surface point sampling, normalization, and probe placement.

Scenes are lists of triangles and axis-aligned boxes in meters.  The sampled
point cloud is normalized so the longest bounds axis spans [-1, 1]; the
world transform (uniform scale + translation) converts back to meters.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

SURFACE_EPS = 1e-9


@dataclass(frozen=True)
class Material:
    reflection_amplitude: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.reflection_amplitude <= 1.0):
            raise ValidationError(
                f"reflection_amplitude must lie in [0, 1], got {self.reflection_amplitude}"
            )


@dataclass(frozen=True)
class Box:
    vmin: tuple
    vmax: tuple
    material: Material = field(default_factory=Material)

    def __post_init__(self):
        lo, hi = np.asarray(self.vmin, float), np.asarray(self.vmax, float)
        if np.any(hi < lo):
            raise ValidationError(f"box max {self.vmax} below min {self.vmin}")

    def area(self) -> float:
        dx, dy, dz = np.asarray(self.vmax, float) - np.asarray(self.vmin, float)
        return 2.0 * (dx * dy + dy * dz + dz * dx)

    def aabb(self):
        return np.asarray(self.vmin, float), np.asarray(self.vmax, float)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        lo, hi = self.aabb()
        p = np.atleast_2d(pts)
        return np.all((p >= lo) & (p <= hi), axis=-1)


@dataclass(frozen=True)
class Triangle:
    v0: tuple
    v1: tuple
    v2: tuple
    material: Material = field(default_factory=Material)

    def area(self) -> float:
        a, b, c = (np.asarray(v, float) for v in (self.v0, self.v1, self.v2))
        return 0.5 * float(np.linalg.norm(np.cross(b - a, c - a)))

    def aabb(self):
        verts = np.array([self.v0, self.v1, self.v2], float)
        return verts.min(axis=0), verts.max(axis=0)


@dataclass
class PointCloudScene:
    """Geometry plus (after sampling/normalizing) its point cloud and transform."""

    primitives: list
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    points_m: np.ndarray | None = None   # sampled surface points, meters
    points: np.ndarray | None = None     # normalized points in [-1, 1]^3
    scale: float | None = None           # meters per normalized unit
    center: np.ndarray | None = None     # bounds center, meters
    source: dict | None = None           # canonical scene JSON dict

    def to_world(self, p_norm: np.ndarray) -> np.ndarray:
        self._require_transform()
        return np.asarray(p_norm, float) * self.scale + self.center

    def to_unit(self, p_m: np.ndarray) -> np.ndarray:
        self._require_transform()
        return (np.asarray(p_m, float) - self.center) / self.scale

    def _require_transform(self):
        if self.scale is None or self.center is None:
            raise ValidationError("scene has no normalization transform yet")

    def scene_hash(self) -> str:
        if self.source is None:
            raise ValidationError("scene has no canonical JSON source to hash")
        return hash_scene_dict(self.source)


def hash_scene_dict(scene_dict: dict) -> str:
    blob = json.dumps(scene_dict, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _canonical_scene_dict(raw: dict) -> dict:
    prims = []
    for p in raw["primitives"]:
        mat = {"reflection_amplitude": float(p.get("material", {}).get("reflection_amplitude", 0.5))}
        if p["type"] == "box":
            prims.append({
                "type": "box",
                "min": [float(v) for v in p["min"]],
                "max": [float(v) for v in p["max"]],
                "material": mat,
            })
        elif p["type"] == "triangle":
            prims.append({
                "type": "triangle",
                "v": [[float(c) for c in v] for v in p["v"]],
                "material": mat,
            })
        else:
            raise ValidationError(f"unknown primitive type {p['type']!r}")
    return {"units": "m", "primitives": prims}


def scene_from_dict(raw: dict) -> PointCloudScene:
    if "primitives" not in raw or not isinstance(raw["primitives"], list):
        raise ValidationError("scene JSON lacks a primitives list")
    canonical = _canonical_scene_dict(raw)
    prims = []
    for p in canonical["primitives"]:
        mat = Material(p["material"]["reflection_amplitude"])
        if p["type"] == "box":
            prims.append(Box(tuple(p["min"]), tuple(p["max"]), mat))
        else:
            v = p["v"]
            prims.append(Triangle(tuple(v[0]), tuple(v[1]), tuple(v[2]), mat))
    if not prims:
        raise ValidationError("scene contains zero primitives")
    los = np.array([prim.aabb()[0] for prim in prims])
    his = np.array([prim.aabb()[1] for prim in prims])
    return PointCloudScene(
        primitives=prims,
        bounds_min=los.min(axis=0),
        bounds_max=his.max(axis=0),
        source=canonical,
    )


def load_scene(path) -> PointCloudScene:
    """Parse the scene JSON file; primitives only, no point cloud yet."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed scene JSON at {path} line {exc.lineno}: {exc.msg}")
    return scene_from_dict(raw)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Allocate `total` counts proportionally to weights, exactly."""
    if weights.sum() <= 0:
        counts = np.zeros(len(weights), dtype=int)
        counts[0] = total
        return counts
    ideal = weights / weights.sum() * total
    counts = np.floor(ideal).astype(int)
    rem = total - counts.sum()
    if rem > 0:
        frac = ideal - counts
        order = np.lexsort((np.arange(len(weights)), -frac))
        counts[order[:rem]] += 1
    return counts


def _sample_triangle(rng, tri: Triangle, count: int) -> np.ndarray:
    a, b, c = (np.asarray(v, float) for v in (tri.v0, tri.v1, tri.v2))
    u = rng.random(count)
    v = rng.random(count)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)


_BOX_FACE_AXES = [(0, 1, 2), (0, 1, 2), (1, 2, 0), (1, 2, 0), (2, 0, 1), (2, 0, 1)]


def _sample_box(rng, box: Box, count: int) -> np.ndarray:
    lo, hi = box.aabb()
    ext = hi - lo
    # Face order: z=lo, z=hi, x=lo, x=hi, y=lo, y=hi (axis pairs below).
    areas = np.array([
        ext[0] * ext[1], ext[0] * ext[1],
        ext[1] * ext[2], ext[1] * ext[2],
        ext[2] * ext[0], ext[2] * ext[0],
    ])
    per_face = _largest_remainder(areas, count)
    pts = []
    for face, nf in enumerate(per_face):
        if nf == 0:
            continue
        a0, a1, fixed = _BOX_FACE_AXES[face]
        p = np.empty((nf, 3))
        p[:, a0] = lo[a0] + rng.random(nf) * ext[a0]
        p[:, a1] = lo[a1] + rng.random(nf) * ext[a1]
        p[:, fixed] = lo[fixed] if face % 2 == 0 else hi[fixed]
        pts.append(p)
    return np.concatenate(pts, axis=0) if pts else np.empty((0, 3))


def sample_point_cloud(scene: PointCloudScene, density: float, seed: int) -> PointCloudScene:
    """Area-uniform surface sampling: round(area * density) points per primitive,
    at least 1.  Per-primitive streams are seeded from (seed, index) so the result
    is deterministic regardless of evaluation order."""
    if density <= 0:
        raise ValidationError(f"density must be positive, got {density}")
    chunks = []
    for i, prim in enumerate(scene.primitives):
        count = max(1, int(round(prim.area() * density)))
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), i])))
        if isinstance(prim, Box):
            chunks.append(_sample_box(rng, prim, count))
        else:
            chunks.append(_sample_triangle(rng, prim, count))
    scene.points_m = np.concatenate(chunks, axis=0)
    return scene


def normalize_scene(scene: PointCloudScene) -> PointCloudScene:
    """Map the longest bounds axis to [-1, 1] about the bounds center."""
    if scene.points_m is None:
        raise ValidationError("sample the point cloud before normalizing")
    ext = scene.bounds_max - scene.bounds_min
    longest = float(ext.max())
    if longest <= 0:
        raise ValidationError("scene bounds are degenerate (zero extent on all axes)")
    scene.scale = longest / 2.0
    scene.center = (scene.bounds_min + scene.bounds_max) / 2.0
    scene.points = scene.to_unit(scene.points_m)
    return scene


# ---------------------------------------------------------------------------
# Probe placement
# ---------------------------------------------------------------------------


def default_probe_spacing(scene: PointCloudScene) -> float:
    return float((scene.bounds_max - scene.bounds_min).max()) / 8.0


def place_probes(scene: PointCloudScene, spacing: float) -> np.ndarray:
    """Regular grid over bounds with the given spacing (meters), converted to
    normalized coordinates.  Probes inside solid boxes are removed."""
    if spacing <= 0:
        raise ValidationError(f"probe spacing must be positive, got {spacing}")
    scene._require_transform()
    ext = scene.bounds_max - scene.bounds_min
    if np.all(spacing > ext):
        warnings.warn("probe spacing exceeds every bounds extent; placing one probe at center")
        grid = scene.center[None, :].copy()
    else:
        axes = []
        for a in range(3):
            count = int(np.floor(ext[a] / spacing)) + 1
            axes.append(scene.bounds_min[a] + np.arange(count) * spacing)
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=-1)
    keep = np.ones(len(grid), dtype=bool)
    for prim in scene.primitives:
        if isinstance(prim, Box):
            keep &= ~prim.contains(grid)
    return scene.to_unit(grid[keep])
