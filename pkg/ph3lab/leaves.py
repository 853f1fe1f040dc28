"""
One-dimensional invariant leaves as polylines in the universal cover.

Strong leaves are grown by pushing a short seed segment forward (or backward
for stable leaves) with adaptive midpoint insertion; center leaves are
integrated along the estimated center field. Geometry helpers measure how
intrinsic leaf distance compares with ambient distance at large scale.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ph3lab.cocycle import oseledec_splitting, stable_frames, unstable_frames
from ph3lab.exceptions import (
    GeometryInvariantError,
    HorizonTooSmall,
    InsufficientScale,
    TangencyViolation,
)
from ph3lab.torus_maps import TorusMapSpec
from ph3lab.utils import canonical_sign, section, torus_displacement, wrap_torus


logger = logging.getLogger(__name__)

MAX_REFINEMENTS = 64


@dataclass(frozen=True)
class LeafSegment:
    """
    Arc-length parametrized polyline approximating a piece of a leaf.

    `arc` is signed arc length measured from the base vertex, so
    arc[base_index] == 0 and arc is increasing.
    """
    sigma: str
    base: np.ndarray
    vertices: np.ndarray
    arc: np.ndarray
    base_index: int
    spacing: float
    horizon: int
    linear_direction: np.ndarray
    map_name: str = "custom"
    tangency_defect: float = 0.0

    @property
    def length(self) -> float:
        return float(self.arc[-1] - self.arc[0])

    @property
    def reach(self) -> Tuple[float, float]:
        """Arc length available on the negative and positive sides of the base."""
        return float(-self.arc[0]), float(self.arc[-1])

    def intrinsic_distance(self, i: int, j: int) -> float:
        return float(abs(self.arc[j] - self.arc[i]))

    def point_at(self, s: float) -> np.ndarray:
        """Cover point at signed arc length s (linear interpolation)."""
        s = float(np.clip(s, self.arc[0], self.arc[-1]))
        return np.array([np.interp(s, self.arc, self.vertices[:, d]) for d in range(3)])

    def window(self, lo: float, hi: float) -> "LeafSegment":
        """Sub-segment with signed arc in [lo, hi] (keeps one vertex beyond each end)."""
        first = max(int(np.searchsorted(self.arc, lo, side="right")) - 1, 0)
        last = min(int(np.searchsorted(self.arc, hi, side="left")) + 1, len(self.arc))
        return LeafSegment(
            self.sigma, self.base, self.vertices[first:last], self.arc[first:last],
            self.base_index - first, self.spacing, self.horizon, self.linear_direction,
            self.map_name, self.tangency_defect,
        )

    def to_frame(self) -> pd.DataFrame:
        """Plot-ready table: arc_length, x1, x2, x3."""
        return pd.DataFrame({
            "arc_length": self.arc,
            "x1": self.vertices[:, 0],
            "x2": self.vertices[:, 1],
            "x3": self.vertices[:, 2],
        })

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "base": self.base.tolist(),
            "vertices": int(len(self.arc)),
            "reach": list(self.reach),
            "spacing": self.spacing,
            "horizon": self.horizon,
            "map": self.map_name,
            "tangency_defect": self.tangency_defect,
        }


@dataclass
class QuasiIsometryReport:
    """Ratios d_W / ||x - y|| over sampled vertex pairs."""
    sigma: str
    r_min: float
    pairs: int
    max_ratio: float
    bucket_edges: List[float]
    bucket_max: List[float]
    non_increasing: bool
    samples: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 2)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "r_min": self.r_min,
            "pairs": self.pairs,
            "max_ratio": self.max_ratio,
            "bucket_edges": self.bucket_edges,
            "bucket_max": self.bucket_max,
            "non_increasing": self.non_increasing,
        }


def _linear_rate(torus_map: TorusMapSpec, sigma: str) -> float:
    linear = torus_map.linearization()
    return linear.exponent("u") if sigma == "u" else -linear.exponent("s")


def _strong_direction(torus_map: TorusMapSpec, sigma: str, points: np.ndarray, horizon: int) -> np.ndarray:
    frames = unstable_frames if sigma == "u" else stable_frames
    return canonical_sign(frames(torus_map, wrap_torus(points), horizon)[..., 0])


def _grow(
    torus_map: TorusMapSpec,
    sigma: str,
    start: np.ndarray,
    direction: np.ndarray,
    seed_length: float,
    steps: int,
    spacing: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Push the seed segment start + t*direction forward `steps` times on the cover."""
    step = (lambda p: torus_map.evaluate(p, "cover")) if sigma == "u" else (
        lambda p: torus_map.inverse_evaluate(p, "cover"))
    shifts: List[np.ndarray] = []

    def replay(params: np.ndarray, count: int) -> np.ndarray:
        pts = start + params[:, None] * direction
        for j in range(count):
            pts = step(pts) - shifts[j]
        return pts

    params = np.array([-seed_length, 0.0, seed_length])
    pts = start + params[:, None] * direction
    for j in range(steps):
        pts = step(pts)
        zero = int(np.searchsorted(params, 0.0))
        # recentre near the origin; integer shifts commute with the lift
        shifts.append(np.floor(pts[zero]))
        pts = pts - shifts[-1]
        for _ in range(MAX_REFINEMENTS):
            gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            bad = np.flatnonzero(gaps > spacing)
            if bad.size == 0:
                break
            mids = 0.5 * (params[bad] + params[bad + 1])
            params = np.insert(params, bad + 1, mids)
            pts = np.insert(pts, bad + 1, replay(mids, j + 1), axis=0)
        else:
            raise TangencyViolation(f"Adaptive refinement did not resolve gaps at step {j + 1}")
    return params, pts


def _check_tangency(
    torus_map: TorusMapSpec,
    sigma: str,
    vertices: np.ndarray,
    samples: int,
    horizon: int,
    tolerance: float,
) -> float:
    if len(vertices) < 3:
        return 0.0
    interior = np.arange(1, len(vertices) - 1)
    if interior.size > samples:
        interior = interior[np.linspace(0, interior.size - 1, samples).astype(int)]
    left = vertices[interior] - vertices[interior - 1]
    right = vertices[interior + 1] - vertices[interior]
    h1 = np.linalg.norm(left, axis=1)[:, None]
    h2 = np.linalg.norm(right, axis=1)[:, None]
    # second-order derivative on a non-uniform grid
    chords = (h1 ** 2 * right + h2 ** 2 * left) / (h1 * h2 * (h1 + h2))
    chords /= np.linalg.norm(chords, axis=1, keepdims=True)
    if sigma == "c":
        fields = oseledec_splitting(torus_map, wrap_torus(vertices[interior]), horizon, check_residuals=False).e_c
    else:
        fields = _strong_direction(torus_map, sigma, vertices[interior], horizon)
    cosines = np.clip(np.abs(np.sum(chords * fields, axis=1)), 0.0, 1.0)
    angles = np.arccos(cosines)
    worst = int(np.argmax(angles))
    if angles[worst] > tolerance:
        raise TangencyViolation(
            f"Vertex {interior[worst]} at {vertices[interior[worst]].tolist()} deviates "
            f"{angles[worst]:.3e} rad from e_{sigma} (tolerance {tolerance:.1e}); reduce the spacing"
        )
    return float(angles[worst])


def _assemble(
    torus_map: TorusMapSpec,
    sigma: str,
    base: np.ndarray,
    pts: np.ndarray,
    zero: int,
    R: float,
    spacing: float,
    horizon: int,
) -> LeafSegment:
    pts = pts - np.round(pts[zero] - base)
    arc = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    arc = arc - arc[zero]
    direction = torus_map.linearization().direction(sigma)
    leaf = LeafSegment(sigma, base, pts, arc, zero, spacing, horizon, direction, torus_map.name)
    return leaf.window(-R, R)


def trace_strong_leaf(
    torus_map: TorusMapSpec,
    sigma: str,
    x: Any,
    R: float,
    spacing: Optional[float] = None,
    horizon: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> LeafSegment:
    """
    Trace the strong stable or unstable leaf through x.

    A seed segment along e_sigma at f^-n(x) is pushed forward n steps on the
    cover (f^-1 for sigma = "s"), inserting parameter midpoints whenever two
    consecutive vertices are further apart than the spacing.

    Args:
        torus_map: Partially hyperbolic map
        sigma: "u" or "s"
        x: Base point (cover coordinates)
        R: Arc length required on both sides of x
        spacing: Maximal vertex gap h (default from config)
        horizon: Number of push steps; None chooses it from the linear rate
        config: Optional configuration (leaves section)

    Returns:
        LeafSegment whose base vertex is x

    Raises:
        HorizonTooSmall: If the traced leaf does not reach R on both sides
        TangencyViolation: If a sampled vertex chord leaves the e_sigma cone
    """
    if sigma not in ("s", "u"):
        raise ValueError(f"strong leaves need sigma in ('s', 'u'); got {sigma!r}")
    if R <= 0:
        raise ValueError("R must be positive")
    settings = section(config, "leaves")
    h = float(spacing if spacing is not None else settings.get("spacing", 1e-3))
    max_seed = float(settings.get("seed_length", 1e-5))
    frame_horizon = int(settings.get("frame_horizon", 40))
    tolerance = float(settings.get("tangency_tolerance", 1e-2))
    samples = int(settings.get("tangency_samples", 256))
    retries = int(settings.get("horizon_retries", 4))

    base = np.asarray(x, dtype=float)
    rate = _linear_rate(torus_map, sigma)
    auto = horizon is None
    n = int(math.ceil(math.log(R / max_seed) / rate)) if auto else int(horizon)
    pull = torus_map.inverse_evaluate if sigma == "u" else torus_map.evaluate

    for attempt in range(retries if auto else 1):
        seed_length = min(max_seed, 1.5 * R * math.exp(-rate * n), 0.5 * h)
        start = wrap_torus(base)
        for _ in range(n):
            start = pull(start)
        direction = _strong_direction(torus_map, sigma, start[None, :], frame_horizon)[0]
        params, pts = _grow(torus_map, sigma, start, direction, seed_length, n, h)
        zero = int(np.flatnonzero(params == 0.0)[0])
        arcs = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        left, right = float(arcs[:zero].sum()), float(arcs[zero:].sum())
        if min(left, right) >= R:
            break
        logger.debug(f"Leaf reach ({left:.3g}, {right:.3g}) < {R} at horizon {n}, attempt {attempt + 1}")
        n += 1
    else:
        raise HorizonTooSmall(
            f"{sigma}-leaf of {torus_map.name} reaches ({left:.4g}, {right:.4g}) < R={R} at horizon {n - 1}"
        )

    leaf = _assemble(torus_map, sigma, base, pts, zero, R, h, n)
    defect = _check_tangency(torus_map, sigma, leaf.vertices, samples, frame_horizon, tolerance)
    leaf = replace(leaf, tangency_defect=defect)
    logger.info(
        f"Traced {sigma}-leaf of {torus_map.name}: {len(leaf.arc)} vertices, horizon {n}, "
        f"tangency defect {defect:.2e}"
    )
    return leaf


def trace_center_leaf(
    torus_map: TorusMapSpec,
    x: Any,
    R: float,
    spacing: Optional[float] = None,
    config: Optional[Dict[str, Any]] = None,
) -> LeafSegment:
    """
    Integrate the center field through x by Heun steps of size h/10.

    Both sides are integrated together; the direction is re-estimated at the
    predicted point and sign-aligned with the previous step.

    Raises:
        DegenerateSplitting: Propagated from frame estimation
    """
    if R <= 0:
        raise ValueError("R must be positive")
    settings = section(config, "leaves")
    h = float(spacing if spacing is not None else settings.get("center_spacing", 1e-2))
    horizon = int(settings.get("frame_horizon", 40))
    step = h / 10.0
    count = int(math.ceil(R / step))

    def field_at(points: np.ndarray, previous: np.ndarray) -> np.ndarray:
        e_c = oseledec_splitting(torus_map, wrap_torus(points), horizon, check_residuals=False).e_c
        return e_c * np.sign(np.sum(e_c * previous, axis=1))[:, None]

    base = np.asarray(x, dtype=float)
    e0 = oseledec_splitting(torus_map, wrap_torus(base), horizon, check_residuals=False).e_c
    heads = np.stack([base, base])
    directions = np.stack([e0, -e0])
    path = [heads.copy()]
    for _ in range(count):
        predictor = field_at(heads, directions)
        trial = heads + step * predictor
        corrector = field_at(trial, predictor)
        heads = heads + 0.5 * step * (predictor + corrector)
        directions = corrector
        path.append(heads.copy())

    forward = np.array([p[0] for p in path])
    backward = np.array([p[1] for p in path])[::-1]
    pts = np.concatenate([backward[:-1], forward])
    zero = count
    leaf = _assemble(torus_map, "c", base, pts, zero, R, h, horizon)
    tolerance = float(settings.get("tangency_tolerance", 1e-2))
    samples = int(settings.get("tangency_samples", 256))
    defect = _check_tangency(torus_map, "c", leaf.vertices, samples, horizon, tolerance)
    leaf = replace(leaf, tangency_defect=defect)
    logger.info(f"Traced c-leaf of {torus_map.name}: {len(leaf.arc)} vertices, step {step:.2e}")
    return leaf


def closure_return(leaf: LeafSegment, min_arc: float) -> Dict[str, float]:
    """
    Closest torus approach of the leaf to its base point beyond |arc| >= min_arc.

    Returns:
        {"distance": d, "arc": signed arc length where it occurs}
    """
    mask = np.abs(leaf.arc) >= min_arc
    idx = np.flatnonzero(mask[:-1] & mask[1:])
    if idx.size == 0:
        raise InsufficientScale(f"Leaf has no vertices beyond arc length {min_arc}")
    start = torus_displacement(leaf.base, leaf.vertices[idx])
    seg = leaf.vertices[idx + 1] - leaf.vertices[idx]
    seg_len2 = np.maximum(np.sum(seg * seg, axis=1), 1e-300)
    t = np.clip(-np.sum(start * seg, axis=1) / seg_len2, 0.0, 1.0)
    dist = np.linalg.norm(start + t[:, None] * seg, axis=1)
    best = int(np.argmin(dist))
    arc = leaf.arc[idx[best]] + t[best] * (leaf.arc[idx[best] + 1] - leaf.arc[idx[best]])
    return {"distance": float(dist[best]), "arc": float(arc)}


def _sample_pairs(count: int, samples: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    if count * (count - 1) // 2 <= samples:
        i, j = np.triu_indices(count, k=1)
        return i, j
    rng = np.random.default_rng(seed)
    i = rng.integers(0, count, size=samples)
    j = rng.integers(0, count, size=samples)
    keep = i != j
    return np.minimum(i, j)[keep], np.maximum(i, j)[keep]


def quasi_isometry_constant(
    leaf: LeafSegment,
    r_min: float,
    samples: int = 20000,
    seed: int = 0,
) -> QuasiIsometryReport:
    """
    Sup of intrinsic over ambient distance on vertex pairs at least r_min apart.

    Args:
        leaf: Traced leaf
        r_min: Minimal ambient distance of a pair
        samples: Number of random pairs (all pairs when fewer exist)
        seed: Pair-sampling seed

    Returns:
        QuasiIsometryReport with per-scale maxima over doubling buckets

    Raises:
        GeometryInvariantError: If some pair has d_W < ||x - y||
    """
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    if leaf.length < 2 * r_min:
        raise ValueError(f"Leaf length {leaf.length:.4g} is shorter than 2 * r_min")
    i, j = _sample_pairs(len(leaf.arc), samples, seed)
    ambient = np.linalg.norm(leaf.vertices[j] - leaf.vertices[i], axis=1)
    keep = ambient >= r_min
    i, j, ambient = i[keep], j[keep], ambient[keep]
    intrinsic = np.abs(leaf.arc[j] - leaf.arc[i])
    slack = 1e-12 * np.maximum(1.0, ambient)
    bad = intrinsic < ambient - slack
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise GeometryInvariantError(
            f"Intrinsic distance {intrinsic[k]:.17g} below ambient {ambient[k]:.17g} "
            f"for vertices {int(i[k])}, {int(j[k])}"
        )
    ratios = intrinsic / ambient
    edges = [r_min]
    while edges[-1] <= (ambient.max() if ambient.size else r_min):
        edges.append(edges[-1] * 2.0)
    bucket_max = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (ambient >= lo) & (ambient < hi)
        bucket_max.append(float(ratios[sel].max()) if np.any(sel) else float("nan"))
    filled = [b for b in bucket_max if not math.isnan(b)]
    non_increasing = all(b <= a + 1e-9 for a, b in zip(filled, filled[1:]))
    return QuasiIsometryReport(
        sigma=leaf.sigma,
        r_min=r_min,
        pairs=int(ratios.size),
        max_ratio=float(ratios.max()) if ratios.size else float("nan"),
        bucket_edges=edges,
        bucket_max=bucket_max,
        non_increasing=non_increasing,
        samples=np.stack([intrinsic, ambient], axis=1),
    )


def asymptotic_direction(leaf: LeafSegment, radii: List[float]) -> List[Dict[str, Any]]:
    """
    Chord directions (y - x)/||y - x|| at ambient radii along both sides.

    Angles are measured to the linear direction E^sigma_A, up to sign.
    """
    base = leaf.vertices[leaf.base_index]
    dist = np.linalg.norm(leaf.vertices - base, axis=1)
    rows = []
    for radius in radii:
        for side, indices in (("+", np.arange(leaf.base_index, len(dist))),
                              ("-", np.arange(leaf.base_index, -1, -1))):
            hits = indices[dist[indices] >= radius]
            if hits.size == 0:
                raise ValueError(f"Leaf does not reach radius {radius} on side {side}")
            y = leaf.vertices[hits[0]]
            chord = y - base
            vector = chord / np.linalg.norm(chord)
            cosine = min(1.0, abs(float(vector @ leaf.linear_direction)))
            rows.append({
                "radius": float(radius),
                "side": side,
                "chord": float(np.linalg.norm(chord)),
                "vector": vector.tolist(),
                "angle": float(math.acos(cosine)),
            })
    return rows


def large_scale_comparability(
    torus_map: TorusMapSpec,
    leaf: LeafSegment,
    k: int,
    min_distance: float,
    c_target: float = 2.0,
    samples: int = 5000,
    seed: int = 0,
) -> Dict[str, Any]:
    """
    Compare the nonlinear and linear k-step displacement of leaf pairs.

    For pairs (x, y) at distance >= min_distance reports
    ||F^k x - F^k y|| / ||A^k (x - y)|| and ||A^k (x - y)|| / (e^{k lambda} ||x - y||)
    (inverse steps for stable leaves) and the smallest scale M beyond which
    both ratios stay inside (1/c_target, c_target).

    Raises:
        InsufficientScale: If no pair qualifies or no scale satisfies the target
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    i, j = _sample_pairs(len(leaf.arc), samples, seed)
    ambient = np.linalg.norm(leaf.vertices[j] - leaf.vertices[i], axis=1)
    keep = ambient >= min_distance
    if not np.any(keep):
        raise InsufficientScale(f"No {leaf.sigma}-leaf pairs at distance >= {min_distance}")
    i, j, ambient = i[keep], j[keep], ambient[keep]
    x, y = leaf.vertices[i], leaf.vertices[j]

    linear = torus_map.linearization()
    inverse = leaf.sigma == "s"
    matrix = torus_map.linear_part.power(-torus_map.iterate * k if inverse else torus_map.iterate * k).array
    rate = -linear.exponent("s") if inverse else linear.exponent(leaf.sigma)
    step = torus_map.inverse_evaluate if inverse else torus_map.evaluate
    fx, fy = x, y
    for _ in range(k):
        fx, fy = step(fx, "cover"), step(fy, "cover")
    linear_gap = np.linalg.norm((y - x) @ matrix.T, axis=1)
    dynamic = np.linalg.norm(fy - fx, axis=1) / linear_gap
    growth = linear_gap / (math.exp(k * rate) * ambient)

    inside = (dynamic > 1 / c_target) & (dynamic < c_target) & (growth > 1 / c_target) & (growth < c_target)
    order = np.argsort(ambient)
    failing = np.flatnonzero(~inside[order])
    if failing.size == 0:
        scale = float(ambient[order[0]])
    elif failing[-1] == order.size - 1:
        raise InsufficientScale(f"Ratios leave (1/{c_target}, {c_target}) at every sampled scale")
    else:
        scale = float(ambient[order[failing[-1] + 1]])
    return {
        "sigma": leaf.sigma,
        "k": k,
        "pairs": int(ambient.size),
        "c_target": c_target,
        "dynamic_ratio": [float(dynamic.min()), float(dynamic.max())],
        "growth_ratio": [float(growth.min()), float(growth.max())],
        "scale": scale,
    }
