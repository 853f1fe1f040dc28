"""
Center and unstable holonomies inside center-unstable sheets.

Holonomy images are found by intersecting traced polylines: the unstable
leaf through a point is traced until it crosses the target center leaf, and
the crossing is refined by bisection on the arc-length parameter.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.spatial import cKDTree

from ph3lab.density import delta, delta_many
from ph3lab.exceptions import AmbiguousIntersection, NoIntersection
from ph3lab.leaves import LeafSegment, trace_center_leaf, trace_strong_leaf
from ph3lab.torus_maps import TorusMapSpec
from ph3lab.utils import parallel_map, section


logger = logging.getLogger(__name__)

INTERSECTION_TOLERANCE = 1e-6
BISECTION_TOLERANCE = 1e-8
D_MIN = 1.0


@dataclass(frozen=True)
class Strip:
    """
    Region of a center-unstable sheet between the center leaves of x and y.

    y is the vertex of the unstable leaf of x at signed arc `du`.
    """
    x: np.ndarray
    y: np.ndarray
    du: float
    center_x: LeafSegment
    center_y: LeafSegment

    def reversed(self) -> "Strip":
        return Strip(self.y, self.x, -self.du, self.center_y, self.center_x)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "du": self.du,
            "center_reach": [self.center_x.reach, self.center_y.reach],
        }


@dataclass(frozen=True)
class HolonomyHit:
    """Image of a point under unstable holonomy."""
    point: np.ndarray
    arc: float  # signed unstable arc from the start point
    center_arc: float  # arc on the target center leaf
    residual: float

    @property
    def length(self) -> float:
        return abs(self.arc)


@dataclass
class HolonomyReport:
    """Sampled holonomy ratios with per-scale extremes and the two-sided constant."""
    kind: str
    samples: List[Dict[str, float]] = field(default_factory=list)

    @property
    def c_hat(self) -> float:
        ratios = [s["ratio"] for s in self.samples]
        if not ratios:
            return float("nan")
        return float(max(max(ratios), 1.0 / min(ratios)))

    def scales(self) -> Dict[str, Dict[str, float]]:
        grouped: Dict[str, List[float]] = {}
        for s in self.samples:
            grouped.setdefault(f"{s['du_xy']:.6g}", []).append(s["ratio"])
        return {k: {"min": min(v), "max": max(v)} for k, v in grouped.items()}

    def spread(self) -> float:
        """max / min of the sampled ratios (segment comparability within a strip)."""
        ratios = [s["ratio"] for s in self.samples]
        return float(max(ratios) / min(ratios)) if ratios else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "samples": self.samples,
            "C_hat": self.c_hat,
            "scales": self.scales(),
            "spread": self.spread(),
        }


def _closest_on_polyline(leaf: LeafSegment, tree: cKDTree, points: np.ndarray) -> Tuple[np.ndarray, ...]:
    """
    Closest points of a polyline to a batch of points.

    Returns:
        (closest points, their arc values, distances, flag "closest point is an endpoint")
    """
    verts, arc = leaf.vertices, leaf.arc
    last = len(arc) - 1
    _, idx = tree.query(points)
    best_q = verts[idx]
    best_arc = arc[idx].astype(float)
    best_d = np.linalg.norm(points - best_q, axis=1)
    for offset in (-1, 0):
        a = np.clip(idx + offset, 0, last - 1)
        seg = verts[a + 1] - verts[a]
        t = np.clip(np.sum((points - verts[a]) * seg, axis=1) / np.sum(seg * seg, axis=1), 0.0, 1.0)
        q = verts[a] + t[:, None] * seg
        d = np.linalg.norm(points - q, axis=1)
        better = d < best_d
        best_q[better] = q[better]
        best_arc[better] = (arc[a] + t * (arc[a + 1] - arc[a]))[better]
        best_d[better] = d[better]
    at_end = (best_arc <= arc[0] + 1e-12) | (best_arc >= arc[-1] - 1e-12)
    return best_q, best_arc, best_d, at_end


def build_strip(
    torus_map: TorusMapSpec,
    x: Any,
    du: float,
    center_length: float,
    config: Optional[Dict[str, Any]] = None,
) -> Strip:
    """
    Trace the unstable leaf of x and the center leaves through x and y.

    Args:
        torus_map: Partially hyperbolic map
        x: Base point (cover coordinates)
        du: Signed unstable arc from x to y (snapped to the nearest vertex)
        center_length: Center arc required on both sides of x and y
        config: Optional configuration (holonomy and leaves sections)
    """
    settings = section(config, "holonomy")
    spacing = float(settings.get("spacing", 1e-3))
    base = np.asarray(x, dtype=float)
    unstable = trace_strong_leaf(torus_map, "u", base, abs(du) + 2 * spacing, spacing=spacing, config=config)
    j = int(np.argmin(np.abs(unstable.arc - du)))
    y = unstable.vertices[j]
    center_x = trace_center_leaf(torus_map, base, center_length, config=config)
    center_y = trace_center_leaf(torus_map, y, center_length, config=config)
    return Strip(base, y, float(unstable.arc[j]), center_x, center_y)


def unstable_holonomy(
    torus_map: TorusMapSpec,
    strip: Strip,
    z: Any,
    config: Optional[Dict[str, Any]] = None,
) -> HolonomyHit:
    """
    Slide z along its unstable leaf until it meets the center leaf of y.

    Args:
        torus_map: Partially hyperbolic map
        strip: Strip whose center leaves bound the sheet
        z: Point on the center leaf of x (cover coordinates)
        config: Optional configuration (holonomy section)

    Returns:
        HolonomyHit with the crossing and the unstable arc length d^u(z, h_u(z))

    Raises:
        NoIntersection: If the traced leaf never meets the center leaf of y
        AmbiguousIntersection: If it meets it more than once
    """
    settings = section(config, "holonomy")
    spacing = float(settings.get("spacing", 1e-3))
    tol = float(settings.get("intersection_tolerance", INTERSECTION_TOLERANCE))
    reach = float(settings.get("search_factor", 3.0)) * abs(strip.du) + float(settings.get("search_margin", 0.5))

    start = np.asarray(z, dtype=float)
    leaf = trace_strong_leaf(torus_map, "u", start, reach, spacing=spacing, config=config)
    target = strip.center_y
    tree = cKDTree(target.vertices)
    verts, arc = leaf.vertices, leaf.arc

    q, _, dist, at_end = _closest_on_polyline(target, tree, verts)
    tangent = np.diff(verts, axis=0)
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    left = np.sum((verts[:-1] - q[:-1]) * tangent, axis=1)
    right = np.sum((verts[1:] - q[1:]) * tangent, axis=1)
    capture = 10.0 * max(spacing, target.spacing)
    near = np.minimum(dist[:-1], dist[1:]) < capture
    inside = ~(at_end[:-1] | at_end[1:])
    brackets = np.flatnonzero((left * right <= 0) & near & inside)

    hits: List[HolonomyHit] = []
    for i in brackets:
        a, b = float(arc[i]), float(arc[i + 1])
        direction = tangent[i]

        def point(s: float) -> np.ndarray:
            return verts[i] + (s - a) / (b - a) * (verts[i + 1] - verts[i])

        def gap(s: float) -> float:
            p = point(s)[None, :]
            return float((p[0] - _closest_on_polyline(target, tree, p)[0][0]) @ direction)

        if gap(a) == 0.0:
            root = a
        elif gap(b) == 0.0:
            root = b
        else:
            root = optimize.bisect(gap, a, b, xtol=BISECTION_TOLERANCE)
        p = point(root)
        qp, q_arc, d, _ = _closest_on_polyline(target, tree, p[None, :])
        if d[0] <= tol:
            if hits and abs(hits[-1].arc - root) <= 2 * spacing:
                continue
            hits.append(HolonomyHit(p, root, float(q_arc[0]), float(d[0])))

    if not hits:
        raise NoIntersection(
            f"Unstable leaf of {start.tolist()} traced to arc {reach:.3g} never meets the center leaf "
            f"of {strip.y.tolist()} within {tol:.1e}; enlarge the tracing length or the center leaves"
        )
    if len(hits) > 1:
        raise AmbiguousIntersection(
            f"Unstable leaf of {start.tolist()} meets the center leaf of {strip.y.tolist()} "
            f"{len(hits)} times (arcs {[round(h.arc, 6) for h in hits]}); shrink the strip"
        )
    return hits[0]


def center_holonomy(
    torus_map: TorusMapSpec,
    x: Any,
    du: float,
    t: float,
    strip: Optional[Strip] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, float]:
    """
    Ratio d^u(h^c(x), h^c(y)) / d^u(x, y) for y at unstable arc du from x.

    h^c(x) is the center-leaf vertex nearest to center arc t from x and
    h^c(y) the crossing of the unstable leaf of h^c(x) with the center leaf of y.

    Returns:
        {"du_xy", "t", "ratio", "length"} with the snapped du and t
    """
    if strip is None:
        strip = build_strip(torus_map, x, du, 1.5 * abs(t) + 1.0, config=config)
    leaf = strip.center_x
    k = int(np.argmin(np.abs(leaf.arc - t)))
    hit = unstable_holonomy(torus_map, strip, leaf.vertices[k], config=config)
    return {
        "du_xy": abs(strip.du),
        "t": float(leaf.arc[k]),
        "ratio": hit.length / abs(strip.du),
        "length": hit.length,
    }


def _center_task(item: Tuple[TorusMapSpec, np.ndarray, float, List[float], Optional[Dict[str, Any]]]) -> List[Dict[str, float]]:
    torus_map, x, du, offsets, config = item
    strip = build_strip(torus_map, x, du, 1.5 * max(abs(t) for t in offsets) + 1.0, config=config)
    return [center_holonomy(torus_map, x, du, t, strip=strip, config=config) for t in offsets]


def center_holonomy_report(
    torus_map: TorusMapSpec,
    points: Sequence[Any],
    du_values: Sequence[float],
    offsets: Sequence[float],
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> HolonomyReport:
    """
    Sample center-holonomy ratios over base points, unstable scales and center offsets.

    Scales below d_min = 1 are skipped with a warning; the bi-Lipschitz
    statement only concerns far-apart points.
    """
    kept = [du for du in du_values if abs(du) >= D_MIN]
    if len(kept) < len(du_values):
        logger.warning(f"Ignoring unstable scales below d_min={D_MIN}: {sorted(set(du_values) - set(kept))}")
    items = [(torus_map, np.asarray(p, dtype=float), du, list(offsets), config) for p in points for du in kept]
    report = HolonomyReport("center")
    for rows in parallel_map(_center_task, items, jobs):
        report.samples.extend(rows)
    logger.info(f"Center holonomy of {torus_map.name}: {len(report.samples)} samples, C_hat={report.c_hat:.4f}")
    return report


def strip_report(
    torus_map: TorusMapSpec,
    strip: Strip,
    center_arcs: Sequence[float],
    config: Optional[Dict[str, Any]] = None,
) -> HolonomyReport:
    """Lengths of the connecting unstable segments starting at center arcs of x."""
    report = HolonomyReport("unstable")
    leaf = strip.center_x
    for s in center_arcs:
        k = int(np.argmin(np.abs(leaf.arc - s)))
        hit = unstable_holonomy(torus_map, strip, leaf.vertices[k], config=config)
        report.samples.append({
            "du_xy": abs(strip.du),
            "t": float(leaf.arc[k]),
            "ratio": hit.length / abs(strip.du),
            "length": hit.length,
        })
    return report


def holonomy_lipschitz_vs_delta(
    torus_map: TorusMapSpec,
    x: Any,
    segment: float,
    t: float,
    tol: Optional[float] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, float]:
    """
    Compare the center-holonomy stretch of a short unstable segment with Delta^c.

    The map must expand its center direction (Anosov with a weak-unstable
    center), so Delta^c is the backward product along center leaves.

    Args:
        torus_map: Anosov map whose center exponent is positive
        x: Base point
        segment: Length of the unstable segment [x, a]
        t: Center offset defining y = h(x)
        tol: Tail tolerance for Delta^c (default from config)
        config: Optional configuration (holonomy and density sections)

    Returns:
        {"segment", "t", "lipschitz", "delta_c", "comparability"}
    """
    if torus_map.linearization().exponent("c") <= 0:
        raise ValueError(f"{torus_map.name} does not expand its center direction")
    tol = float(tol if tol is not None else section(config, "holonomy").get("center_tolerance", 1e-5))
    strip = build_strip(torus_map, x, segment, 1.5 * abs(t) + 0.5, config=config)
    sample = center_holonomy(torus_map, x, segment, t, strip=strip, config=config)
    k = int(np.argmin(np.abs(strip.center_x.arc - t)))
    value = delta(torus_map, "c", strip.x, strip.center_x.vertices[k], tol, config=config)
    return {
        "segment": sample["du_xy"],
        "t": sample["t"],
        "lipschitz": sample["ratio"],
        "delta_c": value.value,
        "comparability": sample["ratio"] / value.value,
    }


def weighted_unstable_length(
    torus_map: TorusMapSpec,
    leaf: LeafSegment,
    a: float,
    b: float,
    tol: float = 1e-5,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, float]:
    """
    Integral of Delta^c(a, z) over the center-leaf arc between a and b.

    A diagnostic length along weak-unstable leaves; never used as a metric.
    """
    lo, hi = min(a, b), max(a, b)
    sel = np.flatnonzero((leaf.arc >= lo) & (leaf.arc <= hi))
    if sel.size < 2:
        raise ValueError(f"Fewer than two vertices between arcs {lo} and {hi}")
    anchor = leaf.vertices[sel[0]] if a <= b else leaf.vertices[sel[-1]]
    logs, depth, tail = delta_many(torus_map, "c", anchor, leaf.vertices[sel], tol, config=config)
    weighted = float(np.trapz(np.exp(logs), leaf.arc[sel]))
    return {
        "arc": float(leaf.arc[sel[-1]] - leaf.arc[sel[0]]),
        "weighted": weighted,
        "depth": depth,
        "tail": tail,
    }
