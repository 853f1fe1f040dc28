"""
Conditional densities of volume along strong leaves.

Delta^u(x, y) is the infinite product of unstable Jacobian ratios along the
backward orbits of two points on a common unstable leaf; Delta^s uses the
forward orbits with the ratio inverted, so that for every direction
Delta(f x, f y) = Delta(x, y) J(x) / J(y). The product is truncated at a
depth where a fitted geometric tail (inflated 2x) drops below the
requested tolerance.

Foliated boxes saturate a transverse disk by plaques; the empirical
disintegration of volume in a box is estimated by Monte Carlo and compared
with the analytic density rho = Delta / L.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats
from scipy.spatial import cKDTree

from ph3lab.cocycle import SIGMAS, orbit_log_jacobians, oseledec_splitting, stable_frames, unstable_frames
from ph3lab.exceptions import NotOnLeaf, PlaqueCollision, TailNotCertified
from ph3lab.leaves import LeafSegment, trace_center_leaf, trace_strong_leaf
from ph3lab.torus_maps import TorusMapSpec
from ph3lab.utils import derive_seed, section, wrap_torus


logger = logging.getLogger(__name__)

NOISE_FLOOR = 1e-14
EMPTY_BIN_COUNT = 10
# Transverse directions used to build the disk: first a leaf of the first
# kind through the center, then leaves of the second kind through its points.
DISK_DIRECTIONS = {"u": ("s", "c"), "s": ("u", "c"), "c": ("s", "u")}


@dataclass(frozen=True)
class DeltaValue:
    """A truncated Jacobian-ratio product with its certified tail bound (in log)."""
    value: float
    log_value: float
    depth: int
    tail: float

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "log_value": self.log_value, "depth": self.depth, "tail": self.tail}


@dataclass(frozen=True)
class DensityProfile:
    """Delta(x, .) and the normalized density rho along one leaf segment."""
    sigma: str
    leaf: LeafSegment
    base: np.ndarray
    log_delta: np.ndarray
    depth: int
    tail: float
    normalizer: float

    @property
    def delta(self) -> np.ndarray:
        return np.exp(self.log_delta)

    @property
    def rho(self) -> np.ndarray:
        return self.delta / self.normalizer

    def integral(self) -> float:
        """Trapezoid integral of rho over the segment (1 up to rounding)."""
        return float(np.trapz(self.rho, self.leaf.arc))

    def lebesgue_ratio(self) -> np.ndarray:
        """rho times segment length: density against normalized Lebesgue."""
        return self.rho * self.leaf.length

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"arc_length": self.leaf.arc, "delta": self.delta, "rho": self.rho})

    def to_dict(self) -> Dict[str, Any]:
        ratio = self.lebesgue_ratio()
        return {
            "sigma": self.sigma,
            "base": self.base.tolist(),
            "length": self.leaf.length,
            "depth": self.depth,
            "tail": self.tail,
            "normalizer": self.normalizer,
            "ratio_range": [float(ratio.min()), float(ratio.max())],
        }


@dataclass(frozen=True)
class FoliatedBox:
    """Plaques of length >= R through the points of a transverse disk."""
    sigma: str
    center: np.ndarray
    length: float
    disk_radius: float
    side: int
    plaques: Tuple[LeafSegment, ...]
    transverse: np.ndarray  # (count, 2) arc coordinates on the disk

    @property
    def disk_spacing(self) -> float:
        return 2.0 * self.disk_radius / max(self.side - 1, 1)

    def interior(self) -> List[int]:
        """Indices of plaques not on the boundary of the disk grid."""
        if self.side < 3:
            return list(range(len(self.plaques)))
        return [
            a * self.side + b
            for a in range(1, self.side - 1)
            for b in range(1, self.side - 1)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "center": self.center.tolist(),
            "length": self.length,
            "disk_radius": self.disk_radius,
            "plaques": len(self.plaques),
            "transverse": self.transverse.tolist(),
        }


@dataclass
class Disintegration:
    """Per-plaque histogram densities of the sampled volume."""
    bin_edges: np.ndarray
    plaque_ids: List[int]
    counts: np.ndarray  # (plaques, bins)
    density: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int
    empty_bins: List[Tuple[int, int]] = field(default_factory=list)
    analytic: Optional[np.ndarray] = None

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    def l1_distances(self) -> List[float]:
        """Per-plaque L1 distance between empirical and analytic densities."""
        if self.analytic is None:
            raise ValueError("no analytic density attached")
        width = np.diff(self.bin_edges)
        return [float(np.sum(np.abs(row - ref) * width)) for row, ref in zip(self.density, self.analytic)]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p, plaque in enumerate(self.plaque_ids):
            for b, center in enumerate(self.bin_centers):
                rows.append({
                    "plaque_id": plaque,
                    "bin_center_arclength": center,
                    "density": self.density[p, b],
                    "stderr": self.stderr[p, b],
                })
        return pd.DataFrame(rows)

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "bin_edges": self.bin_edges.tolist(),
            "plaque_ids": self.plaque_ids,
            "counts": self.counts.tolist(),
            "density": self.density.tolist(),
            "stderr": self.stderr.tolist(),
            "samples": self.samples,
            "seed": self.seed,
            "empty_bins": [list(b) for b in self.empty_bins],
        }
        if self.analytic is not None:
            payload["l1"] = self.l1_distances()
        return payload


@dataclass
class UbdReport:
    """K(R) per box length and the trend verdict."""
    sigma: str
    lengths: List[float]
    constants: List[float]
    method: str
    verdict: str
    slope: Optional[float]
    seed: int
    centers: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sigma": self.sigma,
            "R": self.lengths,
            "K": self.constants,
            "method": self.method,
            "verdict": self.verdict,
            "slope": self.slope,
            "seed": self.seed,
            "centers": self.centers,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"R": self.lengths, "K": self.constants})


def _contraction_rate(torus_map: TorusMapSpec, sigma: str) -> Tuple[float, bool]:
    """|lambda^sigma_A| and whether the product runs along backward orbits."""
    rate = torus_map.linearization().exponent(sigma)
    if abs(rate) < 1e-12:
        raise ValueError(f"Direction {sigma} has zero linear exponent; no Jacobian product converges")
    return abs(rate), rate > 0


def _leaf_field(torus_map: TorusMapSpec, sigma: str, point: np.ndarray, horizon: int) -> np.ndarray:
    """Unit e_sigma at one point."""
    p = wrap_torus(point)[None, :]
    if sigma == "u":
        return unstable_frames(torus_map, p, horizon)[0, :, 0]
    if sigma == "s":
        return stable_frames(torus_map, p, horizon)[0, :, 0]
    return oseledec_splitting(torus_map, p[0], horizon, check_residuals=False).e_c


def _pair_orbit(
    torus_map: TorusMapSpec,
    sigma: str,
    points: np.ndarray,
    before: int,
    after: int,
    backward: bool,
    radius: float,
    horizon: int,
) -> np.ndarray:
    """
    Cover orbit of a batch sharing one integer recentring per step.

    Row 0 drives the recentring so relative displacements are untouched.
    On the contracting side, once every point is within `radius` of row 0,
    offsets are projected onto the e_sigma line through row 0 after each
    step; rounding drift along the expanding directions is removed at the
    cost of a curvature error of order radius^2.

    Returns shape (before + after + 1, count, 3) ordered forward in time.
    """
    def run(step, count: int, project: bool) -> List[np.ndarray]:
        path = [points]
        for _ in range(count):
            nxt = step(path[-1], "cover")
            nxt = nxt - np.floor(nxt[0])
            offsets = nxt[1:] - nxt[0]
            if project and offsets.size and np.max(np.linalg.norm(offsets, axis=1)) < radius:
                e = _leaf_field(torus_map, sigma, nxt[0], horizon)
                nxt = np.concatenate([nxt[:1], nxt[0] + np.outer(offsets @ e, e)])
            path.append(nxt)
        return path

    back = run(torus_map.inverse_evaluate, before, backward)
    ahead = run(torus_map.evaluate, after, not backward)
    return np.stack(back[::-1] + ahead[1:])


def _certify_tail(terms: np.ndarray) -> float:
    """Geometric tail bound (inflated 2x) from the envelope of the deepest terms."""
    envelope = np.max(np.abs(terms), axis=1) if terms.ndim == 2 else np.abs(terms)
    if envelope[-1] <= NOISE_FLOOR:
        return 0.0
    depth = envelope.size
    idx = np.arange(depth // 2, depth)
    idx = idx[envelope[idx] > NOISE_FLOOR]
    if idx.size < 3:
        return math.inf
    fit = stats.linregress(idx.astype(float), np.log(envelope[idx]))
    if fit.slope >= 0:
        return math.inf
    ratio = math.exp(fit.slope)
    return 2.0 * float(envelope[-1]) * ratio / (1.0 - ratio)


def delta_many(
    torus_map: TorusMapSpec,
    sigma: str,
    x: Any,
    ys: Any,
    tol: float = 1e-8,
    depth: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Tuple[np.ndarray, int, float]:
    """
    log Delta^sigma(x, y) for a batch of points y on the sigma-leaf of x.

    Args:
        torus_map: Partially hyperbolic map
        sigma: "u", "s", or "c" when the center is uniformly expanded or contracted
        x: Reference point (cover coordinates)
        ys: Points on the leaf of x, shape (M, 3)
        tol: Requested tail bound in log
        depth: Fixed truncation depth (its tail bound is reported, not enforced);
            None searches upward from an estimate
        config: Optional configuration (density section)

    Returns:
        (log values (M,), depth used, certified tail bound)

    Raises:
        NotOnLeaf: If some y does not approach x along the contracting orbits
        TailNotCertified: If the fitted tail stays above tol up to the depth cap
    """
    settings = section(config, "density")
    margin = int(settings.get("frame_margin", 40))
    cap = int(settings.get("depth_cap", 120))
    growth = int(settings.get("depth_step", 4))
    leaf_tol = float(settings.get("leaf_tolerance", 1e-6))
    horizon = int(settings.get("frame_horizon", 40))
    radius = float(settings.get("center_projection_radius" if sigma == "c" else "projection_radius",
                                1e-3 if sigma == "c" else 1e-5))

    rate, backward = _contraction_rate(torus_map, sigma)
    base = np.asarray(x, dtype=float)
    targets = np.atleast_2d(np.asarray(ys, dtype=float))
    points = np.concatenate([base[None, :], targets])
    spread = float(np.max(np.linalg.norm(targets - base, axis=1), initial=0.0))

    fixed = depth is not None
    n = int(depth) if fixed else max(4, int(math.ceil(math.log(max(10.0 * spread, tol) / tol) / rate)) + 2)
    col = SIGMAS.index(sigma)
    while True:
        total = n + 2 * margin - 1
        before = margin + n if backward else margin
        pts = _pair_orbit(torus_map, sigma, points, before, total - before, backward, radius, horizon)
        logs = orbit_log_jacobians(torus_map, pts, margin)[..., col]
        if backward:
            terms = (logs[:, :1] - logs[:, 1:])[::-1]
        else:
            # contracting direction of f^-1: Jacobians of f^-1 invert the ratio
            terms = logs[:, 1:] - logs[:, :1]
        tail = _certify_tail(terms)
        if tail <= tol or fixed or n >= cap:
            break
        n = min(cap, n + growth)

    deepest = pts[margin] if backward else pts[margin + n - 1]
    apart = np.linalg.norm(deepest[1:] - deepest[0], axis=1)
    if np.any(apart > leaf_tol):
        worst = int(np.argmax(apart))
        raise NotOnLeaf(
            f"Point {targets[worst].tolist()} stays {apart[worst]:.3e} away from {base.tolist()} "
            f"after {n} contracting steps; it is not on the {sigma}-leaf"
        )
    if tail > tol and not fixed:
        raise TailNotCertified(f"Tail bound {tail:.3e} exceeds {tol:.1e} at depth cap {n}")
    return terms.sum(axis=0), n, tail


def delta(
    torus_map: TorusMapSpec,
    sigma: str,
    x: Any,
    y: Any,
    tol: float = 1e-8,
    depth: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> DeltaValue:
    """
    Delta^sigma(x, y) with a certified truncation bound; see `delta_many`.
    """
    logs, n, tail = delta_many(torus_map, sigma, x, np.asarray(y, dtype=float)[None, :], tol, depth, config)
    return DeltaValue(value=float(math.exp(logs[0])), log_value=float(logs[0]), depth=n, tail=tail)


def density_profile(
    torus_map: TorusMapSpec,
    sigma: str,
    leaf: LeafSegment,
    tol: float = 1e-8,
    config: Optional[Dict[str, Any]] = None,
) -> DensityProfile:
    """
    Delta(x, .) at every vertex of a leaf and rho = Delta / L.

    Vertices far from the base are reached through a chain of anchor points
    spaced `anchor_spacing` apart, using Delta(x, z) = Delta(x, a) Delta(a, z).

    Raises:
        NotOnLeaf, TailNotCertified: Propagated from delta_many
    """
    settings = section(config, "density")
    spacing = float(settings.get("anchor_spacing", 1.0))
    arc = leaf.arc
    log_delta = np.zeros_like(arc)
    depth = 0
    tail = 0.0

    for direction in (1.0, -1.0):
        anchor = leaf.base_index
        anchor_log = 0.0
        anchor_tail = 0.0
        while True:
            a_arc = arc[anchor]
            if direction > 0:
                cell = np.flatnonzero((arc > a_arc) & (arc <= a_arc + spacing))
            else:
                cell = np.flatnonzero((arc < a_arc) & (arc >= a_arc - spacing))
            if cell.size == 0:
                break
            logs, n, cell_tail = delta_many(
                torus_map, sigma, leaf.vertices[anchor], leaf.vertices[cell], tol, config=config
            )
            log_delta[cell] = anchor_log + logs
            depth = max(depth, n)
            tail = max(tail, anchor_tail + cell_tail)
            nxt = cell[-1] if direction > 0 else cell[0]
            anchor_log = float(log_delta[nxt])
            anchor_tail += cell_tail
            anchor = int(nxt)

    normalizer = float(np.trapz(np.exp(log_delta), arc))
    profile = DensityProfile(sigma, leaf, leaf.vertices[leaf.base_index], log_delta, depth, tail, normalizer)
    logger.debug(f"Density profile on {sigma}-leaf of length {leaf.length:.3g}: L={normalizer:.6g}, tail={tail:.2e}")
    return profile


def _trace(torus_map: TorusMapSpec, sigma: str, x: np.ndarray, half: float, spacing: float, config) -> LeafSegment:
    if sigma == "c":
        return trace_center_leaf(torus_map, x, half, spacing=spacing, config=config)
    return trace_strong_leaf(torus_map, sigma, x, half, spacing=spacing, config=config)


def build_foliated_box(
    torus_map: TorusMapSpec,
    sigma: str,
    x: Any,
    R: float,
    disk_radius: float,
    plaque_count: int,
    spacing: Optional[float] = None,
    margin: float = 0.0,
    config: Optional[Dict[str, Any]] = None,
) -> FoliatedBox:
    """
    Saturate a transverse disk through x by sigma-plaques of length R.

    The disk is a side x side grid (side = round(sqrt(plaque_count))) built
    from a leaf of the first transverse kind through x and leaves of the
    second kind through its points. Plaques are centered on the disk points.

    Args:
        torus_map: Partially hyperbolic map
        sigma: Plaque direction
        x: Box center (cover coordinates)
        R: Plaque length
        disk_radius: Half-width of the disk along each transverse leaf
        plaque_count: Approximate number of plaques
        spacing: Vertex spacing of the plaques
        margin: Extra arc traced beyond each plaque end (for samplers)
        config: Optional configuration (leaves and density sections)

    Raises:
        PlaqueCollision: If two plaques come closer than half the vertex spacing
    """
    settings = section(config, "leaves")
    h = float(spacing if spacing is not None else settings.get("spacing", 1e-3))
    side = max(1, int(round(math.sqrt(plaque_count))))
    center = np.asarray(x, dtype=float)
    first, second = DISK_DIRECTIONS[sigma]

    if side == 1:
        disk = [center]
        coords = [(0.0, 0.0)]
    else:
        ticks = np.linspace(-disk_radius, disk_radius, side)
        transverse_h = min(h, disk_radius / (4 * side))
        spine = _trace(torus_map, first, center, disk_radius, transverse_h, config)
        disk, coords = [], []
        for a in ticks:
            root = spine.point_at(a)
            rib = _trace(torus_map, second, root, disk_radius, transverse_h, config)
            for b in ticks:
                disk.append(rib.point_at(b))
                coords.append((float(a), float(b)))

    half = 0.5 * R + margin
    plaques = tuple(_trace(torus_map, sigma, p, half, h, config) for p in disk)

    if len(plaques) > 1:
        vertices = np.concatenate([p.vertices for p in plaques])
        owner = np.concatenate([np.full(len(p.arc), i) for i, p in enumerate(plaques)])
        tree = cKDTree(vertices)
        close = tree.query_pairs(0.5 * h, output_type="ndarray")
        clash = close[owner[close[:, 0]] != owner[close[:, 1]]] if close.size else close
        if clash.size:
            i, j = owner[clash[0, 0]], owner[clash[0, 1]]
            raise PlaqueCollision(f"Plaques {i} and {j} come within {0.5 * h:.2e}; shrink the disk")

    box = FoliatedBox(sigma, center, R, disk_radius, side, plaques, np.array(coords))
    logger.info(f"Built {sigma}-box of length {R} with {len(plaques)} plaques around {center.tolist()}")
    return box


def empirical_disintegration(
    box: FoliatedBox,
    samples: int,
    bins: int,
    seed: int,
    tube_radius: Optional[float] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Disintegration:
    """
    Monte Carlo conditional densities of volume on the interior plaques.

    Points are drawn uniformly from a union of cubes strung along the plaques
    (accepted with probability 1/multiplicity), assigned to the nearest plaque
    vertex and binned by arc length over [-R/2, R/2].

    Args:
        box: Foliated box (ideally traced with a margin beyond R/2)
        samples: Number of proposals M
        bins: Arc-length bins per plaque
        seed: Sampler seed
        tube_radius: Half-width of the sampled region (default: disk spacing)
        config: Optional configuration (density section supplies min_samples)

    Returns:
        Disintegration with binomial error bars; bins with fewer than 10
        samples are listed in `empty_bins`

    Raises:
        ValueError: If samples is below min_samples (default 10^4)
    """
    min_samples = int(section(config, "density").get("min_samples", 10000))
    if samples < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {samples}")
    rng = np.random.default_rng(int(seed))
    radius = float(tube_radius if tube_radius is not None else box.disk_spacing)
    half_side = 1.5 * radius

    centers = []
    for plaque in box.plaques:
        ticks = np.arange(plaque.arc[0], plaque.arc[-1] + radius, radius)
        centers.append(np.stack([np.interp(ticks, plaque.arc, plaque.vertices[:, d]) for d in range(3)], axis=1))
    centers = np.concatenate(centers)
    cube_tree = cKDTree(centers)

    vertices = np.concatenate([p.vertices for p in box.plaques])
    owner = np.concatenate([np.full(len(p.arc), i) for i, p in enumerate(box.plaques)])
    arcs = np.concatenate([p.arc for p in box.plaques])
    vertex_tree = cKDTree(vertices)

    picks = rng.integers(0, len(centers), size=samples)
    proposals = centers[picks] + rng.uniform(-half_side, half_side, size=(samples, 3))
    multiplicity = np.array([len(n) for n in cube_tree.query_ball_point(proposals, half_side, p=np.inf)])
    accepted = proposals[rng.random(samples) * multiplicity < 1.0]

    _, nearest = vertex_tree.query(accepted)
    plaque_of = owner[nearest]
    arc_of = arcs[nearest]

    edges = np.linspace(-0.5 * box.length, 0.5 * box.length, bins + 1)
    interior = box.interior()
    counts = np.zeros((len(interior), bins), dtype=int)
    for row, pid in enumerate(interior):
        sel = (plaque_of == pid) & (arc_of >= edges[0]) & (arc_of <= edges[-1])
        counts[row], _ = np.histogram(arc_of[sel], bins=edges)

    width = np.diff(edges)
    totals = np.maximum(counts.sum(axis=1, keepdims=True), 1)
    prob = counts / totals
    density = prob / width
    stderr = np.sqrt(prob * (1.0 - prob) / totals) / width
    empty = [(int(interior[r]), int(b)) for r, b in zip(*np.nonzero(counts < EMPTY_BIN_COUNT))]
    if empty:
        logger.warning(f"{len(empty)} histogram bins received fewer than {EMPTY_BIN_COUNT} samples; increase M")
    logger.info(f"Disintegration: {len(accepted)} accepted of {samples} proposals over {len(interior)} plaques")
    return Disintegration(edges, interior, counts, density, stderr, samples, int(seed), empty)


def analytic_bin_density(profile: DensityProfile, edges: np.ndarray) -> np.ndarray:
    """rho restricted to [edges[0], edges[-1]], renormalized there and averaged per bin."""
    arc = profile.leaf.arc
    inside = (arc >= edges[0]) & (arc <= edges[-1])
    fine = np.linspace(edges[0], edges[-1], 20 * (len(edges) - 1) + 1)
    values = np.interp(fine, arc[inside], profile.delta[inside])
    values /= np.trapz(values, fine)
    out = np.empty(len(edges) - 1)
    for b in range(len(edges) - 1):
        sel = (fine >= edges[b]) & (fine <= edges[b + 1])
        out[b] = np.trapz(values[sel], fine[sel]) / (edges[b + 1] - edges[b])
    return out


def compare_disintegration(
    torus_map: TorusMapSpec,
    box: FoliatedBox,
    result: Disintegration,
    tol: float = 1e-8,
    config: Optional[Dict[str, Any]] = None,
) -> Disintegration:
    """Attach analytic densities (sigma in {s, u}) to an empirical disintegration."""
    if box.sigma == "c":
        raise ValueError("No analytic disintegration formula along center leaves; use empirical mode")
    result.analytic = np.stack([
        analytic_bin_density(density_profile(torus_map, box.sigma, box.plaques[pid], tol, config), result.bin_edges)
        for pid in result.plaque_ids
    ])
    return result


def _trend_verdict(lengths: List[float], constants: List[float]) -> Tuple[str, Optional[float]]:
    top = max(lengths)
    pairs = [(r, k) for r, k in zip(lengths, constants) if r >= top / 10.0]
    if len(pairs) < 2:
        return "inconclusive", None
    log_r = np.log([p[0] for p in pairs])
    log_k = np.log([p[1] for p in pairs])
    slope = float(stats.linregress(log_r, log_k).slope) if np.ptp(log_k) > 0 else 0.0
    if slope > 0.05:
        return "growing", slope
    if slope < -0.05:
        return "inconclusive", slope
    return "bounded", slope


def ubd_constant(
    torus_map: TorusMapSpec,
    sigma: str,
    lengths: List[float],
    mode: str = "analytic",
    centers: int = 2,
    seed: int = 0,
    config: Optional[Dict[str, Any]] = None,
) -> UbdReport:
    """
    Estimate K(R) = max over plaques of max(sup ratio, sup 1/ratio).

    Args:
        torus_map: Partially hyperbolic map
        sigma: Plaque direction; analytic mode needs "s" or "u"
        lengths: Box lengths R
        mode: "analytic" (rho times length) or "empirical" (histograms)
        centers: Random box centers per R
        seed: Master seed; center j uses derive_seed(seed, j)
        config: Optional configuration (density section)

    Returns:
        UbdReport with the trend verdict over the top decade of R
    """
    if mode not in ("analytic", "empirical"):
        raise ValueError(f"mode must be 'analytic' or 'empirical'; got {mode!r}")
    if mode == "analytic" and sigma not in ("s", "u"):
        raise ValueError("Analytic densities exist only along strong leaves; use empirical mode for sigma=c")
    settings = section(config, "density")
    spacing = float(settings.get("ubd_spacing", 0.02))
    plaques = int(settings.get("ubd_plaques", 1 if mode == "analytic" else 9))
    disk_radius = float(settings.get("ubd_disk_radius", 0.02))
    tol = float(settings.get("ubd_tolerance", 1e-6))
    samples = int(settings.get("ubd_samples", 200000))
    bins = int(settings.get("ubd_bins", 20))

    points = np.random.default_rng(int(seed)).random((centers, 3))
    constants = []
    for R in lengths:
        worst = 1.0
        for j, center in enumerate(points):
            box = build_foliated_box(
                torus_map, sigma, center, R, disk_radius, plaques, spacing,
                margin=0.0 if mode == "analytic" else 2.0 * disk_radius, config=config,
            )
            if mode == "analytic":
                for plaque in box.plaques:
                    ratio = density_profile(torus_map, sigma, plaque.window(-0.5 * R, 0.5 * R), tol, config)
                    values = ratio.lebesgue_ratio()
                    worst = max(worst, float(values.max()), float(1.0 / values.min()))
            else:
                hist = empirical_disintegration(box, samples, bins, derive_seed(seed, j), config=config)
                filled = hist.density[hist.counts >= EMPTY_BIN_COUNT] * R
                if filled.size:
                    worst = max(worst, float(filled.max()), float(1.0 / filled.min()))
        constants.append(worst)
        logger.info(f"K({R}) = {worst:.6f} for {sigma}-boxes of {torus_map.name} ({mode})")

    verdict, slope = _trend_verdict(list(lengths), constants)
    return UbdReport(sigma, [float(r) for r in lengths], constants, mode, verdict, slope, int(seed), centers)
