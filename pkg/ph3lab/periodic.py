"""
Periodic points, their periodic data, and constancy of periodic data.

Periodic points of period p solve F^p(x) = x + k on the cover. They are
found by damped Newton iteration on the residual F^p(x) - x reduced mod Z^3,
seeded from the exact solutions of the linear part and a uniform grid. When
A^p - I is singular the solutions come in circles, and a continuum
descriptor is returned instead of isolated points.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from ph3lab.cocycle import oseledec_splitting
from ph3lab.exceptions import ComplexPair, DegenerateJacobian, InsufficientScale, NewtonDiverged
from ph3lab.leaves import closure_return, trace_center_leaf
from ph3lab.torus_maps import TorusMapSpec, grid_points, integer_adjugate, integer_det
from ph3lab.utils import LATTICE_NEIGHBOURS, parallel_map, section, torus_distance, wrap_torus


logger = logging.getLogger(__name__)

DEDUPE_TOLERANCE = 1e-6
NEWTON_CHUNK = 512


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit, represented by its lexicographically smallest point."""
    point: np.ndarray
    period: int
    minimal_period: int
    lattice: Tuple[int, int, int]
    residual: float
    exponents: Optional[Tuple[float, float, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "x": self.point.tolist(),
            "k": list(self.lattice),
            "period": self.period,
            "minimal_period": self.minimal_period,
            "residual": self.residual,
            "exponents": list(self.exponents) if self.exponents is not None else None,
        }


@dataclass
class ContinuumDescriptor:
    """Periodic circles x0 + t v (t in [0, 1)) when A^p - I is singular."""
    period: int
    kernel: Tuple[int, int, int]
    base_points: List[np.ndarray]
    closure: List[Dict[str, float]] = field(default_factory=list)

    @property
    def circle_length(self) -> float:
        return float(np.linalg.norm(self.kernel))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "period": self.period,
            "kernel": list(self.kernel),
            "circle_length": self.circle_length,
            "base_points": [p.tolist() for p in self.base_points],
            "closure": self.closure,
        }


@dataclass
class PeriodicSearch:
    """Outcome of one periodic-point search."""
    period: int
    orbits: List[PeriodicOrbit]
    point_count: int
    expected_count: Optional[int]
    diverged: int
    continuum: Optional[ContinuumDescriptor] = None
    linear_check: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "period": self.period,
            "orbits": [o.to_dict() for o in self.orbits],
            "point_count": self.point_count,
            "expected_count": self.expected_count,
            "diverged": self.diverged,
            "continuum": self.continuum.to_dict() if self.continuum else None,
            "linear_check": self.linear_check,
        }


@dataclass
class PeriodicDataReport:
    """Spread of periodic exponents per direction and the constancy verdict."""
    max_period: int
    orbits: List[PeriodicOrbit]
    linear_exponents: Tuple[float, float, float]
    threshold: float
    counts: Dict[int, Dict[str, Optional[int]]]
    complex_pairs: int = 0
    diverged: int = 0
    continua: List[ContinuumDescriptor] = field(default_factory=list)

    def _matrix(self) -> np.ndarray:
        return np.array([o.exponents for o in self.orbits if o.exponents is not None]).reshape(-1, 3)

    @property
    def spread(self) -> List[float]:
        values = self._matrix()
        return (values.max(axis=0) - values.min(axis=0)).tolist() if len(values) else [0.0, 0.0, 0.0]

    @property
    def deviation(self) -> List[float]:
        values = self._matrix()
        if not len(values):
            return [0.0, 0.0, 0.0]
        return np.max(np.abs(values - np.array(self.linear_exponents)), axis=0).tolist()

    @property
    def zero_sum_defect(self) -> float:
        values = self._matrix()
        return float(np.max(np.abs(values.sum(axis=1)))) if len(values) else 0.0

    @property
    def verdict(self) -> Dict[str, str]:
        return {
            sigma: "constant" if spread <= self.threshold else "non-constant"
            for sigma, spread in zip("scu", self.spread)
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "period": self.max_period,
            "orbits": [
                {"x": o.point.tolist(), "k": list(o.lattice), "period": o.minimal_period,
                 "exponents": list(o.exponents)}
                for o in self.orbits if o.exponents is not None
            ],
            "spread": self.spread,
            "deviation": self.deviation,
            "zero_sum_defect": self.zero_sum_defect,
            "linear_exponents": list(self.linear_exponents),
            "threshold": self.threshold,
            "verdict": self.verdict,
            "counts": {str(p): c for p, c in self.counts.items()},
            "complex_pairs": self.complex_pairs,
            "diverged": self.diverged,
            "continua": [c.to_dict() for c in self.continua],
        }


def _shifted_matrix(torus_map: TorusMapSpec, period: int) -> np.ndarray:
    """Exact integer A^p - I for the map's linear part (with its iterate)."""
    power = torus_map.linear_part.power(torus_map.iterate * period)
    return np.array(power.entries, dtype=object) - np.eye(3, dtype=int).astype(object)


def linear_periodic_points(torus_map: TorusMapSpec, period: int, max_points: int = 20000) -> np.ndarray:
    """
    All solutions of (A^p - I) x in Z^3 on the torus, exactly enumerated.

    x = adj(B) k / det(B) mod 1, so the solutions are the subgroup of
    (Z / |det B|)^3 generated by the columns of adj(B), scaled by 1/det B.

    Raises:
        DegenerateJacobian: If A^p - I is singular
        ValueError: If |det(A^p - I)| exceeds max_points
    """
    shifted = _shifted_matrix(torus_map, period)
    det = integer_det(shifted)
    if det == 0:
        raise DegenerateJacobian(f"A^{period} - I is singular for {torus_map.name}")
    modulus = abs(det)
    if modulus > max_points:
        raise ValueError(f"|det(A^{period} - I)| = {modulus} exceeds max_points={max_points}")
    adj = integer_adjugate(shifted)
    generators = [tuple(int(adj[r, c]) % modulus for r in range(3)) for c in range(3)]
    seen = {(0, 0, 0)}
    frontier = [(0, 0, 0)]
    while frontier:
        nxt = []
        for v in frontier:
            for g in generators:
                w = tuple((a + b) % modulus for a, b in zip(v, g))
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    group = np.array(sorted(seen), dtype=float)
    return wrap_torus(group / det)


def _reduced_residual(fp: TorusMapSpec, pts: np.ndarray) -> np.ndarray:
    g = fp.evaluate(pts, "cover") - pts
    return g - np.round(g)


def _newton_chunk(item: Tuple[TorusMapSpec, np.ndarray, int, float]) -> Tuple[np.ndarray, np.ndarray]:
    """Damped Newton on a chunk of seeds; returns (points, residual norms)."""
    fp, seeds, max_iter, tol = item
    x = wrap_torus(np.array(seeds, dtype=float))
    r = _reduced_residual(fp, x)
    norm = np.linalg.norm(r, axis=1)
    eye = np.eye(3)
    for _ in range(max_iter):
        active = np.flatnonzero(norm > tol)
        if active.size == 0:
            break
        jac = fp.jacobian(x[active]) - eye
        step = np.einsum("nij,nj->ni", np.linalg.pinv(jac, rcond=1e-10), r[active])
        scale = np.ones(active.size)
        pending = np.ones(active.size, dtype=bool)
        for _ in range(30):
            trial = wrap_torus(x[active] - scale[:, None] * step)
            r_trial = _reduced_residual(fp, trial)
            n_trial = np.linalg.norm(r_trial, axis=1)
            accept = pending & (n_trial < norm[active])
            x[active[accept]] = trial[accept]
            r[active[accept]] = r_trial[accept]
            norm[active[accept]] = n_trial[accept]
            pending &= ~accept
            if not pending.any():
                break
            scale[pending] *= 0.5
        if pending.all():
            break
    return x, norm


def _solve(fp: TorusMapSpec, seeds: np.ndarray, config: Optional[Dict[str, Any]], jobs: int) -> Tuple[np.ndarray, int]:
    settings = section(config, "periodic")
    max_iter = int(settings.get("newton_iterations", 50))
    tol = float(settings.get("newton_tolerance", 1e-12))
    accept = float(settings.get("residual_tolerance", 1e-10))
    chunks = [
        (fp, seeds[i:i + NEWTON_CHUNK], max_iter, tol) for i in range(0, len(seeds), NEWTON_CHUNK)
    ]
    results = parallel_map(_newton_chunk, chunks, jobs)
    points = np.concatenate([r[0] for r in results]) if results else np.zeros((0, 3))
    norms = np.concatenate([r[1] for r in results]) if results else np.zeros(0)
    good = norms <= accept
    diverged = int((~good).sum())
    if diverged:
        err = NewtonDiverged(f"{diverged} of {len(seeds)} Newton seeds did not converge for {fp.name}")
        logger.warning(str(err))
    return points[good], diverged


def _dedupe(points: np.ndarray, tol: float = DEDUPE_TOLERANCE) -> np.ndarray:
    """Distinct torus points, sorted lexicographically."""
    if len(points) == 0:
        return points
    points = wrap_torus(points)
    points = points[np.lexsort(points.T[::-1])]
    tree = cKDTree(points, boxsize=1.0)
    keep = np.ones(len(points), dtype=bool)
    for i, neighbours in enumerate(tree.query_ball_point(points, tol)):
        if keep[i]:
            for j in neighbours:
                if j > i:
                    keep[j] = False
    return points[keep]


def _orbit(torus_map: TorusMapSpec, x: np.ndarray, period: int) -> np.ndarray:
    pts = [x]
    y = x
    for _ in range(1, period):
        y = torus_map.evaluate(y)
        if torus_distance(y, x) <= DEDUPE_TOLERANCE:
            break
        pts.append(y)
    return np.array(pts)


def _group_orbits(torus_map: TorusMapSpec, fp: TorusMapSpec, points: np.ndarray, period: int) -> List[PeriodicOrbit]:
    orbits: List[PeriodicOrbit] = []
    if len(points) == 0:
        return orbits
    tree = cKDTree(points, boxsize=1.0)
    assigned = np.zeros(len(points), dtype=bool)
    for i in range(len(points)):
        if assigned[i]:
            continue
        members = _orbit(torus_map, points[i], period)
        for hits in tree.query_ball_point(wrap_torus(members), DEDUPE_TOLERANCE):
            assigned[hits] = True
        rep = members[np.lexsort(members.T[::-1])[0]]
        image = fp.evaluate(rep, "cover")
        residual = float(np.linalg.norm(_reduced_residual(fp, rep[None, :])[0]))
        lattice = tuple(int(v) for v in np.round(image - rep))
        orbits.append(PeriodicOrbit(rep, period, len(members), lattice, residual))
    orbits.sort(key=lambda o: tuple(o.point))
    return orbits


def integer_kernel(shifted: np.ndarray) -> Tuple[int, int, int]:
    """Primitive integer generator of the kernel of a rank-2 integer matrix."""
    rows = [tuple(int(v) for v in row) for row in shifted]
    for a, b in itertools.combinations(rows, 2):
        v = (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])
        if any(int(c) != 0 for c in v):
            g = math.gcd(math.gcd(int(v[0]), int(v[1])), int(v[2]))
            v = [int(c) // g for c in v]
            first = next(c for c in v if c != 0)
            return tuple(c if first > 0 else -c for c in v)
    raise DegenerateJacobian("A^p - I has rank below 2; periodic set is not a union of circles")


def _line_distance(base: np.ndarray, point: np.ndarray, direction: np.ndarray) -> float:
    unit = direction / np.linalg.norm(direction)
    d = wrap_torus(point) - wrap_torus(base) + LATTICE_NEIGHBOURS
    perp = d - np.outer(d @ unit, unit)
    return float(np.min(np.linalg.norm(perp, axis=1)))


def _continuum(
    torus_map: TorusMapSpec,
    fp: TorusMapSpec,
    period: int,
    seeds: np.ndarray,
    config: Optional[Dict[str, Any]],
    jobs: int,
) -> Tuple[ContinuumDescriptor, int]:
    settings = section(config, "periodic")
    kernel = integer_kernel(_shifted_matrix(torus_map, period))
    direction = np.array(kernel, dtype=float)
    points, diverged = _solve(fp, seeds, config, jobs)
    bases: List[np.ndarray] = []
    for p in _dedupe(points):
        if all(_line_distance(b, p, direction) > DEDUPE_TOLERANCE for b in bases):
            bases.append(p)
    descriptor = ContinuumDescriptor(period, kernel, bases)
    if settings.get("trace_circles", True):
        length = descriptor.circle_length
        for base in bases[: int(settings.get("max_circles", 8))]:
            leaf = trace_center_leaf(torus_map, base, 1.25 * length, config=config)
            try:
                descriptor.closure.append(closure_return(leaf, 0.5 * length))
            except InsufficientScale as e:
                logger.warning(f"No closure measurement at {base.tolist()}: {e}")
    logger.info(
        f"{torus_map.name}: A^{period} - I singular, {len(bases)} periodic circle(s) along {list(kernel)}"
    )
    return descriptor, diverged


def find_periodic_points(
    torus_map: TorusMapSpec,
    period: int,
    seeds: Optional[Any] = None,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> PeriodicSearch:
    """
    Locate the points of period dividing p.

    Args:
        torus_map: Map to search
        period: p >= 1
        seeds: Extra Newton seeds (torus points)
        jobs: Worker count for seed chunks
        config: Optional configuration (periodic section)

    Returns:
        PeriodicSearch with orbits sorted by representative; when A^p - I is
        singular its `continuum` field describes the periodic circles and
        `orbits` lists one record per circle base point
    """
    if period < 1:
        raise ValueError("period must be >= 1")
    settings = section(config, "periodic")
    grid = int(settings.get("seed_grid", 4))
    max_points = int(settings.get("max_points", 20000))
    fp = torus_map.iterated(period)
    extra = np.atleast_2d(np.asarray(seeds, dtype=float)) if seeds is not None else np.zeros((0, 3))
    seed_set = np.concatenate([grid_points(grid), extra])

    det = integer_det(_shifted_matrix(torus_map, period))
    if det == 0:
        descriptor, diverged = _continuum(torus_map, fp, period, seed_set, config, jobs)
        orbits = []
        for base in descriptor.base_points:
            residual = float(np.linalg.norm(_reduced_residual(fp, base[None, :])[0]))
            lattice = tuple(int(v) for v in np.round(fp.evaluate(base, "cover") - base))
            orbits.append(PeriodicOrbit(base, period, len(_orbit(torus_map, base, period)), lattice, residual))
        return PeriodicSearch(period, orbits, len(orbits), None, diverged, descriptor)

    exact = linear_periodic_points(torus_map, period, max_points)
    points, diverged = _solve(fp, np.concatenate([exact, seed_set]), config, jobs)
    points = _dedupe(points)
    linear_check = None
    if torus_map.is_linear:
        tree = cKDTree(exact, boxsize=1.0)
        dist, _ = tree.query(points)
        linear_check = bool(len(points) == len(exact) and np.all(dist <= 1e-9))
    orbits = _group_orbits(torus_map, fp, points, period)
    count = sum(o.minimal_period for o in orbits)
    if count != abs(det):
        logger.warning(f"{torus_map.name}: found {count} points of period {period}, linear count is {abs(det)}")
    logger.info(f"{torus_map.name}: {len(orbits)} orbits ({count} points) of period dividing {period}")
    return PeriodicSearch(period, orbits, count, abs(det), diverged, None, linear_check)


def periodic_data(
    torus_map: TorusMapSpec,
    orbit: PeriodicOrbit,
    frames: Optional[Any] = None,
    config: Optional[Dict[str, Any]] = None,
) -> Tuple[float, float, float]:
    """
    Per-direction exponents (1/q) log|eigenvalue| of Df^q at the orbit, q the minimal period.

    Eigenvalues are matched to e_s, e_c, e_u by eigenvector angle.

    Raises:
        ComplexPair: If Df^q has a non-real eigenvalue pair
    """
    q = orbit.minimal_period
    jac = torus_map.iterated(q).jacobian(orbit.point)
    values, vectors = np.linalg.eig(jac)
    if np.any(np.abs(values.imag) > 1e-10 * np.abs(values)):
        raise ComplexPair(f"Df^{q} at {orbit.point.tolist()} has eigenvalues {values.tolist()}")
    values, vectors = values.real, vectors.real
    vectors /= np.linalg.norm(vectors, axis=0, keepdims=True)
    if frames is None:
        horizon = int(section(config, "cocycle").get("splitting_horizon", 60))
        frames = oseledec_splitting(torus_map, orbit.point, horizon, check_residuals=False)
    directions = np.stack([frames.e_s, frames.e_c, frames.e_u])
    cosines = np.abs(directions @ vectors)
    best = max(itertools.permutations(range(3)), key=lambda perm: sum(cosines[i, perm[i]] for i in range(3)))
    return tuple(float(math.log(abs(values[best[i]])) / q) for i in range(3))


def periodic_data_constancy(
    torus_map: TorusMapSpec,
    max_period: int,
    threshold: float = 1e-3,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> PeriodicDataReport:
    """
    Periodic data over all orbits of period <= max_period and its spread per direction.

    Orbits with a complex eigenvalue pair are excluded and counted.
    """
    linear = torus_map.linearization()
    report = PeriodicDataReport(max_period, [], linear.exponents, threshold, {})
    seen: List[np.ndarray] = []
    for p in range(1, max_period + 1):
        search = find_periodic_points(torus_map, p, jobs=jobs, config=config)
        report.counts[p] = {"found": search.point_count, "expected": search.expected_count}
        report.diverged += search.diverged
        if search.continuum is not None:
            report.continua.append(search.continuum)
        for orbit in search.orbits:
            if orbit.minimal_period < p and search.continuum is None:
                continue
            if any(torus_distance(orbit.point, s) <= DEDUPE_TOLERANCE for s in seen):
                continue
            seen.append(orbit.point)
            try:
                report.orbits.append(replace(orbit, exponents=periodic_data(torus_map, orbit, config=config)))
            except ComplexPair as e:
                report.complex_pairs += 1
                logger.warning(f"Excluding orbit: {e}")
    logger.info(
        f"Periodic data of {torus_map.name} up to period {max_period}: {len(report.orbits)} orbits, "
        f"spread {['%.2e' % s for s in report.spread]}, verdict {report.verdict}"
    )
    return report
