"""
Experiment drivers composing the lab modules into end-to-end checks.

This module runs the headline experiments:
- Exponent rigidity and the exponent inequality for volume-typical points
- The epsilon sweep of the mean unstable exponent around the linear map
- Compactness of center leaves when the center exponent vanishes
- The center-exponent inequality for Anosov maps with expanding center

`ExperimentRunner` dispatches manifest kinds to these drivers and to the
single-module measurements (spectrum, splitting, leaf, density, ubd,
holonomy, periodic, qi).
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ph3lab.cocycle import SIGMAS, convergence_diagnostic, exceedance_fraction, lyapunov_spectrum, oseledec_splitting, random_points
from ph3lab.density import build_foliated_box, compare_disintegration, density_profile, empirical_disintegration, ubd_constant
from ph3lab.exceptions import LabError, VerificationFailed
from ph3lab.holonomy import center_holonomy_report, holonomy_lipschitz_vs_delta, weighted_unstable_length
from ph3lab.leaves import (
    asymptotic_direction,
    closure_return,
    large_scale_comparability,
    quasi_isometry_constant,
    trace_center_leaf,
    trace_strong_leaf,
)
from ph3lab.periodic import integer_kernel, periodic_data_constancy
from ph3lab.torus_maps import PartialHyperbolicityEstimate, TorusMapSpec, flip_conjugate, verify_partial_hyperbolicity
from ph3lab.utils import derive_seed, parallel_map, section


logger = logging.getLogger(__name__)

STDERR_FACTOR = 3.0
CLUSTER_FACTOR = 5.0
VIOLATION_VERDICTS = frozenset({"violation"})
VERDICT_RANK = {"rigid-consistent": 0, "inequality-consistent": 1, "violation": 2}


def seed_points(master_seed: int, count: int) -> np.ndarray:
    """One volume-random point per derived seed, so point i never depends on the seed count."""
    return np.stack([random_points(derive_seed(master_seed, i), 1)[0] for i in range(count)])


def _seed_task(item: Tuple[TorusMapSpec, np.ndarray, int, Optional[int], Optional[Dict[str, Any]]]) -> Tuple[np.ndarray, np.ndarray]:
    torus_map, point, n, burn_in, config = item
    report = lyapunov_spectrum(torus_map, point, n, burn_in=burn_in, config=config)
    return report.exponents, report.stderr


def seed_spectra(
    torus_map: TorusMapSpec,
    points: np.ndarray,
    n: int,
    burn_in: Optional[int] = None,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-seed QR spectra.

    Returns:
        (per-seed exponents (S, 3), per-seed block standard errors (S, 3))
    """
    items = [(torus_map, p, n, burn_in, config) for p in points]
    results = parallel_map(_seed_task, items, jobs)
    return np.stack([r[0] for r in results]), np.stack([r[1] for r in results])


def _mean_and_error(values: np.ndarray, noise: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    if len(values) >= 2:
        return values.mean(axis=0), values.std(axis=0, ddof=1) / np.sqrt(len(values))
    return values[0], noise[0]


def rigidity_verdict(exponents: Sequence[float], stderr: Sequence[float], linear: Sequence[float], floor: float) -> str:
    """Apply the 3 stderr decision rule to (s, c, u) exponents."""
    tol = np.maximum(STDERR_FACTOR * np.asarray(stderr), floor)
    diff = np.asarray(exponents) - np.asarray(linear)
    if np.all(np.abs(diff) <= tol):
        return "rigid-consistent"
    if diff[2] <= tol[2] and diff[0] >= -tol[0]:
        return "inequality-consistent"
    return "violation"


def split_clusters(values: np.ndarray, noise: np.ndarray, floor: float) -> List[np.ndarray]:
    """
    Group seeds whose unstable exponents are separated by gaps wider than
    5 times the per-seed noise.

    Returns:
        Index arrays, one per cluster, in increasing order of value
    """
    order = np.argsort(values, kind="stable")
    if len(order) < 2:
        return [order]
    gaps = np.diff(values[order])
    level = CLUSTER_FACTOR * max(float(np.median(noise)), floor)
    cuts = np.flatnonzero(gaps > level) + 1
    return np.split(order, cuts)


@dataclass
class RigidityReport:
    """Volume-typical exponents against the linear ones, with the verdict."""
    map_name: str
    linear_exponents: Tuple[float, float, float]
    exponents: np.ndarray
    stderr: np.ndarray
    per_seed: np.ndarray
    n: int
    burn_in: Optional[int]
    seed: int
    floor: float
    clusters: List[Dict[str, Any]] = field(default_factory=list)
    exceedance: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def difference(self) -> np.ndarray:
        return self.exponents - np.array(self.linear_exponents)

    @property
    def verdict(self) -> str:
        if len(self.clusters) > 1:
            return max((c["verdict"] for c in self.clusters), key=VERDICT_RANK.__getitem__)
        return rigidity_verdict(self.exponents, self.stderr, self.linear_exponents, self.floor)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.per_seed, columns=[f"lambda_{s}" for s in SIGMAS])
        frame.insert(0, "seed_index", np.arange(len(self.per_seed)))
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {
            "map": self.map_name,
            "linear_exponents": list(self.linear_exponents),
            "exponents": self.exponents.tolist(),
            "stderr": self.stderr.tolist(),
            "difference": self.difference.tolist(),
            "n": self.n,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "seeds": len(self.per_seed),
            "verdict": self.verdict,
            "clusters": self.clusters,
            "exceedance": self.exceedance,
        }


def run_rigidity(
    torus_map: TorusMapSpec,
    seeds: int,
    n: int,
    master_seed: int = 0,
    burn_in: Optional[int] = None,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> RigidityReport:
    """
    Compare volume-typical exponents of f with those of its linear part.

    Verdicts: "rigid-consistent" when every direction agrees within
    3 stderr, "inequality-consistent" when only lambda^u <= lambda^u_A and
    lambda^s >= lambda^s_A hold within 3 stderr, "violation" otherwise.
    Seeds whose unstable exponents split into separated clusters are
    reported (and judged) per cluster.
    """
    settings = section(config, "experiments")
    floor = float(settings.get("verdict_floor", 1e-8))
    points = seed_points(master_seed, seeds)
    per_seed, noise = seed_spectra(torus_map, points, n, burn_in, jobs, config)
    exponents, stderr = _mean_and_error(per_seed, noise)
    linear = torus_map.linearization().exponents
    report = RigidityReport(torus_map.name, linear, exponents, stderr, per_seed, n, burn_in, master_seed, floor)

    groups = split_clusters(per_seed[:, 2], noise[:, 2], floor)
    if len(groups) > 1:
        logger.warning(f"{torus_map.name}: per-seed unstable exponents split into {len(groups)} clusters")
        for idx in groups:
            mean, err = _mean_and_error(per_seed[idx], noise[idx])
            report.clusters.append({
                "seed_indices": idx.tolist(),
                "exponents": mean.tolist(),
                "stderr": err.tolist(),
                "verdict": rigidity_verdict(mean, err, linear, floor),
            })

    if settings.get("exceedance", True):
        n_max = int(settings.get("exceedance_n_max", 400))
        start = int(settings.get("exceedance_n", max(1, n_max // 4)))
        margin = float(settings.get("exceedance_margin", 0.05))
        for sigma in ("u", "s"):
            report.exceedance.append(exceedance_fraction(torus_map, sigma, points, start, n_max, margin, config))

    logger.info(
        f"Rigidity of {torus_map.name}: difference {report.difference.tolist()} "
        f"(stderr {stderr.tolist()}), verdict {report.verdict}"
    )
    return report


@dataclass
class SweepReport:
    """Mean unstable exponent along a one-parameter family."""
    family: str
    epsilons: List[float]
    means: List[float]
    stderr: List[float]
    n: int
    seed: int
    seeds: int
    floor: float
    symmetry: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def argmax(self) -> float:
        return self.epsilons[int(np.argmax(self.means))]

    @property
    def max_at_zero(self) -> bool:
        """The epsilon = 0 value is the maximum of the curve within 3 stderr."""
        k = self.epsilons.index(0.0)
        return all(
            self.means[k] + max(STDERR_FACTOR * float(np.hypot(self.stderr[k], e)), self.floor) >= m
            for m, e in zip(self.means, self.stderr)
        )

    @property
    def verdict(self) -> str:
        return "local-max-consistent" if self.max_at_zero else "violation"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"epsilon": self.epsilons, "lambda_u": self.means, "stderr": self.stderr})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family,
            "epsilons": self.epsilons,
            "means": self.means,
            "stderr": self.stderr,
            "argmax": self.argmax,
            "max_at_zero": self.max_at_zero,
            "verdict": self.verdict,
            "n": self.n,
            "seed": self.seed,
            "seeds": self.seeds,
            "symmetry": self.symmetry,
        }


def run_sweep(
    family: Callable[[float], TorusMapSpec],
    epsilons: Sequence[float],
    seeds: int,
    n: int,
    master_seed: int = 0,
    burn_in: Optional[int] = None,
    flip_axis: Optional[int] = 0,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> SweepReport:
    """
    Mean lambda^u over the same seed points for every epsilon of the grid.

    When `flip_axis` is set, every nonzero epsilon is re-measured on the
    coordinate-flip conjugate of f_eps, which must agree within 3 stderr;
    the mirror value at -epsilon is reported next to it when sampled.

    Raises:
        ValueError: If the grid does not contain 0
    """
    grid = sorted({float(e) for e in epsilons})
    if 0.0 not in grid:
        raise ValueError("the epsilon grid must contain 0")
    floor = float(section(config, "experiments").get("verdict_floor", 1e-8))
    points = seed_points(master_seed, seeds)

    def measure(torus_map: TorusMapSpec) -> Tuple[float, float]:
        per_seed, noise = seed_spectra(torus_map, points, n, burn_in, jobs, config)
        mean, err = _mean_and_error(per_seed, noise)
        return float(mean[2]), float(err[2])

    values = [measure(family(eps)) for eps in grid]
    name = family(grid[-1]).name
    report = SweepReport(name, grid, [v[0] for v in values], [v[1] for v in values], n, master_seed, seeds, floor)

    if flip_axis is not None:
        for eps, (mean, err) in zip(grid, values):
            if eps == 0.0:
                continue
            flipped, flipped_err = measure(flip_conjugate(family(eps), flip_axis))
            entry = {
                "epsilon": eps,
                "value": mean,
                "flipped": flipped,
                "consistent": abs(flipped - mean) <= max(STDERR_FACTOR * float(np.hypot(err, flipped_err)), floor),
            }
            if -eps in grid:
                entry["mirror"] = report.means[grid.index(-eps)]
            report.symmetry.append(entry)

    logger.info(f"Sweep of {name}: argmax at epsilon={report.argmax}, verdict {report.verdict}")
    return report


@dataclass
class CenterTopologyReport:
    """Center exponent next to the closing distance of traced center leaves."""
    map_name: str
    center_exponent: float
    stderr: float
    circle_length: float
    closure: List[Dict[str, Any]]
    decoupled: bool
    exponent_tolerance: float
    closure_tolerance: float

    @property
    def exponent_vanishes(self) -> bool:
        return abs(self.center_exponent) <= max(self.exponent_tolerance, STDERR_FACTOR * self.stderr)

    @property
    def leaves_close(self) -> bool:
        return all(c["distance"] <= self.closure_tolerance for c in self.closure)

    @property
    def verdict(self) -> Optional[str]:
        # Only families that keep the center coordinate decoupled get a verdict.
        if not self.decoupled:
            return None
        return "circles-consistent" if self.exponent_vanishes and self.leaves_close else "violation"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "map": self.map_name,
            "center_exponent": self.center_exponent,
            "stderr": self.stderr,
            "circle_length": self.circle_length,
            "closure": self.closure,
            "exponent_vanishes": self.exponent_vanishes,
            "leaves_close": self.leaves_close,
            "decoupled": self.decoupled,
            "verdict": self.verdict,
        }


def _center_axis(kernel: Tuple[int, int, int]) -> Optional[int]:
    nonzero = [i for i, v in enumerate(kernel) if v != 0]
    return nonzero[0] if len(nonzero) == 1 else None


def run_center_topology(
    torus_map: TorusMapSpec,
    seeds: int,
    n: int,
    master_seed: int = 0,
    burn_in: Optional[int] = None,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> CenterTopologyReport:
    """
    Estimate lambda^c and measure how closely center leaves return to their base.

    Raises:
        ValueError: If the linear part has no modulus-one center eigenvalue
    """
    settings = section(config, "experiments")
    linear = torus_map.linearization()
    if abs(linear.moduli[1] - 1.0) > 1e-9:
        raise ValueError(f"{torus_map.name} has center modulus {linear.moduli[1]:.6g}, not 1")
    sign = 1 if linear.eigenvalues[1] > 0 else -1
    power = torus_map.linear_part.power(torus_map.iterate)
    shifted = np.array(power.entries, dtype=object) - sign * np.eye(3, dtype=int).astype(object)
    kernel = integer_kernel(shifted)
    length = float(np.linalg.norm(kernel))

    points = seed_points(master_seed, seeds)
    per_seed, noise = seed_spectra(torus_map, points, n, burn_in, jobs, config)
    mean, err = _mean_and_error(per_seed, noise)

    closure = []
    for point in points[: int(settings.get("closure_leaves", 4))]:
        leaf = trace_center_leaf(torus_map, point, 1.25 * length, config=config)
        closure.append({"base": point.tolist(), **closure_return(leaf, 0.5 * length)})

    axis = _center_axis(kernel)
    steps = torus_map.pre_shears
    decoupled = (
        axis is not None
        and not torus_map.conjugator
        and all(axis not in (g.source, g.target) for g in steps)
    )
    report = CenterTopologyReport(
        torus_map.name, float(mean[1]), float(err[1]), length, closure, decoupled,
        float(settings.get("center_exponent_tolerance", 1e-5)),
        float(settings.get("closure_tolerance", 1e-6)),
    )
    logger.info(
        f"Center topology of {torus_map.name}: lambda_c={report.center_exponent:.3e}, "
        f"max return {max(c['distance'] for c in closure):.3e}, verdict {report.verdict}"
    )
    return report


@dataclass
class CenterInequalityReport:
    """Volume-typical center exponent of an Anosov map with expanding center."""
    map_name: str
    center_exponent: float
    stderr: float
    linear_center: float
    floor: float

    @property
    def margin(self) -> float:
        return self.linear_center - self.center_exponent

    @property
    def verdict(self) -> str:
        tol = max(STDERR_FACTOR * self.stderr, self.floor)
        if abs(self.margin) <= tol:
            return "rigid-consistent"
        return "inequality-consistent" if self.margin >= -tol else "violation"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "map": self.map_name,
            "center_exponent": self.center_exponent,
            "stderr": self.stderr,
            "linear_center": self.linear_center,
            "margin": self.margin,
            "verdict": self.verdict,
        }


def run_anosov_center_inequality(
    torus_map: TorusMapSpec,
    seeds: int,
    n: int,
    master_seed: int = 0,
    burn_in: Optional[int] = None,
    jobs: int = 1,
    config: Optional[Dict[str, Any]] = None,
) -> CenterInequalityReport:
    """
    Check lambda^c(f) <= lambda^c_A within 3 stderr.

    Raises:
        ValueError: If the linear part is not Anosov with an expanding center
    """
    linear = torus_map.linearization()
    if not linear.is_anosov or linear.exponent("c") <= 0:
        raise ValueError(f"{torus_map.name} needs an Anosov linear part with expanding center")
    floor = float(section(config, "experiments").get("verdict_floor", 1e-8))
    points = seed_points(master_seed, seeds)
    per_seed, noise = seed_spectra(torus_map, points, n, burn_in, jobs, config)
    mean, err = _mean_and_error(per_seed, noise)
    report = CenterInequalityReport(torus_map.name, float(mean[1]), float(err[1]), linear.exponent("c"), floor)
    logger.info(f"Center inequality for {torus_map.name}: margin {report.margin:.3e}, verdict {report.verdict}")
    return report


@dataclass
class ExperimentResult:
    """Outcome of one manifest run: JSON-ready result plus plot-ready tables."""
    kind: str
    verdict: Optional[str]
    result: Dict[str, Any]
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)

    @property
    def is_violation(self) -> bool:
        return self.verdict in VIOLATION_VERDICTS


class ExperimentRunner:
    """Dispatches experiment kinds to the lab modules."""

    KINDS = (
        "spectrum", "splitting", "leaf", "density", "ubd", "holonomy", "periodic",
        "rigidity", "sweep", "center-topology", "center-inequality", "qi",
    )
    # Kinds that only make sense on a certified partially hyperbolic map
    VERIFIED_KINDS = frozenset({
        "leaf", "density", "ubd", "holonomy", "periodic",
        "rigidity", "sweep", "center-topology", "center-inequality", "qi",
    })

    def __init__(self, config: Dict[str, Any], jobs: int = 1):
        """
        Initialize the runner.

        Args:
            config: Configuration dictionary (all sections are forwarded)
            jobs: Worker cap for seed-parallel work
        """
        self.config = config
        self.jobs = max(1, int(jobs))
        self.settings = config.get("experiments", {})
        self._handlers: Dict[str, Callable[..., ExperimentResult]] = {
            "spectrum": self._run_spectrum,
            "splitting": self._run_splitting,
            "leaf": self._run_leaf,
            "density": self._run_density,
            "ubd": self._run_ubd,
            "holonomy": self._run_holonomy,
            "periodic": self._run_periodic,
            "rigidity": self._run_rigidity,
            "sweep": self._run_sweep,
            "center-topology": self._run_center_topology,
            "center-inequality": self._run_center_inequality,
            "qi": self._run_qi,
        }

    def execute(
        self,
        kind: str,
        torus_map: TorusMapSpec,
        params: Dict[str, Any],
        seed: int = 0,
        family: Optional[Callable[[float], TorusMapSpec]] = None,
    ) -> ExperimentResult:
        """
        Run one experiment.

        Args:
            kind: Experiment kind (see KINDS)
            torus_map: Map under study
            params: Validated manifest parameters
            seed: Master seed
            family: Epsilon family for sweeps

        Returns:
            ExperimentResult

        Raises:
            ValueError: If the kind is unknown
            VerificationFailed: If a kind in VERIFIED_KINDS meets a map whose
                rate inequalities fail at the configured horizon
            LabError: Propagated from the lab modules
        """
        if kind not in self._handlers:
            raise ValueError(f"Unknown experiment kind {kind!r}; choose from {list(self.KINDS)}")
        logger.info(f"Running {kind} experiment on {torus_map.name} (seed {seed}, jobs {self.jobs})")
        try:
            if kind == "sweep":
                return self._run_sweep(torus_map, params, seed, family)
            if kind in self.VERIFIED_KINDS:
                self.require_partial_hyperbolicity(torus_map, params)
            return self._handlers[kind](torus_map, params, seed)
        except LabError as e:
            logger.error(f"Experiment {kind} failed: {e}")
            raise

    def require_partial_hyperbolicity(self, torus_map: TorusMapSpec, params: Dict[str, Any]) -> PartialHyperbolicityEstimate:
        """
        Certify the map before a measurement that assumes the splitting.

        The horizon and grid come from the manifest (`ph_horizon`, `grid`)
        or the experiments settings (`ph_horizon`, `ph_grid`).

        Raises:
            VerificationFailed: Propagated from verify_partial_hyperbolicity
        """
        grid = params.get("grid")
        return verify_partial_hyperbolicity(
            torus_map,
            int(self._param(params, "ph_horizon", 5)),
            int(grid if grid is not None else self.settings.get("ph_grid", 16)),
            self.config,
        )

    def _param(self, params: Dict[str, Any], key: str, default: Any) -> Any:
        value = params.get(key)
        return self.settings.get(key, default) if value is None else value

    def _points(self, params: Dict[str, Any], seed: int) -> np.ndarray:
        return seed_points(seed, int(self._param(params, "seeds", 4)))

    def _run_spectrum(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        points = self._points(params, seed)
        n = int(self._param(params, "n", 1000))
        report = lyapunov_spectrum(torus_map, points, n, params.get("burn_in"), seed, self.config)
        linear = np.array(torus_map.linearization().exponents)
        result = {
            **report.to_dict(),
            "linear_exponents": linear.tolist(),
            "difference": (report.exponents - linear).tolist(),
        }
        if params.get("convergence"):
            result["convergence"] = convergence_diagnostic(torus_map, points, n, self.config)
        frame = pd.DataFrame(report.per_seed, columns=[f"lambda_{s}" for s in SIGMAS])
        return ExperimentResult("spectrum", None, result, {"per_seed": frame})

    def _run_splitting(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        points = self._points(params, seed)
        horizon = int(self._param(params, "horizon", 60))
        frame = oseledec_splitting(torus_map, points, horizon, config=self.config)
        result: Dict[str, Any] = {"frame": frame.to_dict(), "gram": frame.gram_determinant().tolist()}
        try:
            estimate = self.require_partial_hyperbolicity(torus_map, params)
            result["partial_hyperbolicity"] = estimate.to_dict()
            verdict = "partially-hyperbolic"
        except VerificationFailed as e:
            logger.warning(f"Partial hyperbolicity not verified: {e}")
            result["partial_hyperbolicity"] = {"passed": False, "error": str(e), "sample": e.sample}
            verdict = "not-verified"
        if verdict == "partially-hyperbolic" and not frame.converged:
            logger.warning(f"Splitting of {torus_map.name} did not converge at horizon {horizon}")
            verdict = "not-converged"
        return ExperimentResult("splitting", verdict, result)

    def _leaf(self, torus_map: TorusMapSpec, sigma: str, point: np.ndarray, length: float):
        if sigma == "c":
            return trace_center_leaf(torus_map, point, length, config=self.config)
        return trace_strong_leaf(torus_map, sigma, point, length, config=self.config)

    def _run_leaf(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        sigma = str(self._param(params, "sigma", "u"))
        lengths = list(self._param(params, "R", [10.0]))
        leaf = self._leaf(torus_map, sigma, self._points(params, seed)[0], max(lengths))
        result = {"leaf": leaf.to_dict()}
        radii = params.get("radii")
        if radii:
            result["asymptotic_direction"] = asymptotic_direction(leaf, list(radii))
        return ExperimentResult("leaf", None, result, {"leaf": leaf.to_frame()})

    def _run_density(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        sigma = str(self._param(params, "sigma", "u"))
        length = max(self._param(params, "R", [4.0]))
        tol = float(self._param(params, "tolerance", 1e-8))
        point = self._points(params, seed)[0]
        tables: Dict[str, pd.DataFrame] = {}
        result: Dict[str, Any] = {}
        if sigma != "c":
            profile = density_profile(torus_map, sigma, self._leaf(torus_map, sigma, point, length), tol, self.config)
            result["profile"] = profile.to_dict()
            tables["profile"] = profile.to_frame()
        samples = int(self._param(params, "samples", 0))
        if samples > 0:
            box = build_foliated_box(
                torus_map, sigma, point, length,
                float(self._param(params, "disk_radius", 0.02)),
                int(self._param(params, "plaques", 9)),
                config=self.config,
            )
            hist = empirical_disintegration(box, samples, int(self._param(params, "bins", 50)), seed, config=self.config)
            if sigma != "c":
                hist = compare_disintegration(torus_map, box, hist, tol, self.config)
            result["box"] = box.to_dict()
            result["disintegration"] = hist.to_dict()
            tables["disintegration"] = hist.to_frame()
        return ExperimentResult("density", None, result, tables)

    def _run_ubd(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        report = ubd_constant(
            torus_map,
            str(self._param(params, "sigma", "u")),
            list(self._param(params, "R", [1.0, 5.0, 25.0])),
            str(self._param(params, "mode", "analytic")),
            int(self._param(params, "centers", 2)),
            seed,
            self.config,
        )
        return ExperimentResult("ubd", report.verdict, report.to_dict(), {"ubd": report.to_frame()})

    def _run_holonomy(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        points = self._points(params, seed)
        offsets = list(self._param(params, "offsets", [0.5, 1.0]))
        report = center_holonomy_report(
            torus_map, points, list(self._param(params, "du", [1.0, 2.0])), offsets, self.jobs, self.config
        )
        result = report.to_dict()
        if torus_map.linearization().exponent("c") > 0:
            segment = float(self._param(params, "segment", 0.05))
            result["lipschitz_vs_delta"] = [
                holonomy_lipschitz_vs_delta(torus_map, p, segment, offsets[0], config=self.config) for p in points
            ]
            leaf = trace_center_leaf(torus_map, points[0], 1.0, config=self.config)
            result["weighted_length"] = weighted_unstable_length(torus_map, leaf, 0.0, 0.5, config=self.config)
        return ExperimentResult("holonomy", None, result, {"holonomy": pd.DataFrame(report.samples)})

    def _run_periodic(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        max_period = int(self._param(params, "max_period", 3))
        threshold = float(self._param(params, "threshold", 1e-3))
        result: Dict[str, Any] = {}
        tables: Dict[str, pd.DataFrame] = {}
        verdicts = []
        for m in self._param(params, "iterates", [1]):
            report = periodic_data_constancy(torus_map.iterated(int(m)), max_period, threshold, self.jobs, self.config)
            result[f"f{m}"] = report.to_dict()
            tables[f"periodic_f{m}"] = pd.DataFrame([
                {"x1": o.point[0], "x2": o.point[1], "x3": o.point[2], "period": o.minimal_period,
                 **{f"lambda_{s}": v for s, v in zip(SIGMAS, o.exponents)}}
                for o in report.orbits
            ])
            verdicts.append(all(v == "constant" for v in report.verdict.values()))
        return ExperimentResult("periodic", "constant" if all(verdicts) else "non-constant", result, tables)

    def _run_rigidity(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        report = run_rigidity(
            torus_map, int(self._param(params, "seeds", 4)), int(self._param(params, "n", 1000)),
            seed, params.get("burn_in"), self.jobs, self.config,
        )
        return ExperimentResult("rigidity", report.verdict, report.to_dict(), {"per_seed": report.to_frame()})

    def _run_sweep(
        self,
        torus_map: TorusMapSpec,
        params: Dict[str, Any],
        seed: int,
        family: Optional[Callable[[float], TorusMapSpec]] = None,
    ) -> ExperimentResult:
        if family is None:
            raise ValueError("sweep experiments need a built-in map family")
        epsilons = list(self._param(params, "epsilons", [0.0, -0.1, 0.1]))
        for eps in epsilons:
            self.require_partial_hyperbolicity(family(float(eps)), params)
        report = run_sweep(
            family,
            epsilons,
            int(self._param(params, "seeds", 4)),
            int(self._param(params, "n", 1000)),
            seed,
            params.get("burn_in"),
            params.get("flip_axis", 0),
            self.jobs,
            self.config,
        )
        return ExperimentResult("sweep", report.verdict, report.to_dict(), {"sweep": report.to_frame()})

    def _run_center_topology(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        report = run_center_topology(
            torus_map, int(self._param(params, "seeds", 4)), int(self._param(params, "n", 1000)),
            seed, params.get("burn_in"), self.jobs, self.config,
        )
        return ExperimentResult("center-topology", report.verdict, report.to_dict(), {"closure": pd.DataFrame(report.closure)})

    def _run_center_inequality(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        report = run_anosov_center_inequality(
            torus_map, int(self._param(params, "seeds", 4)), int(self._param(params, "n", 1000)),
            seed, params.get("burn_in"), self.jobs, self.config,
        )
        return ExperimentResult("center-inequality", report.verdict, report.to_dict())

    def _run_qi(self, torus_map: TorusMapSpec, params: Dict[str, Any], seed: int) -> ExperimentResult:
        sigma = str(self._param(params, "sigma", "u"))
        length = max(self._param(params, "R", [50.0]))
        leaf = self._leaf(torus_map, sigma, self._points(params, seed)[0], length)
        report = quasi_isometry_constant(leaf, float(self._param(params, "r_min", 1.0)), seed=seed)
        result: Dict[str, Any] = {"leaf": leaf.to_dict(), "quasi_isometry": report.to_dict()}
        radii = params.get("radii")
        if radii:
            result["asymptotic_direction"] = asymptotic_direction(leaf, list(radii))
        if sigma in ("s", "u"):
            min_distance = float(self._param(params, "min_distance", 1.0))
            result["comparability"] = [
                large_scale_comparability(torus_map, leaf, k, min_distance, seed=seed)
                for k in range(1, int(self._param(params, "k", 3)) + 1)
            ]
        frame = pd.DataFrame(report.samples, columns=["intrinsic", "ambient"])
        return ExperimentResult("qi", None, result, {"qi": frame})
