"""
Derivative-cocycle estimators: Oseledec splitting and Lyapunov exponents.

Every routine is batched: points have shape (N, 3) and the N orbits are
advanced together. Orbits live on the torus representative [0,1)^3.

Splitting directions are obtained by pushing frames along stored
pseudo-orbits: forward pushes converge to the unstable direction and the
center-unstable plane, backward pushes (with exact inverse Jacobians) to the
stable direction and the center-stable plane; the center direction is the
intersection of the two planes.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

from ph3lab.exceptions import (
    DegenerateSplitting,
    NotPartiallyHyperbolicLinearization,
    NumericalUnderflow,
)
from ph3lab.torus_maps import TorusMapSpec
from ph3lab.utils import canonical_sign, section, wrap_torus


logger = logging.getLogger(__name__)

SIGMAS = ("s", "c", "u")
UNDERFLOW_FLOOR = 1e-300
# Generic starting frame (irrational directions, no alignment with coordinate axes).
_GENERIC = np.array([[1.0, 0.3183098861837907], [2 ** 0.5, -0.7071067811865476], [3 ** 0.5, 0.5772156649015329]])


@dataclass(frozen=True)
class SplittingFrame:
    """Unit directions e_s, e_c, e_u at one or more base points."""
    base: np.ndarray
    e_s: np.ndarray
    e_c: np.ndarray
    e_u: np.ndarray
    residuals: np.ndarray  # (..., 3) invariance defects ordered s, c, u
    horizon: int
    plane_angle: np.ndarray = field(default_factory=lambda: np.zeros(0))
    converged: bool = True  # every residual within residual_tolerance

    def direction(self, sigma: str) -> np.ndarray:
        return {"s": self.e_s, "c": self.e_c, "u": self.e_u}[sigma]

    def gram_determinant(self) -> np.ndarray:
        """|det[e_s, e_c, e_u]|; bounded away from 0 for PH maps."""
        return np.abs(np.linalg.det(np.stack([self.e_s, self.e_c, self.e_u], axis=-1)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "base": self.base.tolist(),
            "e_s": self.e_s.tolist(),
            "e_c": self.e_c.tolist(),
            "e_u": self.e_u.tolist(),
            "residuals": self.residuals.tolist(),
            "horizon": self.horizon,
            "converged": self.converged,
        }


@dataclass
class LyapunovReport:
    """Exponent estimates over a set of seed points."""
    exponents: np.ndarray  # (3,) mean s, c, u
    stderr: np.ndarray  # (3,)
    per_seed: np.ndarray  # (S, 3)
    points: np.ndarray  # (S, 3)
    n: int
    burn_in: int
    seed: Optional[int] = None
    method: str = "qr"

    @property
    def sum_defect(self) -> float:
        """|lambda_s + lambda_c + lambda_u| of the mean spectrum."""
        return float(abs(np.sum(self.exponents)))

    def exponent(self, sigma: str) -> float:
        return float(self.exponents[SIGMAS.index(sigma)])

    def error(self, sigma: str) -> float:
        return float(self.stderr[SIGMAS.index(sigma)])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "exponents": self.exponents.tolist(),
            "stderr": self.stderr.tolist(),
            "n": self.n,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "seeds": self.points.tolist(),
            "per_seed": self.per_seed.tolist(),
            "method": self.method,
            "sum_defect": self.sum_defect,
        }


def random_points(seed: int, count: int) -> np.ndarray:
    """Volume-random torus points from an explicit 64-bit seed."""
    rng = np.random.default_rng(int(seed))
    return rng.random((int(count), 3))


def _as_batch(x: Any) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def _orthonormalize2(frame: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Gram-Schmidt on (..., 3, 2) frames; returns the frame and column norms."""
    a = frame[..., 0]
    na = np.linalg.norm(a, axis=-1)
    a = a / na[..., None]
    b = frame[..., 1] - np.sum(a * frame[..., 1], axis=-1, keepdims=True) * a
    nb = np.linalg.norm(b, axis=-1)
    b = b / nb[..., None]
    return np.stack([a, b], axis=-1), np.stack([na, nb], axis=-1)


def _unit_normal(frame: np.ndarray) -> np.ndarray:
    normal = np.cross(frame[..., 0], frame[..., 1])
    return normal / np.linalg.norm(normal, axis=-1, keepdims=True)


def _generic_frame(shape: Tuple[int, ...]) -> np.ndarray:
    return np.broadcast_to(_GENERIC, shape + (3, 2)).copy()


def _warn_if_not_ph(torus_map: TorusMapSpec) -> None:
    try:
        torus_map.linearization()
    except NotPartiallyHyperbolicLinearization as e:
        logger.warning(f"{torus_map.name} has no partially hyperbolic linear part: {e}")


def unstable_frames(torus_map: TorusMapSpec, x: np.ndarray, horizon: int) -> np.ndarray:
    """
    Center-unstable frames at x: orthonormal (N, 3, 2), first column e_u.

    Pulls x back `horizon` steps and pushes a generic 2-frame forward along
    the stored pseudo-orbit.
    """
    back = [x]
    for _ in range(horizon):
        back.append(torus_map.inverse_evaluate(back[-1]))
    frame = _generic_frame(x.shape[:-1])
    for i in range(horizon, 0, -1):
        frame, _ = _orthonormalize2(torus_map.jacobian(back[i]) @ frame)
    return frame


def stable_frames(torus_map: TorusMapSpec, x: np.ndarray, horizon: int) -> np.ndarray:
    """Center-stable frames at x: orthonormal (N, 3, 2), first column e_s."""
    forward = [x]
    for _ in range(horizon):
        forward.append(torus_map.evaluate(forward[-1]))
    frame = _generic_frame(x.shape[:-1])
    for i in range(horizon, 0, -1):
        frame, _ = _orthonormalize2(torus_map.inverse_jacobian(forward[i]) @ frame)
    return frame


def _frames_at(torus_map: TorusMapSpec, x: np.ndarray, horizon: int, plane_tol: float) -> Tuple[np.ndarray, ...]:
    cu = unstable_frames(torus_map, x, horizon)
    cs = stable_frames(torus_map, x, horizon)
    e_u = cu[..., 0]
    e_s = cs[..., 0]
    center = np.cross(_unit_normal(cu), _unit_normal(cs))
    plane_angle = np.linalg.norm(center, axis=-1)
    if np.any(plane_angle < plane_tol):
        worst = int(np.argmin(plane_angle))
        raise DegenerateSplitting(
            f"Center-stable and center-unstable planes nearly coincide at {x[worst].tolist()} "
            f"(sin angle {plane_angle[worst]:.3e}); increase the horizon or reduce the perturbation"
        )
    e_c = center / plane_angle[..., None]
    return canonical_sign(e_s), canonical_sign(e_c), canonical_sign(e_u), plane_angle


def oseledec_splitting(
    torus_map: TorusMapSpec,
    x: Any,
    horizon: int = 60,
    check_residuals: bool = True,
    config: Optional[Dict[str, Any]] = None,
) -> SplittingFrame:
    """
    Estimate the invariant splitting E^s + E^c + E^u at x.

    Args:
        torus_map: Partially hyperbolic map
        x: Base point(s), shape (3,) or (N, 3)
        horizon: Number of pull-back/push-forward steps
        check_residuals: Also compute the frame at f(x) and record the
            invariance defects r_sigma
        config: Optional configuration (cocycle section)

    Returns:
        SplittingFrame with unit vectors in the canonical sign convention;
        converged is False when a residual exceeds residual_tolerance

    Raises:
        DegenerateSplitting: If the two 2-planes nearly coincide
    """
    settings = section(config, "cocycle")
    plane_tol = float(settings.get("plane_angle_tolerance", 1e-6))
    residual_tol = float(settings.get("residual_tolerance", 1e-6))

    points, single = _as_batch(x)
    points = wrap_torus(points)
    e_s, e_c, e_u, angle = _frames_at(torus_map, points, horizon, plane_tol)

    residuals = np.zeros(points.shape[:-1] + (3,))
    converged = True
    if check_residuals:
        image = torus_map.evaluate(points)
        img_frames = _frames_at(torus_map, image, horizon, plane_tol)
        jac = torus_map.jacobian(points)
        for idx, (vec, img_vec) in enumerate(zip((e_s, e_c, e_u), img_frames[:3])):
            pushed = np.einsum("...ij,...j->...i", jac, vec)
            pushed /= np.linalg.norm(pushed, axis=-1, keepdims=True)
            residuals[..., idx] = np.minimum(
                np.linalg.norm(pushed - img_vec, axis=-1),
                np.linalg.norm(pushed + img_vec, axis=-1),
            )
        worst = float(residuals.max()) if residuals.size else 0.0
        converged = worst <= residual_tol
        if not converged:
            logger.warning(
                f"Splitting residual {worst:.2e} exceeds {residual_tol:.1e} for {torus_map.name} "
                f"at horizon {horizon}"
            )

    if single:
        return SplittingFrame(points[0], e_s[0], e_c[0], e_u[0], residuals[0], horizon, angle[0:1], converged)
    return SplittingFrame(points, e_s, e_c, e_u, residuals, horizon, angle, converged)


def lyapunov_spectrum(
    torus_map: TorusMapSpec,
    x0: Any,
    n: int,
    burn_in: Optional[int] = None,
    seed: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
) -> LyapunovReport:
    """
    Lyapunov spectrum by discrete QR: a full 3-frame is re-orthonormalized
    at every step and the log diagonal stretches are accumulated.

    Args:
        torus_map: Map to analyse
        x0: Seed point(s), shape (3,) or (S, 3)
        n: Iterates accumulated after burn-in
        burn_in: Discarded transient (default from config, 1000)
        seed: Seed that produced x0, recorded in the report
        config: Optional configuration (cocycle section)

    Returns:
        LyapunovReport with exponents sorted lambda_s <= lambda_c <= lambda_u

    Raises:
        NumericalUnderflow: If a stretch factor falls below 1e-300
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    settings = section(config, "cocycle")
    burn_in = int(settings.get("burn_in", 1000) if burn_in is None else burn_in)
    blocks = int(settings.get("stderr_blocks", 10))
    _warn_if_not_ph(torus_map)

    points, _ = _as_batch(x0)
    points = wrap_torus(points)
    count = points.shape[0]
    x = points.copy()
    frame = np.broadcast_to(np.eye(3), (count, 3, 3)).copy()
    blocks = max(1, min(blocks, n))
    edges = np.linspace(0, n, blocks + 1).astype(int)
    block_sums = np.zeros((count, blocks, 3))

    for step in range(burn_in + n):
        frame, upper = np.linalg.qr(torus_map.jacobian(x) @ frame)
        stretch = np.abs(np.diagonal(upper, axis1=-2, axis2=-1))
        if np.any(stretch < UNDERFLOW_FLOOR):
            raise NumericalUnderflow(f"Stretch factor {stretch.min():.3e} at step {step}")
        if step >= burn_in:
            k = step - burn_in
            block = int(np.searchsorted(edges, k, side="right") - 1)
            block_sums[:, block, :] += np.log(stretch)
        x = torus_map.evaluate(x)

    per_seed = np.sort(block_sums.sum(axis=1) / n, axis=1)
    exponents = per_seed.mean(axis=0)
    if count >= 2:
        stderr = per_seed.std(axis=0, ddof=1) / np.sqrt(count)
    elif blocks >= 2:
        block_means = np.sort(block_sums[0] / np.diff(edges)[:, None], axis=1)
        stderr = block_means.std(axis=0, ddof=1) / np.sqrt(blocks)
    else:
        stderr = np.zeros(3)

    report = LyapunovReport(exponents, stderr, per_seed, points, n, burn_in, seed, "qr")
    logger.info(
        f"Spectrum of {torus_map.name}: s={exponents[0]:.6f} c={exponents[1]:.6f} "
        f"u={exponents[2]:.6f} (n={n}, seeds={count})"
    )
    return report


def orbit_log_jacobians(torus_map: TorusMapSpec, pts: np.ndarray, margin: int) -> np.ndarray:
    """
    log J^s, log J^c, log J^u at points margin .. len(pts)-1-margin of a stored orbit.

    Args:
        torus_map: Map generating the orbit
        pts: Pseudo-orbit of shape (total + 1, ..., 3) with pts[i + 1] ~ f(pts[i]);
            cover coordinates are allowed
        margin: Steps of frame convergence on each side of the window

    Returns:
        Array of shape (total + 1 - 2 * margin, ..., 3), columns ordered s, c, u
    """
    total = pts.shape[0] - 1
    length = total + 1 - 2 * margin
    if length < 1:
        raise ValueError("orbit too short for the requested margin")
    start = pts[0]

    e_u = np.empty((length,) + start.shape)
    n_cu = np.empty_like(e_u)
    frame = _generic_frame(start.shape[:-1])
    for i in range(margin + length):
        if i >= margin:
            e_u[i - margin] = frame[..., 0]
            n_cu[i - margin] = _unit_normal(frame)
        frame, _ = _orthonormalize2(torus_map.jacobian(pts[i]) @ frame)

    e_s = np.empty_like(e_u)
    n_cs = np.empty_like(e_u)
    frame = _generic_frame(start.shape[:-1])
    for i in range(total, margin - 1, -1):
        if i < margin + length:
            e_s[i - margin] = frame[..., 0]
            n_cs[i - margin] = _unit_normal(frame)
        if i > margin:
            frame, _ = _orthonormalize2(torus_map.inverse_jacobian(pts[i]) @ frame)

    e_c = np.cross(n_cu, n_cs)
    e_c /= np.linalg.norm(e_c, axis=-1, keepdims=True)
    jac = torus_map.jacobian(pts[margin:margin + length])
    return np.stack(
        [np.log(np.linalg.norm(np.einsum("...ij,...j->...i", jac, e), axis=-1)) for e in (e_s, e_c, e_u)],
        axis=-1,
    )


def _segment_log_jacobians(
    torus_map: TorusMapSpec, start: np.ndarray, length: int, margin: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Log-Jacobians at orbit points margin .. margin+length-1 of the orbit of start,
    plus the orbit point at index `length`, which starts the next contiguous segment.
    """
    total = length + 2 * margin - 1
    pts = np.empty((total + 1,) + start.shape)
    pts[0] = start
    for i in range(total):
        pts[i + 1] = torus_map.evaluate(pts[i])
    return orbit_log_jacobians(torus_map, pts, margin), pts[length]


def _iter_log_jacobians(
    torus_map: TorusMapSpec, start: np.ndarray, n: int, margin: int, segment: int
) -> Iterator[np.ndarray]:
    done = 0
    point = start
    while done < n:
        length = min(segment, n - done)
        logs, point = _segment_log_jacobians(torus_map, point, length, margin)
        done += length
        yield logs


def directional_spectrum(
    torus_map: TorusMapSpec,
    x: Any,
    n: int,
    config: Optional[Dict[str, Any]] = None,
) -> LyapunovReport:
    """
    Exponents as orbit averages of log ||Df e_sigma|| with the splitting frame
    estimated along the orbit (segments overlap by twice the splitting horizon,
    so every averaged point has converged frames on both sides).
    """
    settings = section(config, "cocycle")
    margin = int(settings.get("splitting_horizon", 60))
    segment = int(settings.get("segment_length", 4096))
    points, _ = _as_batch(x)
    points = wrap_torus(points)

    sums = np.zeros(points.shape[:-1] + (3,))
    segment_means = []
    for logs in _iter_log_jacobians(torus_map, points, n, margin, segment):
        sums += logs.sum(axis=0)
        segment_means.append(logs.mean(axis=0))
    per_seed = sums / n
    exponents = per_seed.mean(axis=0)
    if points.shape[0] >= 2:
        stderr = per_seed.std(axis=0, ddof=1) / np.sqrt(points.shape[0])
    elif len(segment_means) >= 2:
        stacked = np.stack(segment_means)[:, 0, :]
        stderr = stacked.std(axis=0, ddof=1) / np.sqrt(len(segment_means))
    else:
        stderr = np.zeros(3)
    return LyapunovReport(exponents, stderr, per_seed, points, n, margin, None, "directional")


def directional_exponent(
    torus_map: TorusMapSpec,
    x: Any,
    sigma: str,
    n: int,
    config: Optional[Dict[str, Any]] = None,
) -> Any:
    """
    (1/n) sum log ||Df(f^i x) e_sigma(f^i x)|| along the orbit of x.

    Args:
        torus_map: Partially hyperbolic map
        x: Start point(s)
        sigma: "s", "c" or "u"
        n: Number of averaged iterates
        config: Optional configuration (cocycle section)

    Returns:
        Float for a single point, array of per-point values otherwise

    Raises:
        DegenerateSplitting: Propagated from frame estimation
    """
    if sigma not in SIGMAS:
        raise ValueError(f"sigma must be one of {SIGMAS}; got {sigma!r}")
    arr = np.asarray(x, dtype=float)
    report = directional_spectrum(torus_map, arr, n, config)
    values = report.per_seed[:, SIGMAS.index(sigma)]
    return float(values[0]) if arr.ndim == 1 else values


def exceedance_fraction(
    torus_map: TorusMapSpec,
    sigma: str,
    points: Any,
    n: int,
    n_max: int,
    margin: float,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Fraction of points whose finite-time sigma-rate stays above the linear
    rate plus `margin` for every m in [n, n_max].

    For sigma = "s" the inequality is reversed (rates below lambda^s_A - margin),
    matching the inverse-map formulation.
    """
    if not 1 <= n <= n_max:
        raise ValueError("need 1 <= n <= n_max")
    settings = section(config, "cocycle")
    horizon = int(settings.get("splitting_horizon", 60))
    target = torus_map.linearization().exponent(sigma)
    batch, _ = _as_batch(points)
    batch = wrap_torus(batch)

    logs = np.concatenate(list(_iter_log_jacobians(torus_map, batch, n_max, horizon, n_max)), axis=0)
    rates = np.cumsum(logs[..., SIGMAS.index(sigma)], axis=0) / np.arange(1, n_max + 1)[:, None]
    window = rates[n - 1:]
    if sigma == "s":
        inside = np.all(window < target - margin, axis=0)
    else:
        inside = np.all(window > target + margin, axis=0)
    return {
        "sigma": sigma,
        "n": n,
        "n_max": n_max,
        "margin": margin,
        "linear_exponent": target,
        "fraction": float(inside.mean()),
        "count": int(batch.shape[0]),
    }


def convergence_diagnostic(
    torus_map: TorusMapSpec,
    x0: Any,
    n: int,
    config: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """
    Compare QR estimates at n and 2n; a move larger than twice the reported
    standard error is flagged, never raised.
    """
    first = lyapunov_spectrum(torus_map, x0, n, config=config)
    second = lyapunov_spectrum(torus_map, x0, 2 * n, config=config)
    moves = np.abs(second.exponents - first.exponents)
    bound = 2.0 * np.maximum(first.stderr, second.stderr)
    flagged = bool(np.any(moves > np.maximum(bound, 1e-12)))
    if flagged:
        logger.warning(f"Exponents of {torus_map.name} moved by {moves.tolist()} when doubling n={n}")
    return {"n": n, "moves": moves.tolist(), "bound": bound.tolist(), "flagged": flagged}
