"""
Evaluable diffeomorphisms of the 3-torus and their lifts to R^3.

Every map handled by the lab is an integer unimodular matrix composed with
finitely many volume-preserving coordinate shears, optionally conjugated by
another shear stack:

    f = Phi o A o g_m o ... o g_1 o Phi^-1

Shears x -> x + eps * psi(x_j) e_k have unipotent Jacobians and closed-form
inverses, so evaluation, inversion and derivatives are exact up to rounding.
All routines accept batches of points with shape (..., 3).
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ph3lab.exceptions import NotPartiallyHyperbolicLinearization, VerificationFailed
from ph3lab.utils import canonical_sign, section, wrap_torus


logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SPACES = ("torus", "cover")
# Relative gap under which two eigenvalue moduli count as one class.
MODULUS_CLASS_GAP = 1e-9
# Rounding slack when comparing a finite-time center rate with 1.
UNIT_RATE_SLACK = 1e-12


def _as_int(value: Any) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    as_float = float(value)
    if not as_float.is_integer():
        raise ValueError(f"Linear part must have integer entries; got {value!r}")
    return int(as_float)


def integer_det(entries: Any) -> int:
    """Exact determinant of a 3x3 integer array-like."""
    (a, b, c), (d, e, f), (g, h, i) = [[int(v) for v in row] for row in entries]
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)


def integer_adjugate(entries: Any) -> np.ndarray:
    """Exact integer adjugate of a 3x3 integer array-like (dtype=object)."""
    m = np.array([[int(v) for v in row] for row in entries], dtype=object)
    adj = np.empty((3, 3), dtype=object)
    for r in range(3):
        for c in range(3):
            minor = np.delete(np.delete(m, r, axis=0), c, axis=1)
            adj[c, r] = (-1) ** (r + c) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return adj


@dataclass(frozen=True)
class IntegerMatrix3:
    """A 3x3 integer matrix with determinant +1 or -1."""
    entries: Tuple[Tuple[int, int, int], Tuple[int, int, int], Tuple[int, int, int]]

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in row) for row in self.entries)
        if len(rows) != 3 or any(len(row) != 3 for row in rows):
            raise ValueError("IntegerMatrix3 needs exactly 3 rows of 3 integers")
        object.__setattr__(self, "entries", rows)
        if self.det not in (1, -1):
            raise ValueError(f"Torus automorphism must have det +-1; got det={self.det}")

    @classmethod
    def from_array(cls, array: Any) -> "IntegerMatrix3":
        """Build from any 3x3 array-like with integral entries."""
        arr = np.asarray(array)
        if arr.shape != (3, 3):
            raise ValueError(f"Linear part must be 3x3; got shape {arr.shape}")
        return cls(tuple(tuple(_as_int(v) for v in row) for row in arr.tolist()))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.entries, dtype=float)

    @property
    def det(self) -> int:
        return integer_det(self.entries)

    def adjugate(self) -> np.ndarray:
        """Exact integer adjugate (dtype=object)."""
        return integer_adjugate(self.entries)

    def inverse(self) -> "IntegerMatrix3":
        """Integer inverse (det is +-1 so the adjugate divided by det is integral)."""
        return IntegerMatrix3.from_array(self.adjugate() * self.det)

    def power(self, p: int) -> "IntegerMatrix3":
        """Exact A^p by repeated squaring; negative p uses the inverse."""
        base = np.array(self.entries if p >= 0 else self.inverse().entries, dtype=object)
        result = np.eye(3, dtype=int).astype(object)
        exp = abs(int(p))
        while exp > 0:
            if exp & 1:
                result = result.dot(base)
            base = base.dot(base)
            exp >>= 1
        return IntegerMatrix3.from_array(result)

    def to_list(self) -> list:
        return [list(row) for row in self.entries]


@dataclass(frozen=True)
class ShearStep:
    """
    Volume-preserving shear x -> x + epsilon * psi(x[source]) e[target].

    The profile psi(t) = sum_m a_m cos(2 pi m t) + b_m sin(2 pi m t) (m >= 1)
    is 1-periodic; coordinates are 0-based here and 1-based in map files.
    """
    source: int
    target: int
    epsilon: float
    cos_coeffs: Tuple[float, ...] = ()
    sin_coeffs: Tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.source not in (0, 1, 2) or self.target not in (0, 1, 2):
            raise ValueError(f"Shear coordinates must be in 0..2; got {self.source}, {self.target}")
        if self.source == self.target:
            raise ValueError("Shear source and target coordinates must differ")
        object.__setattr__(self, "epsilon", float(self.epsilon))
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))

    def _harmonics(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = max(len(self.cos_coeffs), len(self.sin_coeffs))
        a = np.zeros(n)
        b = np.zeros(n)
        a[:len(self.cos_coeffs)] = self.cos_coeffs
        b[:len(self.sin_coeffs)] = self.sin_coeffs
        m = np.arange(1, n + 1, dtype=float)
        phase = TWO_PI * np.asarray(t, dtype=float)[..., None] * m
        return phase, a, b

    def profile(self, t: np.ndarray) -> np.ndarray:
        phase, a, b = self._harmonics(t)
        return np.cos(phase) @ a + np.sin(phase) @ b

    def profile_derivative(self, t: np.ndarray) -> np.ndarray:
        phase, a, b = self._harmonics(t)
        m = np.arange(1, a.size + 1, dtype=float)
        return TWO_PI * (np.cos(phase) @ (m * b) - np.sin(phase) @ (m * a))

    def sup_profile(self) -> float:
        """Upper bound for sup|psi|."""
        return float(sum(abs(c) for c in self.cos_coeffs) + sum(abs(c) for c in self.sin_coeffs))

    def derivative_bound(self) -> float:
        """Upper bound for sup|psi'|."""
        bound = sum((m + 1) * abs(c) for m, c in enumerate(self.cos_coeffs))
        bound += sum((m + 1) * abs(c) for m, c in enumerate(self.sin_coeffs))
        return TWO_PI * bound

    def apply(self, x: np.ndarray, sign: float = 1.0) -> np.ndarray:
        """Apply the shear (sign=+1) or its exact inverse (sign=-1)."""
        y = np.array(x, dtype=float, copy=True)
        y[..., self.target] += sign * self.epsilon * self.profile(x[..., self.source])
        return y

    def jacobian(self, x: np.ndarray, sign: float = 1.0) -> np.ndarray:
        """Unipotent Jacobian I + sign * eps * psi'(x_j) e_k e_j^T."""
        jac = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)).copy()
        jac[..., self.target, self.source] += sign * self.epsilon * self.profile_derivative(x[..., self.source])
        return jac

    def flipped(self, axis: int) -> "ShearStep":
        """The shear R o g o R for the reflection R negating one coordinate."""
        epsilon = -self.epsilon if self.target == axis else self.epsilon
        sin_coeffs = tuple(-c for c in self.sin_coeffs) if self.source == axis else self.sin_coeffs
        return replace(self, epsilon=epsilon, sin_coeffs=sin_coeffs)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "j": self.source + 1,
            "k": self.target + 1,
            "epsilon": self.epsilon,
            "cos": list(self.cos_coeffs),
            "sin": list(self.sin_coeffs),
        }


@dataclass(frozen=True)
class LinearData:
    """Eigen data of a linearization, sorted by modulus as (s, c, u)."""
    matrix: IntegerMatrix3
    eigenvalues: Tuple[float, float, float]
    moduli: Tuple[float, float, float]
    exponents: Tuple[float, float, float]
    eigenvectors: np.ndarray  # rows e_s, e_c, e_u

    @property
    def is_anosov(self) -> bool:
        return abs(self.moduli[1] - 1.0) > MODULUS_CLASS_GAP

    def exponent(self, sigma: str) -> float:
        return self.exponents["scu".index(sigma)]

    def direction(self, sigma: str) -> np.ndarray:
        return self.eigenvectors["scu".index(sigma)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "matrix": self.matrix.to_list(),
            "eigenvalues": list(self.eigenvalues),
            "moduli": list(self.moduli),
            "exponents": {"s": self.exponents[0], "c": self.exponents[1], "u": self.exponents[2]},
            "eigenvectors": {s: self.eigenvectors[i].tolist() for i, s in enumerate("scu")},
            "anosov": self.is_anosov,
        }


@dataclass(frozen=True)
class TorusMapSpec:
    """
    A concrete conservative diffeomorphism of T^3 and its lift to R^3.

    The base map is Phi o A o g_m o ... o g_1 o Phi^-1 where the g's are
    `pre_shears` (g_1 first) and Phi applies `conjugator` in list order;
    `iterate` composes the base map with itself.
    """
    linear_part: IntegerMatrix3
    pre_shears: Tuple[ShearStep, ...] = ()
    conjugator: Tuple[ShearStep, ...] = ()
    iterate: int = 1
    name: str = "custom"

    def __post_init__(self):
        if isinstance(self.linear_part, IntegerMatrix3):
            linear = self.linear_part
        else:
            linear = IntegerMatrix3.from_array(self.linear_part)
        object.__setattr__(self, "linear_part", linear)
        object.__setattr__(self, "pre_shears", tuple(self.pre_shears))
        object.__setattr__(self, "conjugator", tuple(self.conjugator))
        if int(self.iterate) < 1:
            raise ValueError(f"iterate must be >= 1; got {self.iterate}")
        object.__setattr__(self, "iterate", int(self.iterate))

    # -- composition helpers ------------------------------------------------

    @property
    def base_matrix(self) -> np.ndarray:
        return self.linear_part.array

    @property
    def cover_matrix(self) -> np.ndarray:
        """A^iterate: the matrix of the cover equivariance F(x+k) = F(x) + A k."""
        return self.linear_part.power(self.iterate).array

    @property
    def is_linear(self) -> bool:
        return all(g.epsilon == 0.0 for g in self.pre_shears + self.conjugator)

    def shear_bound(self) -> float:
        """Upper bound for the cover displacement of F from its linear part."""
        total = sum(abs(g.epsilon) * g.sup_profile() for g in self.pre_shears)
        total += 2.0 * sum(abs(g.epsilon) * g.sup_profile() for g in self.conjugator)
        norm_a = float(np.linalg.norm(self.base_matrix, 2))
        return self.iterate * norm_a * total

    def iterated(self, m: int) -> "TorusMapSpec":
        """The m-th iterate f^m as a new spec."""
        return replace(self, iterate=self.iterate * int(m), name=f"{self.name}^{int(m)}")

    def _forward_once(self, x: np.ndarray) -> np.ndarray:
        for phi in reversed(self.conjugator):
            x = phi.apply(x, -1.0)
        for g in self.pre_shears:
            x = g.apply(x)
        x = x @ self.base_matrix.T
        for phi in self.conjugator:
            x = phi.apply(x)
        return x

    def _inverse_once(self, x: np.ndarray) -> np.ndarray:
        for phi in reversed(self.conjugator):
            x = phi.apply(x, -1.0)
        x = x @ self.linear_part.inverse().array.T
        for g in reversed(self.pre_shears):
            x = g.apply(x, -1.0)
        for phi in self.conjugator:
            x = phi.apply(x)
        return x

    def _jacobian_once(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        jac = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)).copy()
        for phi in reversed(self.conjugator):
            jac = phi.jacobian(x, -1.0) @ jac
            x = phi.apply(x, -1.0)
        for g in self.pre_shears:
            jac = g.jacobian(x) @ jac
            x = g.apply(x)
        jac = self.base_matrix @ jac
        x = x @ self.base_matrix.T
        for phi in self.conjugator:
            jac = phi.jacobian(x) @ jac
            x = phi.apply(x)
        return jac, x

    def _inverse_jacobian_once(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        jac = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3)).copy()
        inv = self.linear_part.inverse().array
        for phi in reversed(self.conjugator):
            jac = phi.jacobian(x, -1.0) @ jac
            x = phi.apply(x, -1.0)
        jac = inv @ jac
        x = x @ inv.T
        for g in reversed(self.pre_shears):
            jac = g.jacobian(x, -1.0) @ jac
            x = g.apply(x, -1.0)
        for phi in self.conjugator:
            jac = phi.jacobian(x) @ jac
            x = phi.apply(x)
        return jac, x

    # -- public operations --------------------------------------------------

    def evaluate(self, x: Any, space: str = "torus") -> np.ndarray:
        """
        Evaluate f on the torus or its lift F on the cover.

        Args:
            x: Point(s) with shape (..., 3)
            space: "torus" (input and output reduced to [0,1)^3) or "cover"

        Returns:
            Image point(s), same shape as x
        """
        if space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}; got {space!r}")
        y = np.asarray(x, dtype=float)
        if space == "torus":
            y = wrap_torus(y)
        for _ in range(self.iterate):
            y = self._forward_once(y)
        return wrap_torus(y) if space == "torus" else y

    def inverse_evaluate(self, x: Any, space: str = "torus") -> np.ndarray:
        """
        Evaluate the exact inverse: shears inverted in reverse order, A^-1 integral.

        Args:
            x: Point(s) with shape (..., 3)
            space: "torus" or "cover"

        Returns:
            Preimage point(s), same shape as x
        """
        if space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}; got {space!r}")
        y = np.asarray(x, dtype=float)
        if space == "torus":
            y = wrap_torus(y)
        for _ in range(self.iterate):
            y = self._inverse_once(y)
        return wrap_torus(y) if space == "torus" else y

    def jacobian(self, x: Any) -> np.ndarray:
        """Df(x) by the chain rule; shape (..., 3, 3)."""
        y = np.asarray(x, dtype=float)
        jac = np.broadcast_to(np.eye(3), y.shape[:-1] + (3, 3)).copy()
        for _ in range(self.iterate):
            step, y = self._jacobian_once(y)
            jac = step @ jac
        return jac

    def inverse_jacobian(self, x: Any) -> np.ndarray:
        """D(f^-1)(x) = Df(f^-1 x)^-1, assembled from exact inverse factors."""
        y = np.asarray(x, dtype=float)
        jac = np.broadcast_to(np.eye(3), y.shape[:-1] + (3, 3)).copy()
        for _ in range(self.iterate):
            step, y = self._inverse_jacobian_once(y)
            jac = step @ jac
        return jac

    def linearization(self) -> LinearData:
        """Linear part A^iterate with its eigen data; see `linearization`."""
        return linearization(self)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "linear": self.linear_part.to_list(),
            "shears": [g.to_dict() for g in self.pre_shears],
            "conjugator": [g.to_dict() for g in self.conjugator],
            "iterate": self.iterate,
        }


@dataclass(frozen=True)
class PartialHyperbolicityEstimate:
    """Finite-time rate bounds per direction over a grid."""
    nu_minus: float
    nu_plus: float
    mu_minus: float
    mu_plus: float
    lambda_minus: float
    lambda_plus: float
    horizon: int
    grid: int
    passed: bool
    violations: Tuple[str, ...] = field(default_factory=tuple)
    center_brackets_one: bool = False  # mu_- <= 1 <= mu_+, reported but not part of passed

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nu": [self.nu_minus, self.nu_plus],
            "mu": [self.mu_minus, self.mu_plus],
            "lambda": [self.lambda_minus, self.lambda_plus],
            "horizon": self.horizon,
            "grid": self.grid,
            "passed": self.passed,
            "violations": list(self.violations),
            "center_brackets_one": self.center_brackets_one,
        }


def linearization(torus_map: TorusMapSpec) -> LinearData:
    """
    Linearization of f with eigen data sorted as (s, c, u).

    Args:
        torus_map: Map whose homotopy class is queried (shears are ignored)

    Returns:
        LinearData with log-moduli exponents and unit eigenvectors

    Raises:
        NotPartiallyHyperbolicLinearization: If the moduli do not split into
            three classes with m_s < 1 < m_u
    """
    matrix = torus_map.linear_part.power(torus_map.iterate)
    values, vectors = np.linalg.eig(matrix.array)
    order = np.argsort(np.abs(values))
    values = values[order]
    vectors = vectors[:, order]
    moduli = np.abs(values)

    gaps = np.diff(moduli) / moduli[1:]
    if np.any(gaps <= MODULUS_CLASS_GAP) or np.any(np.abs(values.imag) > 1e-12):
        raise NotPartiallyHyperbolicLinearization(
            f"Eigenvalue moduli {moduli.tolist()} do not form three one-dimensional classes"
        )
    if not (moduli[0] < 1.0 < moduli[2]):
        raise NotPartiallyHyperbolicLinearization(
            f"Need m_s < 1 < m_u; got moduli {moduli.tolist()}"
        )

    real_vectors = canonical_sign(np.real(vectors).T)
    real_vectors /= np.linalg.norm(real_vectors, axis=1, keepdims=True)
    return LinearData(
        matrix=matrix,
        eigenvalues=tuple(float(v) for v in np.real(values)),
        moduli=tuple(float(m) for m in moduli),
        exponents=tuple(float(math.log(m)) for m in moduli),
        eigenvectors=real_vectors,
    )


def flip_conjugate(torus_map: TorusMapSpec, axis: int) -> TorusMapSpec:
    """
    Conjugate f by the reflection R negating coordinate `axis`: R o f o R.

    Conjugate maps share Lyapunov exponents and periodic data, which makes
    this an explicit oracle for sign-symmetry checks of shear families.
    """
    reflect = np.eye(3, dtype=int)
    reflect[axis, axis] = -1
    linear = IntegerMatrix3.from_array(reflect @ np.array(torus_map.linear_part.entries) @ reflect)
    return replace(
        torus_map,
        linear_part=linear,
        pre_shears=tuple(g.flipped(axis) for g in torus_map.pre_shears),
        conjugator=tuple(g.flipped(axis) for g in torus_map.conjugator),
        name=f"{torus_map.name}|flip{axis + 1}",
    )


def grid_points(resolution: int) -> np.ndarray:
    """Cell-centred grid of resolution^3 torus points."""
    ticks = (np.arange(resolution) + 0.5) / resolution
    mesh = np.stack(np.meshgrid(ticks, ticks, ticks, indexing="ij"), axis=-1)
    return mesh.reshape(-1, 3)


def verify_partial_hyperbolicity(
    torus_map: TorusMapSpec,
    horizon: int = 1,
    grid: int = 16,
    config: Optional[Dict[str, Any]] = None,
) -> PartialHyperbolicityEstimate:
    """
    Certify finite-time partial hyperbolicity on a grid.

    Rates are ||Df^n(x) e_sigma(x)||^(1/n) over the grid, with e_sigma from
    the estimated splitting frame. Domination is checked as
    nu_+ < mu_-, mu_+ < lambda_- and nu_+ < 1 < lambda_-.

    Args:
        torus_map: Map to verify
        horizon: n, number of iterates per rate
        grid: Points per axis (grid^3 samples)
        config: Optional configuration (cocycle section supplies the
            splitting horizon)

    Returns:
        PartialHyperbolicityEstimate with passed=True

    Raises:
        VerificationFailed: If an inequality fails; carries the worst sample
    """
    from ph3lab.cocycle import oseledec_splitting

    if horizon < 1:
        raise ValueError("horizon must be >= 1")

    points = grid_points(grid)
    split_horizon = int(section(config, "cocycle").get("splitting_horizon", 60))
    frame = oseledec_splitting(torus_map, points, split_horizon, check_residuals=False)

    rates = {}
    for sigma, vectors in (("s", frame.e_s), ("c", frame.e_c), ("u", frame.e_u)):
        x = points
        v = vectors
        log_norm = np.zeros(points.shape[0])
        for _ in range(horizon):
            v = np.einsum("nij,nj->ni", torus_map.jacobian(x), v)
            norms = np.linalg.norm(v, axis=1)
            log_norm += np.log(norms)
            v = v / norms[:, None]
            x = torus_map.evaluate(x)
        rates[sigma] = np.exp(log_norm / horizon)

    nu_minus, nu_plus = float(rates["s"].min()), float(rates["s"].max())
    mu_minus, mu_plus = float(rates["c"].min()), float(rates["c"].max())
    lam_minus, lam_plus = float(rates["u"].min()), float(rates["u"].max())

    violations = []
    if not nu_plus < mu_minus:
        violations.append("nu_plus < mu_minus")
    if not mu_plus < lam_minus:
        violations.append("mu_plus < lambda_minus")
    if not nu_plus < 1.0:
        violations.append("nu_plus < 1")
    if not lam_minus > 1.0:
        violations.append("lambda_minus > 1")

    estimate = PartialHyperbolicityEstimate(
        nu_minus=nu_minus, nu_plus=nu_plus,
        mu_minus=mu_minus, mu_plus=mu_plus,
        lambda_minus=lam_minus, lambda_plus=lam_plus,
        horizon=horizon, grid=grid,
        passed=not violations, violations=tuple(violations),
        center_brackets_one=mu_minus <= 1.0 + UNIT_RATE_SLACK and mu_plus >= 1.0 - UNIT_RATE_SLACK,
    )
    if violations:
        worst_c = int(np.argmax(rates["c"]))
        worst_u = int(np.argmin(rates["u"]))
        sample = {
            "violations": violations,
            "max_center_point": points[worst_c].tolist(),
            "max_center_rate": float(rates["c"][worst_c]),
            "min_unstable_point": points[worst_u].tolist(),
            "min_unstable_rate": float(rates["u"][worst_u]),
            "estimate": estimate.to_dict(),
        }
        logger.warning(f"Partial hyperbolicity not verified for {torus_map.name}: {violations}")
        raise VerificationFailed(
            f"Rate inequalities failed at horizon {horizon}: {', '.join(violations)}", sample
        )
    logger.info(
        f"Verified PH for {torus_map.name}: nu<={nu_plus:.4f} mu in [{mu_minus:.4f},{mu_plus:.4f}] "
        f"lambda>={lam_minus:.4f}"
    )
    return estimate
