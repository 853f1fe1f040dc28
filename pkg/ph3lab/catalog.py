"""
Built-in corpus of named map families.

Each entry is a factory taking the perturbation size epsilon and returning a
TorusMapSpec; `epsilon = 0` always gives the linear automorphism.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List

from ph3lab.torus_maps import IntegerMatrix3, ShearStep, TorusMapSpec


A_PH = IntegerMatrix3(((2, 1, 0), (1, 1, 0), (0, 0, 1)))
A_ANOSOV = IntegerMatrix3(((3, 2, 1), (2, 2, 1), (1, 1, 1)))
A_ANOSOV_INVERSE = A_ANOSOV.inverse()


def _sin_shear(j: int, k: int, epsilon: float) -> ShearStep:
    return ShearStep(source=j - 1, target=k - 1, epsilon=epsilon, sin_coeffs=(1.0,))


def _cos_shear(j: int, k: int, epsilon: float) -> ShearStep:
    return ShearStep(source=j - 1, target=k - 1, epsilon=epsilon, cos_coeffs=(1.0,), sin_coeffs=())


def _conjugator(epsilon: float):
    return (_sin_shear(1, 2, epsilon), _cos_shear(2, 3, epsilon))


def linear_ph(epsilon: float = 0.0) -> TorusMapSpec:
    return TorusMapSpec(A_PH, name="linear_ph")


def linear_anosov(epsilon: float = 0.0) -> TorusMapSpec:
    return TorusMapSpec(A_ANOSOV, name="linear_anosov")


def linear_anosov_inverse(epsilon: float = 0.0) -> TorusMapSpec:
    return TorusMapSpec(A_ANOSOV_INVERSE, name="linear_anosov_inverse")


def skew_ph(epsilon: float = 0.1) -> TorusMapSpec:
    """Shear inside the hyperbolic block; the center coordinate is untouched."""
    return TorusMapSpec(A_PH, (_sin_shear(1, 2, epsilon),), name="skew_ph")


def da_ph(epsilon: float = 0.1) -> TorusMapSpec:
    """Shears coupling the center coordinate into the hyperbolic block."""
    return TorusMapSpec(A_PH, (_sin_shear(1, 2, epsilon), _sin_shear(2, 3, epsilon)), name="da_ph")


def da_anosov(epsilon: float = 0.1) -> TorusMapSpec:
    return TorusMapSpec(A_ANOSOV, (_sin_shear(1, 2, epsilon), _sin_shear(2, 3, epsilon)), name="da_anosov")


def da_anosov_inverse(epsilon: float = 0.1) -> TorusMapSpec:
    return TorusMapSpec(
        A_ANOSOV_INVERSE, (_sin_shear(1, 2, epsilon), _sin_shear(2, 3, epsilon)), name="da_anosov_inverse"
    )


def conjugate_ph(epsilon: float = 0.1) -> TorusMapSpec:
    """Smooth conjugate of A_ph; shares every invariant of the linear map."""
    return TorusMapSpec(A_PH, conjugator=_conjugator(epsilon), name="conjugate_ph")


def conjugate_anosov(epsilon: float = 0.1) -> TorusMapSpec:
    return TorusMapSpec(A_ANOSOV, conjugator=_conjugator(epsilon), name="conjugate_anosov")


def conjugate_anosov_inverse(epsilon: float = 0.1) -> TorusMapSpec:
    return TorusMapSpec(A_ANOSOV_INVERSE, conjugator=_conjugator(epsilon), name="conjugate_anosov_inverse")


@dataclass(frozen=True)
class CatalogEntry:
    """A named family with a short provenance note."""
    name: str
    factory: Callable[[float], TorusMapSpec]
    provenance: str
    default_epsilon: float

    def build(self, epsilon: float = None) -> TorusMapSpec:
        return self.factory(self.default_epsilon if epsilon is None else float(epsilon))


CATALOG: Dict[str, CatalogEntry] = {
    entry.name: entry
    for entry in (
        CatalogEntry("linear_ph", linear_ph, "A_ph = [[2,1,0],[1,1,0],[0,0,1]], center eigenvalue 1", 0.0),
        CatalogEntry("linear_anosov", linear_anosov, "A_anosov = [[3,2,1],[2,2,1],[1,1,1]], symmetric, det 1", 0.0),
        CatalogEntry("linear_anosov_inverse", linear_anosov_inverse,
                     "A_anosov^-1 = [[1,-1,0],[-1,2,-1],[0,-1,2]], expanding center", 0.0),
        CatalogEntry("skew_ph", skew_ph, "A_ph o shear(x1 -> x2, eps sin)", 0.1),
        CatalogEntry("da_ph", da_ph, "A_ph o shear(x1 -> x2) o shear(x2 -> x3), eps sin", 0.1),
        CatalogEntry("da_anosov", da_anosov, "A_anosov o shear(x1 -> x2) o shear(x2 -> x3), eps sin", 0.1),
        CatalogEntry("da_anosov_inverse", da_anosov_inverse,
                     "A_anosov^-1 o shear(x1 -> x2) o shear(x2 -> x3), eps sin", 0.1),
        CatalogEntry("conjugate_ph", conjugate_ph, "Phi o A_ph o Phi^-1, Phi = shear(x1->x2, sin) shear(x2->x3, cos)", 0.1),
        CatalogEntry("conjugate_anosov", conjugate_anosov, "Phi o A_anosov o Phi^-1", 0.1),
        CatalogEntry("conjugate_anosov_inverse", conjugate_anosov_inverse, "Phi o A_anosov^-1 o Phi^-1", 0.1),
    )
}


def builtin_names() -> List[str]:
    return sorted(CATALOG)


def builtin_map(name: str, epsilon: float = None) -> TorusMapSpec:
    """
    Build a named family member.

    Raises:
        KeyError: If the name is not in the catalog
    """
    if name not in CATALOG:
        raise KeyError(f"Unknown built-in map {name!r}; choose from {builtin_names()}")
    return CATALOG[name].build(epsilon)
