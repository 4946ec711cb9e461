"""The three dynamical systems and their structural checks.

Complex scalars are plain Python/numpy ``complex`` values; constructors
reject non-finite components.  Points of C^2 are ``Point2`` named tuples.
All system descriptors are immutable after construction and every operation
here is a pure function, so everything is safe to share across workers.

Coefficient conventions:

* univariate polynomials: ascending coefficient tuples, ``c[k]`` multiplies
  ``z**k``;
* bivariate polynomials: dense tables ``c[i][j]`` multiplying ``x**i * y**j``
  with total degree at most 16 (desk scale).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

__all__ = [
    "MalformedSystemError",
    "Point2",
    "DegreeDFamilyParam",
    "RegularEndo",
    "HenonFactor",
    "HenonMap",
    "MarkedPair",
    "family_eval",
    "family_eval_deriv",
    "family_coefficients",
    "family_critical_points",
    "elementary_symmetric",
    "endo_eval",
    "endo_jacobian",
    "endo_top_coefficients",
    "endo_regularity_check",
    "henon_eval",
    "henon_inverse_eval",
    "henon_jacobian",
    "henon_inverse_jacobian",
]

MAX_DEGREE = 16


class MalformedSystemError(ValueError):
    """Raised for structurally invalid system descriptors."""


def _check_finite(z: complex, what: str) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise MalformedSystemError(f"{what} must have finite components, got {z!r}")
    return z


class Point2(NamedTuple):
    """A point (x, y) of C^2."""

    x: complex
    y: complex

    @staticmethod
    def of(x: complex, y: complex) -> "Point2":
        return Point2(_check_finite(x, "x"), _check_finite(y, "y"))

    def norm(self) -> float:
        """Max norm, the norm used by every escape estimate in this package."""
        return max(abs(self.x), abs(self.y))


# ---------------------------------------------------------------------------
# critically marked degree-d polynomial family
# ---------------------------------------------------------------------------

def elementary_symmetric(values: tuple[complex, ...]) -> list[complex]:
    """All elementary symmetric functions sigma_0..sigma_n of ``values``."""
    sig = [1.0 + 0j] + [0j] * len(values)
    for k, v in enumerate(values, start=1):
        for j in range(k, 0, -1):
            sig[j] = sig[j] + v * sig[j - 1]
    return sig


@dataclass(frozen=True)
class DegreeDFamilyParam:
    """Parameter (x_1..x_{d-2}, y) of the critically marked degree-d family.

    The family member is the polynomial

        P(z) = z^d/d + sum_{j=2}^{d-1} (-1)^{d-j} sigma_{d-j}(x) z^j/j + y

    whose derivative factors as z * prod (z - x_k), so the marked critical
    points are 0, x_1, ..., x_{d-2}.  For d=3 this reads z^3/3 - (x/2) z^2 + y.
    """

    d: int
    coords: tuple[complex, ...]
    y: complex

    def __post_init__(self):
        if self.d < 3:
            raise MalformedSystemError(f"family degree must be >= 3, got {self.d}")
        if self.d > MAX_DEGREE:
            raise MalformedSystemError(f"family degree {self.d} exceeds desk cap {MAX_DEGREE}")
        coords = tuple(_check_finite(c, "coordinate") for c in self.coords)
        if len(coords) != self.d - 2:
            raise MalformedSystemError(
                f"degree-{self.d} family needs {self.d - 2} coordinates, got {len(coords)}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "y", _check_finite(self.y, "y"))

    @classmethod
    def cubic(cls, x: complex, y: complex) -> "DegreeDFamilyParam":
        return cls(3, (x,), y)


def family_coefficients(param: DegreeDFamilyParam) -> np.ndarray:
    """Ascending coefficients of P_{x,y}; the z^d coefficient is exactly 1/d."""
    d = param.d
    sig = elementary_symmetric(param.coords)
    coeffs = np.zeros(d + 1, dtype=complex)
    coeffs[0] = param.y
    for j in range(2, d):
        coeffs[j] = (-1) ** (d - j) * sig[d - j] / j
    coeffs[d] = 1.0 / d
    return coeffs


def family_eval(param: DegreeDFamilyParam, z: complex) -> complex:
    c = family_coefficients(param)
    acc = 0j
    for k in range(param.d, -1, -1):
        acc = acc * z + c[k]
    return acc


def family_eval_deriv(param: DegreeDFamilyParam, z: complex) -> complex:
    """P'(z) = z * prod (z - x_k), evaluated in product form."""
    acc = complex(z)
    for xk in param.coords:
        acc *= z - xk
    return acc


def family_critical_points(param: DegreeDFamilyParam) -> tuple[complex, ...]:
    """The marked critical points (0, x_1, ..., x_{d-2})."""
    return (0j,) + tuple(complex(c) for c in param.coords)


# ---------------------------------------------------------------------------
# regular polynomial endomorphisms of C^2
# ---------------------------------------------------------------------------

def _as_table(coeffs) -> tuple[tuple[complex, ...], ...]:
    rows = tuple(tuple(_check_finite(c, "coefficient") for c in row) for row in coeffs)
    if not rows or not rows[0]:
        raise MalformedSystemError("empty coefficient table")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise MalformedSystemError("ragged coefficient table")
    return rows


def _table_degree(table) -> int:
    deg = -1
    for i, row in enumerate(table):
        for j, c in enumerate(row):
            if c != 0:
                deg = max(deg, i + j)
    return deg


@dataclass(frozen=True)
class RegularEndo:
    """Polynomial self-map of C^2 given by two dense coefficient tables.

    ``p_coeffs[i][j]`` multiplies x^i y^j in the first coordinate, likewise
    ``q_coeffs`` for the second.  ``D`` is the algebraic degree; the map is
    regular when its top-degree homogeneous parts vanish simultaneously only
    at the origin, which ``endo_regularity_check`` decides.
    """

    p_coeffs: tuple[tuple[complex, ...], ...]
    q_coeffs: tuple[tuple[complex, ...], ...]
    D: int

    def __post_init__(self):
        object.__setattr__(self, "p_coeffs", _as_table(self.p_coeffs))
        object.__setattr__(self, "q_coeffs", _as_table(self.q_coeffs))
        degs = (_table_degree(self.p_coeffs), _table_degree(self.q_coeffs))
        if max(degs) != self.D:
            raise MalformedSystemError(
                f"declared degree {self.D} but coefficient tables have degree {max(degs)}")
        if self.D < 2:
            raise MalformedSystemError(f"endomorphism degree must be >= 2, got {self.D}")
        if self.D > MAX_DEGREE:
            raise MalformedSystemError(f"degree {self.D} exceeds desk cap {MAX_DEGREE}")

    @classmethod
    def from_monomials(cls, p: dict, q: dict) -> "RegularEndo":
        """Build from {(i, j): coeff} monomial dicts."""
        deg = max(i + j for d in (p, q) for (i, j) in d)
        size = deg + 1
        tables = []
        for mono in (p, q):
            t = [[0j] * size for _ in range(size)]
            for (i, j), c in mono.items():
                t[i][j] = complex(c)
            tables.append(tuple(tuple(r) for r in t))
        return cls(tables[0], tables[1], deg)

    @classmethod
    def power_map(cls, D: int) -> "RegularEndo":
        """The model map (x^D, y^D)."""
        return cls.from_monomials({(D, 0): 1.0}, {(0, D): 1.0})

    def p_array(self) -> np.ndarray:
        return np.array(self.p_coeffs, dtype=complex)

    def q_array(self) -> np.ndarray:
        return np.array(self.q_coeffs, dtype=complex)

    def coordinate_degrees(self) -> tuple[int, int]:
        return (_table_degree(self.p_coeffs), _table_degree(self.q_coeffs))


def _eval_table(table, x: complex, y: complex) -> complex:
    # Horner in x, inner Horner in y
    acc = 0j
    for row in reversed(table):
        inner = 0j
        for c in reversed(row):
            inner = inner * y + c
        acc = acc * x + inner
    return acc


def endo_eval(h: RegularEndo, p: Point2) -> Point2:
    p = Point2(*p)
    return Point2(_eval_table(h.p_coeffs, p.x, p.y), _eval_table(h.q_coeffs, p.x, p.y))


def _table_partials(table) -> tuple[list, list]:
    n = len(table)
    dx = [[(i + 1) * table[i + 1][j] for j in range(n)] for i in range(n - 1)]
    dy = [[(j + 1) * table[i][j + 1] for j in range(n - 1)] for i in range(n)]
    return dx or [[0j]], dy or [[0j]]


def endo_jacobian(h: RegularEndo, p: Point2) -> np.ndarray:
    """Complex 2x2 Jacobian matrix of h at p."""
    p = Point2(*p)
    out = np.empty((2, 2), dtype=complex)
    for row, table in enumerate((h.p_coeffs, h.q_coeffs)):
        dx, dy = _table_partials(table)
        out[row, 0] = _eval_table(dx, p.x, p.y)
        out[row, 1] = _eval_table(dy, p.x, p.y)
    return out


def endo_top_coefficients(h: RegularEndo) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (a_0..a_D) of the degree-D homogeneous parts.

    Entry k multiplies x^k y^(D-k).  Coordinates of total degree < D get an
    all-zero vector.
    """
    D = h.D
    out = []
    for table in (h.p_coeffs, h.q_coeffs):
        v = np.zeros(D + 1, dtype=complex)
        for i, row in enumerate(table):
            for j, c in enumerate(row):
                if i + j == D:
                    v[i] = c
        out.append(v)
    return out[0], out[1]


def _sylvester_resultant_exact(a: list[Fraction], b: list[Fraction], n: int) -> Fraction:
    """Resultant of two formal-degree-n polynomials via fraction-free elimination."""
    size = 2 * n
    m = [[Fraction(0)] * size for _ in range(size)]
    for r in range(n):
        for k in range(n + 1):
            m[r][r + k] = a[n - k]
            m[n + r][r + k] = b[n - k]
    # Bareiss would avoid growth; plain fraction Gaussian elimination is fine at desk scale
    det = Fraction(1)
    for col in range(size):
        piv = next((r for r in range(col, size) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = m[col][col]
        for r in range(col + 1, size):
            f = m[r][col] / inv
            if f:
                for c in range(col, size):
                    m[r][c] -= f * m[col][c]
    return det


def _exact_rational(z: complex) -> tuple[Fraction, Fraction] | None:
    re, im = Fraction(z.real), Fraction(z.imag)
    if re.limit_denominator(10**6) == re and im.limit_denominator(10**6) == im:
        return re, im
    return None


def endo_regularity_check(h: RegularEndo, tol: float = 1e-12) -> bool:
    """True iff the top homogeneous parts share no projective root.

    Decided by the resultant of the two degree-D forms (as formal degree-D
    polynomials in x/y, so the point at infinity of the pencil is covered).
    The float path normalizes by the coefficient scale; when every
    coefficient is exactly representable as a small rational, an exact
    Fraction resultant settles borderline cases.
    """
    degs = h.coordinate_degrees()
    if min(degs) < h.D:
        raise MalformedSystemError(
            f"coordinate degrees {degs} differ; a regular map needs both equal to D={h.D}")
    a, b = endo_top_coefficients(h)
    n = h.D

    # exact path for rational real coefficients
    if all(abs(c.imag) == 0 for c in np.concatenate([a, b])):
        ra = [_exact_rational(c) for c in a]
        rb = [_exact_rational(c) for c in b]
        if all(r is not None for r in ra + rb):
            res = _sylvester_resultant_exact([r[0] for r in ra], [r[0] for r in rb], n)
            return res != 0

    size = 2 * n
    m = np.zeros((size, size), dtype=complex)
    for r in range(n):
        for k in range(n + 1):
            m[r, r + k] = a[n - k]
            m[n + r, r + k] = b[n - k]
    res = np.linalg.det(m)
    scale = (np.linalg.norm(a) * np.linalg.norm(b)) ** n
    return bool(abs(res) > tol * max(scale, 1e-300))


# ---------------------------------------------------------------------------
# generalized Henon maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HenonFactor:
    """Elementary factor (x, y) -> (y, p(y) - delta*x)."""

    coeffs: tuple[complex, ...]
    delta: complex

    def __post_init__(self):
        coeffs = tuple(_check_finite(c, "coefficient") for c in self.coeffs)
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        if len(coeffs) - 1 < 2:
            raise MalformedSystemError("Henon factor polynomial must have degree >= 2")
        object.__setattr__(self, "coeffs", coeffs)
        delta = _check_finite(self.delta, "delta")
        if delta == 0:
            raise MalformedSystemError("Henon factor needs nonzero delta")
        object.__setattr__(self, "delta", delta)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def p_eval(self, z: complex) -> complex:
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    def p_deriv(self, z: complex) -> complex:
        acc = 0j
        for k in range(self.degree, 0, -1):
            acc = acc * z + k * self.coeffs[k]
        return acc


@dataclass(frozen=True)
class HenonMap:
    """Composition of elementary Henon factors, applied first factor first.

    The Jacobian determinant of each factor is +delta_j (differentiating
    (x,y) -> (y, p(y) - delta*x)), so det Df = prod delta_j; that product is
    the sign convention reported by ``jacobian_det``.
    """

    factors: tuple[HenonFactor, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise MalformedSystemError("Henon map needs at least one factor")
        object.__setattr__(self, "factors", factors)
        if self.degree > MAX_DEGREE ** 2:
            raise MalformedSystemError("composed degree exceeds desk cap")

    @classmethod
    def single(cls, coeffs, delta) -> "HenonMap":
        return cls((HenonFactor(tuple(coeffs), delta),))

    @property
    def degree(self) -> int:
        deg = 1
        for f in self.factors:
            deg *= f.degree
        return deg

    @property
    def jacobian_det(self) -> complex:
        out = 1.0 + 0j
        for f in self.factors:
            out *= f.delta
        return out


def henon_eval(f: HenonMap, p: Point2) -> Point2:
    x, y = complex(p[0]), complex(p[1])
    for fac in f.factors:
        x, y = y, fac.p_eval(y) - fac.delta * x
    return Point2(x, y)


def henon_inverse_eval(f: HenonMap, p: Point2) -> Point2:
    """Inverse factors (u, v) -> ((p(u) - v)/delta, u), applied in reverse."""
    x, y = complex(p[0]), complex(p[1])
    for fac in reversed(f.factors):
        x, y = (fac.p_eval(x) - y) / fac.delta, x
    return Point2(x, y)


def henon_jacobian(f: HenonMap, p: Point2) -> np.ndarray:
    x, y = complex(p[0]), complex(p[1])
    J = np.eye(2, dtype=complex)
    for fac in f.factors:
        step = np.array([[0, 1], [-fac.delta, fac.p_deriv(y)]], dtype=complex)
        J = step @ J
        x, y = y, fac.p_eval(y) - fac.delta * x
    return J


def henon_inverse_jacobian(f: HenonMap, p: Point2) -> np.ndarray:
    x, y = complex(p[0]), complex(p[1])
    J = np.eye(2, dtype=complex)
    for fac in reversed(f.factors):
        step = np.array([[fac.p_deriv(x) / fac.delta, -1 / fac.delta], [1, 0]],
                        dtype=complex)
        J = step @ J
        x, y = (fac.p_eval(x) - y) / fac.delta, x
    return J


# ---------------------------------------------------------------------------
# one-parameter analytic families with a marked point
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MarkedPair:
    """A family P_t of fixed degree with a marked point a(t).

    ``coeffs_t[j]`` holds the ascending t-polynomial for the z^j coefficient;
    ``a_t`` is the ascending t-polynomial of the marked point.  The leading
    z-coefficient must be a nonzero constant so the z-degree cannot drop
    anywhere in the working domain.
    """

    coeffs_t: tuple[tuple[complex, ...], ...]
    a_t: tuple[complex, ...]

    def __post_init__(self):
        cz = tuple(tuple(complex(c) for c in row) for row in self.coeffs_t)
        if len(cz) - 1 < 2:
            raise MalformedSystemError("marked pair family degree must be >= 2")
        lead = cz[-1]
        if lead[0] == 0 or any(c != 0 for c in lead[1:]):
            raise MalformedSystemError(
                "leading z-coefficient must be a nonzero constant in t")
        object.__setattr__(self, "coeffs_t", cz)
        object.__setattr__(self, "a_t", tuple(complex(c) for c in self.a_t))

    @classmethod
    def unicritical(cls, d: int = 2) -> "MarkedPair":
        """The model pair P_t(z) = z^d + t with marked point a = 0."""
        rows = [(0j, 1.0 + 0j)] + [(0j,)] * (d - 1) + [(1.0 + 0j,)]
        return cls(tuple(rows), (0j,))

    @property
    def degree(self) -> int:
        return len(self.coeffs_t) - 1

    def poly_at(self, t: complex) -> np.ndarray:
        """Ascending z-coefficients of P_t."""
        return np.array([_polyval(row, t) for row in self.coeffs_t], dtype=complex)

    def a_at(self, t: complex) -> complex:
        return _polyval(self.a_t, t)

    def a_dt(self, t: complex) -> complex:
        return _polyval(_polyder(self.a_t), t)

    def coeffs_dt_at(self, t: complex) -> np.ndarray:
        """Ascending z-coefficients of (d/dt) P_t."""
        return np.array([_polyval(_polyder(row), t) for row in self.coeffs_t],
                        dtype=complex)


def _polyval(coeffs, z: complex) -> complex:
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


def _polyder(coeffs) -> tuple[complex, ...]:
    return tuple(k * coeffs[k] for k in range(1, len(coeffs))) or (0j,)
