"""Torus metrics: lattices, conformal Fourier factors, and deck transformations.

The metric family is conformally flat: g = exp(2*phi) * (Euclidean metric of
the plane), with phi a finite Fourier series in lattice coordinates.  Lattice
coordinates (u, v), the coefficients over the basis (e1, e2), are the
canonical internal coordinates; Euclidean cover coordinates (xi, eta) are
derived on demand.  All types are immutable values after construction and are
safe to share across concurrent workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .defaults import MODE_CAP, PHI_GRID, PHI_MARGIN
from .exceptions import ConfigError

TWO_PI = 2.0 * np.pi


class Lattice:
    """A rank-2 lattice in the plane, spanned by basis vectors e1 and e2."""

    def __init__(self, e1, e2):
        e1 = np.asarray(e1, dtype=float)
        e2 = np.asarray(e2, dtype=float)
        if e1.shape != (2,) or e2.shape != (2,):
            raise ConfigError("lattice basis vectors must be planar pairs", field="lattice")
        basis = np.column_stack([e1, e2])
        det = float(np.linalg.det(basis))
        if not np.isfinite(det) or abs(det) <= 1e-12:
            raise ConfigError("lattice basis is degenerate (|det| <= 1e-12)", field="lattice")
        self.e1 = e1
        self.e2 = e2
        self.basis = basis
        self.inv_basis = np.linalg.inv(basis)
        self.det = det

    def to_lattice(self, pts):
        """Cover coordinates -> lattice coefficients. Accepts (..., 2) arrays."""
        return np.asarray(pts, dtype=float) @ self.inv_basis.T

    def to_cover(self, uv):
        """Lattice coefficients -> cover coordinates."""
        return np.asarray(uv, dtype=float) @ self.basis.T

    def __eq__(self, other):
        return isinstance(other, Lattice) and np.array_equal(self.basis, other.basis)

    def __repr__(self):
        return f"Lattice(e1={self.e1.tolist()}, e2={self.e2.tolist()})"


def square_lattice() -> Lattice:
    """The unit square lattice (cover coordinates equal lattice coordinates)."""
    return Lattice((1.0, 0.0), (0.0, 1.0))


@dataclass(frozen=True)
class FourierMode:
    """One term a*cos(2*pi*(k1*u + k2*v)) + b*sin(2*pi*(k1*u + k2*v))."""

    k1: int
    k2: int
    a: float
    b: float


class ConformalFactor:
    """Finite Fourier series phi(u, v) in lattice coordinates.

    Z^2-periodicity in (u, v) holds by construction since all wave vectors
    are integer pairs.  An empty mode list is the flat factor phi == 0.
    """

    def __init__(self, modes=()):
        modes = [FourierMode(int(m[0]), int(m[1]), float(m[2]), float(m[3]))
                 if not isinstance(m, FourierMode) else m for m in modes]
        if len(modes) > MODE_CAP:
            raise ConfigError(f"mode count {len(modes)} exceeds cap {MODE_CAP}", field="modes")
        for m in modes:
            if not (np.isfinite(m.a) and np.isfinite(m.b)):
                raise ConfigError("non-finite Fourier coefficient", field="modes")
        self.modes = tuple(modes)
        if modes:
            self._k = np.array([[m.k1, m.k2] for m in modes], dtype=float)
            self._a = np.array([m.a for m in modes])
            self._b = np.array([m.b for m in modes])
        else:
            self._k = np.zeros((0, 2))
            self._a = np.zeros(0)
            self._b = np.zeros(0)

    @property
    def is_flat(self) -> bool:
        return len(self.modes) == 0

    def value_grad_uv(self, uv):
        """phi and its gradient with respect to (u, v); uv is (..., 2)."""
        uv = np.asarray(uv, dtype=float)
        if self.is_flat:
            return np.zeros(uv.shape[:-1]), np.zeros(uv.shape)
        theta = TWO_PI * (uv @ self._k.T)
        c = np.cos(theta)
        s = np.sin(theta)
        phi = c @ self._a + s @ self._b
        w = TWO_PI * (-(s * self._a) + c * self._b)
        grad = w @ self._k
        return phi, grad


class TorusMetric:
    """Conformally flat metric g = exp(2*phi) * Euclidean on the plane mod a lattice."""

    def __init__(self, lattice: Lattice, phi: ConformalFactor | None = None):
        self.lattice = lattice
        self.phi = phi if phi is not None else ConformalFactor()
        self._phi_bounds = None

    @property
    def is_flat(self) -> bool:
        return self.phi.is_flat

    def phi_grad(self, pts):
        """phi and its cover-coordinate gradient at cover points (..., 2)."""
        pts = np.asarray(pts, dtype=float)
        uv = self.lattice.to_lattice(pts)
        phi, grad_uv = self.phi.value_grad_uv(uv)
        grad_xy = grad_uv @ self.lattice.inv_basis
        return phi, grad_xy

    def phi_bounds(self):
        """(min, max) of phi sampled on a grid, padded by a safety margin."""
        if self._phi_bounds is None:
            if self.is_flat:
                self._phi_bounds = (0.0, 0.0)
            else:
                n = PHI_GRID
                u = np.arange(n) / n
                uv = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1).reshape(-1, 2)
                values, _ = self.phi.value_grad_uv(uv)
                self._phi_bounds = (float(values.min()) - PHI_MARGIN,
                                    float(values.max()) + PHI_MARGIN)
        return self._phi_bounds

    def chord_length(self, p, q, n_quad: int = 9):
        """Length in g of the straight cover segment from p to q.

        Simpson quadrature of exp(phi) along the chord; an upper bound for the
        geodesic distance, exact on flat metrics.  Broadcasts over leading axes.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        euclid = np.linalg.norm(q - p, axis=-1)
        if self.is_flat:
            return euclid
        t = np.linspace(0.0, 1.0, n_quad)
        pts = p[..., None, :] + t[:, None] * (q - p)[..., None, :]
        phi, _ = self.phi_grad(pts)
        w = np.full(n_quad, 2.0)
        w[1:-1:2] = 4.0
        w[0] = w[-1] = 1.0
        w /= w.sum()
        return euclid * (np.exp(phi) @ w)

    def __repr__(self):
        kind = "flat" if self.is_flat else f"{len(self.phi.modes)} modes"
        return f"TorusMetric({self.lattice!r}, {kind})"


@dataclass(frozen=True)
class TorusPoint:
    """A fundamental-domain point, stored as lattice coefficients in [0, 1)."""

    u: float
    v: float
    lattice: Lattice = field(compare=False)

    def __post_init__(self):
        if not (0.0 <= self.u < 1.0 and 0.0 <= self.v < 1.0):
            raise ValueError(f"lattice coefficients ({self.u}, {self.v}) not in [0,1)")

    @property
    def uv(self):
        return np.array([self.u, self.v])

    def cover(self):
        """Lift into the fundamental domain of the universal cover."""
        return self.lattice.to_cover(self.uv)

    def key(self, digits: int = 12):
        return (round(self.u, digits), round(self.v, digits))


def torus_point(metric_or_lattice, u, v) -> TorusPoint:
    """Build a TorusPoint from lattice coefficients, reducing them mod 1."""
    lattice = getattr(metric_or_lattice, "lattice", metric_or_lattice)
    return TorusPoint(float(u) % 1.0, float(v) % 1.0, lattice)


def reduce(metric: TorusMetric, p) -> tuple[TorusPoint, tuple[int, int]]:
    """Reduce a cover point to its fundamental-domain representative.

    Returns (point, shift) with p = point.cover() + shift[0]*e1 + shift[1]*e2.
    """
    uv = metric.lattice.to_lattice(np.asarray(p, dtype=float))
    shift = np.floor(uv).astype(int)
    frac = uv - shift
    frac = np.where(frac >= 1.0, 0.0, frac)  # guard exact-boundary rounding
    pt = TorusPoint(float(frac[0]), float(frac[1]), metric.lattice)
    return pt, (int(shift[0]), int(shift[1]))


def lattice_shift(metric: TorusMetric, p) -> np.ndarray:
    """Integer lattice shift (floor of lattice coefficients) of cover points."""
    uv = metric.lattice.to_lattice(np.asarray(p, dtype=float))
    return np.floor(uv).astype(int)


def deck_translate(metric: TorusMetric, p, q: int, r: int) -> np.ndarray:
    """Translate a cover point by q*e1 + r*e2 (the deck action of (q, r))."""
    p = np.asarray(p, dtype=float)
    return p + q * metric.lattice.e1 + r * metric.lattice.e2


def conformal_value_grad(metric: TorusMetric, p) -> tuple[float, float, float]:
    """phi and its analytic cover-coordinate derivatives at one cover point."""
    phi, grad = metric.phi_grad(np.asarray(p, dtype=float))
    return float(phi), float(grad[0]), float(grad[1])


def load_metric(path) -> TorusMetric:
    """Read a metric specification file.

    Schema: {"lattice": {"e1": [x, y], "e2": [x, y]}, "modes":
    [{"k1": int, "k2": int, "a": real, "b": real}, ...]}.  A missing "modes"
    key means the flat metric; unknown keys are rejected.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed metric file: {exc.msg}", field="metric",
                          line=exc.lineno) from exc
    return metric_from_dict(doc)


def metric_from_dict(doc) -> TorusMetric:
    if not isinstance(doc, dict):
        raise ConfigError("metric document must be a JSON object", field="metric")
    unknown = set(doc) - {"lattice", "modes"}
    if unknown:
        raise ConfigError(f"unknown metric keys: {sorted(unknown)}",
                          field=sorted(unknown)[0])
    lat_doc = doc.get("lattice", {"e1": [1, 0], "e2": [0, 1]})
    unknown = set(lat_doc) - {"e1", "e2"}
    if unknown:
        raise ConfigError(f"unknown lattice keys: {sorted(unknown)}",
                          field=sorted(unknown)[0])
    lattice = Lattice(lat_doc.get("e1", [1, 0]), lat_doc.get("e2", [0, 1]))
    modes = []
    for i, m in enumerate(doc.get("modes", [])):
        unknown = set(m) - {"k1", "k2", "a", "b"}
        if unknown:
            raise ConfigError(f"unknown mode keys: {sorted(unknown)}",
                              field=f"modes[{i}]")
        modes.append((m.get("k1", 0), m.get("k2", 0), m.get("a", 0.0), m.get("b", 0.0)))
    return TorusMetric(lattice, ConformalFactor(modes))


def metric_to_dict(metric: TorusMetric) -> dict:
    doc = {"lattice": {"e1": metric.lattice.e1.tolist(),
                       "e2": metric.lattice.e2.tolist()}}
    if not metric.is_flat:
        doc["modes"] = [{"k1": m.k1, "k2": m.k2, "a": m.a, "b": m.b}
                        for m in metric.phi.modes]
    return doc
