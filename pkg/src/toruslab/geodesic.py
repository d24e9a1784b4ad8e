"""Geodesic flow on the universal cover, lengths, and minimality certificates.

Geodesics are parametrized by arc length: momenta are scaled so the conformal
Hamiltonian equals 1/2 at launch, and the relative energy drift along the
flow is recorded as the integration-quality signal.  Pure functions of
immutable inputs; concurrent invocation needs no coordination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .integrate import hamiltonian, integrate_batch, launch_state
from .metric import TorusMetric, TorusPoint, lattice_shift, reduce

_PROBE_SEED = 20260809


@dataclass
class GeodesicState:
    """Instantaneous state: cover position, momentum, accumulated arc length."""

    position: np.ndarray
    momentum: np.ndarray
    s: float

    def energy(self, metric: TorusMetric) -> float:
        return float(hamiltonian(metric, np.concatenate([self.position,
                                                         self.momentum])))


@dataclass
class GeodesicPath:
    """Arc-length sampled geodesic on the universal cover.

    samples_s is strictly increasing from 0 to total_length with gaps at most
    the sampling spacing; samples_pos are the matching cover positions.
    homotopy is the lattice shift between the reduced endpoints.
    """

    samples_s: np.ndarray
    samples_pos: np.ndarray
    total_length: float
    homotopy: tuple[int, int]
    launch_angle: float
    samples_mom: np.ndarray | None = field(default=None, repr=False)
    energy_drift: float = 0.0

    @property
    def start(self) -> np.ndarray:
        return self.samples_pos[0]

    @property
    def end(self) -> np.ndarray:
        return self.samples_pos[-1]

    def position_at(self, s):
        """Linear interpolation of the stored samples at arc length s."""
        xi = np.interp(s, self.samples_s, self.samples_pos[:, 0])
        eta = np.interp(s, self.samples_s, self.samples_pos[:, 1])
        return np.stack(np.broadcast_arrays(xi, eta), axis=-1)

    def final_state(self) -> GeodesicState:
        mom = self.samples_mom[-1] if self.samples_mom is not None else None
        return GeodesicState(self.samples_pos[-1].copy(),
                             None if mom is None else mom.copy(),
                             float(self.total_length))


def _path_from_samples(metric, rows, angle, drift):
    """Assemble a GeodesicPath from (s, xi, eta, pxi, peta) sample rows."""
    s = rows[:, 0]
    pos = rows[:, 1:3]
    mom = rows[:, 3:5]
    shift = lattice_shift(metric, pos[-1]) - lattice_shift(metric, pos[0])
    return GeodesicPath(samples_s=s, samples_pos=pos,
                        total_length=float(s[-1]),
                        homotopy=(int(shift[0]), int(shift[1])),
                        launch_angle=float(angle), samples_mom=mom,
                        energy_drift=float(drift))


def flow(metric: TorusMetric, start, angle: float, s_max: float,
         tol: float = defaults.FLOW_TOL, *,
         ds: float = defaults.MAX_SAMPLE_SPACING) -> GeodesicPath:
    """Integrate the geodesic from a cover point at a coordinate angle.

    On flat metrics the result is the exact straight line up to roundoff.
    Raises StiffRegionError on step underflow and NonFiniteStateError when
    the metric input produces a non-finite state.
    """
    if s_max <= 0:
        raise ValueError("s_max must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    y0 = launch_state(metric, np.asarray(start, dtype=float), float(angle))
    res = integrate_batch(metric, y0[None, :], [s_max], rtol=tol,
                          sample_ds=ds)
    return _path_from_samples(metric, res.samples[0], angle,
                              res.energy_drift[0])


def flow_batch(metric: TorusMetric, starts, angles, s_max,
               tol: float = defaults.FLOW_TOL, *,
               ds: float = defaults.MAX_SAMPLE_SPACING) -> list[GeodesicPath]:
    """Vectorized flow() over a batch of launches sharing the step sequence."""
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    angles = np.broadcast_to(np.asarray(angles, dtype=float), (starts.shape[0],))
    y0 = launch_state(metric, starts, angles)
    res = integrate_batch(metric, y0, s_max, rtol=tol, sample_ds=ds)
    return [_path_from_samples(metric, res.samples[i], angles[i],
                               res.energy_drift[i])
            for i in range(starts.shape[0])]


def geodesic_distance(metric: TorusMetric, x: TorusPoint, y: TorusPoint,
                      budget: float | None = None) -> float:
    """Shortest connecting-geodesic length between two torus points.

    Searches the connecting family within a budget derived from the chord
    upper bound; the connect module does the shooting.
    """
    from .connect import connect_all  # local import; connect depends on us

    lo, hi = metric.phi_bounds()
    if budget is None:
        dx = (y.uv - x.uv + 0.5) % 1.0 - 0.5
        chord = np.linalg.norm(metric.lattice.to_cover(dx))
        budget = max(chord * math.exp(hi), 1e-6) * 1.001 + 1e-9
    family = connect_all(metric, x, y, budget)
    if not family.paths:
        raise ValueError("no connecting geodesic found within budget")
    return family.paths[0].total_length


def distance_to_closed(metric: TorusMetric, p: TorusPoint, gamma) -> float:
    """Geodesic distance from a point to a closed geodesic (as subsets).

    Minimizes the chord-length bound over the dense samples of gamma and
    refines by a parabolic step in the sample parameter; accurate to the
    sample spacing.
    """
    samples = gamma.dense_points()
    if samples.shape[0] == 0:
        raise ValueError("gamma has no samples")
    pc = p.cover()
    det = abs(metric.lattice.det)
    uv_d = (metric.lattice.to_lattice(samples) - metric.lattice.to_lattice(pc)
            + 0.5) % 1.0 - 0.5
    deltas = metric.lattice.to_cover(uv_d)
    dists = metric.chord_length(pc + 0 * deltas, pc + deltas)
    k = int(np.argmin(dists))
    n = len(dists)
    d0, d1, d2 = dists[(k - 1) % n], dists[k], dists[(k + 1) % n]
    denom = d0 - 2 * d1 + d2
    best = d1
    if denom > 1e-18:  # parabolic refinement over the sample parameter
        t = 0.5 * (d0 - d2) / denom
        t = float(np.clip(t, -1.0, 1.0))
        base = samples[k]
        nxt = samples[(k + 1) % n] if t >= 0 else samples[(k - 1) % n]
        uv_step = (metric.lattice.to_lattice(nxt) - metric.lattice.to_lattice(base)
                   + 0.5) % 1.0 - 0.5
        q = base + abs(t) * metric.lattice.to_cover(uv_step)
        uv_pq = (metric.lattice.to_lattice(q) - metric.lattice.to_lattice(pc)
                 + 0.5) % 1.0 - 0.5
        best = min(best, float(metric.chord_length(pc, pc
                                                   + metric.lattice.to_cover(uv_pq))))
    return float(best)


@dataclass
class MinimalityReport:
    """Outcome of a sampled minimality check.

    verdict is one of "minimal", "not_minimal", "inconclusive"; the last
    means the distance search itself failed, which is distinct from a
    disproof.  worst_defect is max(|s - s'| - d_g) over the probed pairs.
    """

    verdict: str
    worst_defect: float
    n_probes: int
    failures: int = 0

    @property
    def is_minimal(self):
        if self.verdict == "inconclusive":
            return None
        return self.verdict == "minimal"


def certify_minimal(metric: TorusMetric, path: GeodesicPath, n_probes: int,
                    *, defect_tol: float = defaults.DEFECT_TOL,
                    seed: int = _PROBE_SEED,
                    shoot_max_iters: int = defaults.MAX_SHOOT_ITERS) -> MinimalityReport:
    """Probe the defining property of a minimal geodesic on sample pairs.

    For each probed pair (s, s') the true distance between the corresponding
    torus points is computed through the connecting-family search, and the
    defect |s - s'| - d_g must stay at most defect_tol.  The endpoints pair
    (0, total_length) is always probed; the rest are random but seeded.
    """
    from .connect import connect_all

    if n_probes < 2:
        raise ValueError("n_probes must be at least 2")
    L = path.total_length
    if L <= 0:
        return MinimalityReport("minimal", 0.0, 0)
    rng = np.random.default_rng(seed)
    pairs = [(0.0, L)]
    while len(pairs) < n_probes:
        a, b = sorted(rng.uniform(0.0, L, size=2))
        if b - a > 1e-9:
            pairs.append((a, b))

    lo, hi = metric.phi_bounds()
    worst = 0.0
    failures = 0
    for a, b in pairs:
        pa, _ = reduce(metric, path.position_at(a))
        pb, _ = reduce(metric, path.position_at(b))
        arc = b - a
        uv_d = (pb.uv - pa.uv + 0.5) % 1.0 - 0.5
        chord = float(np.linalg.norm(metric.lattice.to_cover(uv_d)))
        budget = min(arc, chord * math.exp(hi) + 1e-6) * 1.0000001 + 1e-9
        try:
            fam = connect_all(metric, pa, pb, budget, max_iters=shoot_max_iters)
            if not fam.paths:
                failures += 1
                continue
            d = fam.paths[0].total_length
        except Exception:
            failures += 1
            continue
        worst = max(worst, arc - d)
    if failures:
        return MinimalityReport("inconclusive", worst, len(pairs), failures)
    verdict = "minimal" if worst <= defect_tol else "not_minimal"
    return MinimalityReport(verdict, worst, len(pairs))
