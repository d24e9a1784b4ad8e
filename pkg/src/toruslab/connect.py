"""Connecting geodesic families: lattice-translate targets and angle shooting.

Two torus points are joined by lifting one of them to every lattice translate
within a conformally padded disk and shooting from the other's lift toward
each translate.  Shooting iterates on the launch angle against the signed
miss at closest approach; a fan of perturbed seed angles per target catches
multiple geodesics in one homotopy class.  Completeness beyond the fan is
heuristic and reported as such.  Shooting per target is independent; results
merge deterministically sorted by (length, homotopy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .geodesic import GeodesicPath, _path_from_samples
from .geom2d import cover_crossings
from .integrate import integrate_batch, launch_state
from .metric import TorusMetric, TorusPoint, reduce
from .exceptions import TargetOverflowError


@dataclass
class MissReport:
    """A shooting attempt that did not converge; carries the best residual."""

    target: np.ndarray
    seed_angle: float
    best_angle: float
    best_miss: float
    iters: int


@dataclass
class ConnectingFamily:
    """All found geodesics joining x and y within the length budget."""

    x: TorusPoint
    y: TorusPoint
    budget_L: float
    paths: list[GeodesicPath]
    metric: TorusMetric = field(repr=False)
    seed_fan: int = defaults.SEED_FAN
    misses: list[MissReport] = field(default_factory=list, repr=False)
    crossing_violations: list = field(default_factory=list)
    completeness_note: str = ("family found by a finite seed fan per lattice "
                              "translate; completeness is heuristic")

    def __len__(self):
        return len(self.paths)

    def to_json_dict(self) -> dict:
        return {
            "x": [self.x.u, self.x.v],
            "y": [self.y.u, self.y.v],
            "L": self.budget_L,
            "paths": [{"homotopy": list(p.homotopy), "length": p.total_length,
                       "angle": p.launch_angle} for p in self.paths],
        }


def enumerate_targets(metric: TorusMetric, x: TorusPoint, y: TorusPoint,
                      L: float, *, cap: int = defaults.TARGET_CAP) -> list[np.ndarray]:
    """Lifts of y within the conformal pruning radius of x's lift.

    The radius L * exp(max phi) guarantees no geodesic of length at most L
    is pruned.  Targets are sorted by Euclidean distance from x's lift; the
    zero translate is dropped when x and y coincide.
    """
    if L <= 0:
        raise ValueError("length budget must be positive")
    lo, hi = metric.phi_bounds()
    radius = L * math.exp(hi)
    lat = metric.lattice
    x_cover = x.cover()
    det = abs(lat.det)
    diam = np.linalg.norm(lat.e1) + np.linalg.norm(lat.e2)
    estimate = math.pi * (radius + diam) ** 2 / det
    if estimate > 4 * cap:
        raise TargetOverflowError(
            f"estimated {estimate:.0f} lattice translates exceeds cap {cap}",
            estimated_count=int(estimate), cap=cap)
    center = lat.to_lattice(x_cover) - y.uv
    h1 = radius * np.linalg.norm(lat.inv_basis[0]) + 1
    h2 = radius * np.linalg.norm(lat.inv_basis[1]) + 1
    ms = np.arange(math.floor(center[0] - h1), math.ceil(center[0] + h1) + 1)
    ns = np.arange(math.floor(center[1] - h2), math.ceil(center[1] + h2) + 1)
    mm, nn = np.meshgrid(ms, ns, indexing="ij")
    shifts = np.stack([mm.ravel(), nn.ravel()], axis=-1)
    lifts = lat.to_cover(y.uv + shifts)
    dist = np.linalg.norm(lifts - x_cover, axis=-1)
    keep = (dist <= radius) & (dist > 1e-12)
    lifts, dist = lifts[keep], dist[keep]
    if len(lifts) > cap:
        raise TargetOverflowError(
            f"{len(lifts)} lattice translates exceeds cap {cap}",
            estimated_count=len(lifts), cap=cap)
    order = np.argsort(dist, kind="stable")
    return [lifts[i] for i in order]


def _refine_closest(store, member: int, k_best: int, target):
    """Closest approach of one member near step k_best, Hermite-refined.

    Returns (s_star, pos, vel) with vel the arc-length velocity there.
    """
    span = store.spans[member]
    best = None
    for k in range(max(0, k_best - 1), min(len(store.tau0), k_best + 2)):
        h = store.tau1[k] - store.tau0[k]
        y0 = store.y0[k, member]
        y1 = store.y1[k, member]
        f0 = store.f0[k, member] * h
        f1 = store.f1[k, member] * h
        c0 = y0
        c1 = f0
        c2 = 3 * (y1 - y0) - 2 * f0 - f1
        c3 = 2 * (y0 - y1) + f0 + f1
        theta = np.linspace(0.0, 1.0, 9)
        pts = (c0[None, :] + theta[:, None] * (c1[None, :] + theta[:, None]
               * (c2[None, :] + theta[:, None] * c3[None, :])))
        d2 = np.sum((pts[:, :2] - target) ** 2, axis=1)
        j = int(np.argmin(d2))
        th = theta[j]
        for _ in range(6):  # Newton on (P - T) . P'
            p = c0 + th * (c1 + th * (c2 + th * c3))
            dp = c1 + th * (2 * c2 + 3 * th * c3)
            d2p = 2 * c2 + 6 * th * c3
            g = (p[:2] - target) @ dp[:2]
            gp = dp[:2] @ dp[:2] + (p[:2] - target) @ d2p[:2]
            if gp <= 0:
                break
            th = float(np.clip(th - g / gp, 0.0, 1.0))
        p = c0 + th * (c1 + th * (c2 + th * c3))
        dist = float(np.linalg.norm(p[:2] - target))
        if best is None or dist < best[0]:
            s_star = (store.tau0[k] + th * h) * span
            dp = (c1 + th * (2 * c2 + 3 * th * c3)) / (h * span)
            best = (dist, float(s_star), p, dp[:2])
    return best[1], best[2], best[3]


def _shoot_batch(metric: TorusMetric, origin, targets, seed_angles, *,
                 endpoint_tol=defaults.ENDPOINT_TOL,
                 max_iters=defaults.MAX_SHOOT_ITERS,
                 rtol=defaults.SHOOT_TOL):
    """Iterate launch angles for a batch of targets from one origin.

    Returns per member a dict with convergence flag, final angle, hit length,
    miss distance, and iteration count.
    """
    origin = np.asarray(origin, dtype=float)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    B = targets.shape[0]
    angles = np.array(seed_angles, dtype=float).copy()
    lo, hi = metric.phi_bounds()
    chords = np.linalg.norm(targets - origin, axis=-1)
    horizons = chords * math.exp(hi) * 1.05 + 0.05

    state = [dict(converged=False, angle=float(angles[i]), length=np.nan,
                  miss=np.inf, iters=0, prev=None, bracket=None)
             for i in range(B)]
    active = list(range(B))
    for it in range(max_iters + 1):
        if not active:
            break
        y0 = launch_state(metric, origin, angles[active])
        res = integrate_batch(metric, y0, horizons[active], rtol=rtol,
                              keep_steps=True)
        store = res.steps
        ends = np.concatenate([store.y0[:1], store.y1], axis=0)  # (n+1, b, 4)
        d = np.linalg.norm(ends[:, :, :2] - targets[active][None, :, :], axis=-1)
        k_best = np.argmin(d, axis=0)
        next_active = []
        for bi, i in enumerate(active):
            st = state[i]
            s_star, p, vel = _refine_closest(store, bi, max(k_best[bi] - 1, 0),
                                             targets[i])
            m_vec = p[:2] - targets[i]
            miss = float(np.linalg.norm(m_vec))
            speed = np.linalg.norm(vel)
            vhat = vel / speed if speed > 0 else np.array([1.0, 0.0])
            sigma = float(vhat[0] * m_vec[1] - vhat[1] * m_vec[0])
            st["iters"] = it
            if miss < st["miss"]:
                st["miss"] = miss
                st["angle"] = float(angles[i])
                st["length"] = s_star
            if miss <= endpoint_tol:
                st["converged"] = True
                continue
            if it == max_iters:
                continue
            # angle update: secant on the signed miss, bisection fallback
            br = st["bracket"]
            if br is not None and np.sign(sigma) != np.sign(br[1]):
                st["bracket"] = (br[0], br[1], float(angles[i]), sigma)
            elif br is not None and np.sign(sigma) != np.sign(br[3]):
                st["bracket"] = (float(angles[i]), sigma, br[2], br[3])
            prev = st["prev"]
            st["prev"] = (float(angles[i]), sigma)
            if prev is None:
                new = angles[i] - sigma / max(chords[i], 1e-9)
            else:
                dsig = sigma - prev[1]
                if abs(dsig) > 1e-300:
                    new = angles[i] - sigma * (angles[i] - prev[0]) / dsig
                else:
                    new = angles[i] + 1e-7
                if prev is not None and np.sign(sigma) != np.sign(prev[1]):
                    st["bracket"] = (prev[0], prev[1], float(angles[i]), sigma)
            br = st["bracket"]
            if br is not None:
                lo_a, hi_a = sorted((br[0], br[2]))
                if not (lo_a < new < hi_a) or not np.isfinite(new):
                    new = 0.5 * (lo_a + hi_a)
            if not np.isfinite(new):
                new = angles[i] + 1e-6
            angles[i] = new
            next_active.append(i)
        active = next_active
    return state


def shoot(metric: TorusMetric, start, to, seed_angle: float | None = None, *,
          endpoint_tol=defaults.ENDPOINT_TOL,
          max_iters=defaults.MAX_SHOOT_ITERS, rtol=defaults.SHOOT_TOL,
          ds=defaults.MAX_SAMPLE_SPACING):
    """Shoot one geodesic between two cover points.

    Returns a GeodesicPath truncated at the hit, or a MissReport after
    max_iters without reaching the endpoint tolerance.
    """
    start = np.asarray(start, dtype=float)
    to = np.asarray(to, dtype=float)
    if np.linalg.norm(to - start) <= 1e-12:
        raise ValueError("shoot requires distinct endpoints")
    if seed_angle is None:
        seed_angle = math.atan2(to[1] - start[1], to[0] - start[0])
    out = _shoot_batch(metric, start, to[None, :], [seed_angle],
                       endpoint_tol=endpoint_tol, max_iters=max_iters,
                       rtol=rtol)[0]
    if not out["converged"]:
        return MissReport(target=to, seed_angle=float(seed_angle),
                          best_angle=out["angle"], best_miss=out["miss"],
                          iters=out["iters"])
    return _record_paths(metric, start, [out], rtol=rtol, ds=ds)[0]


def _record_paths(metric, origin, outcomes, *, rtol, ds):
    """Re-integrate converged shots over their hit lengths, densely sampled."""
    angles = np.array([o["angle"] for o in outcomes])
    spans = np.array([o["length"] for o in outcomes])
    y0 = launch_state(metric, np.asarray(origin, dtype=float),
                      angles) if len(outcomes) else np.zeros((0, 4))
    if len(outcomes) == 0:
        return []
    res = integrate_batch(metric, y0, spans, rtol=rtol, sample_ds=ds)
    return [_path_from_samples(metric, res.samples[i], angles[i],
                               res.energy_drift[i])
            for i in range(len(outcomes))]


def connect_all(metric: TorusMetric, x: TorusPoint, y: TorusPoint, L: float,
                *, endpoint_tol=defaults.ENDPOINT_TOL,
                angle_dedup_tol=defaults.ANGLE_DEDUP_TOL,
                seed_fan=defaults.SEED_FAN,
                fan_step=defaults.SEED_FAN_STEP,
                max_iters=defaults.MAX_SHOOT_ITERS,
                target_cap=defaults.TARGET_CAP,
                rtol=defaults.SHOOT_TOL,
                ds=defaults.MAX_SAMPLE_SPACING,
                check_crossings=True) -> ConnectingFamily:
    """Enumerate geodesics from x to y with length at most L.

    Each lattice translate of y within the pruning radius is shot at from the
    direct angle plus a fan of perturbed seeds; converged, deduplicated,
    budget-respecting paths are returned sorted by (length, homotopy).
    """
    targets = enumerate_targets(metric, x, y, L, cap=target_cap)
    origin = x.cover()
    fan = [0.0]
    for k in range(1, seed_fan // 2 + 1):
        fan.extend([k * fan_step, -k * fan_step])
    members = []
    seeds = []
    for t in targets:
        direct = math.atan2(t[1] - origin[1], t[0] - origin[0])
        for offs in fan:
            members.append(t)
            seeds.append(direct + offs)
    family = ConnectingFamily(x=x, y=y, budget_L=float(L), paths=[],
                              metric=metric, seed_fan=seed_fan)
    if not members:
        return family
    outcomes = _shoot_batch(metric, origin, np.array(members), seeds,
                            endpoint_tol=endpoint_tol, max_iters=max_iters,
                            rtol=rtol)
    converged = []
    for o, t, seed in zip(outcomes, members, seeds):
        if o["converged"] and o["length"] <= L:
            converged.append(o)
        elif not o["converged"]:
            family.misses.append(MissReport(target=t, seed_angle=seed,
                                            best_angle=o["angle"],
                                            best_miss=o["miss"],
                                            iters=o["iters"]))
    paths = _record_paths(metric, origin, converged, rtol=rtol, ds=ds)
    # drop paths whose endpoint does not reduce to y (fan seeds may wander)
    kept = []
    for p in paths:
        end_pt, _ = reduce(metric, p.end)
        duv = (end_pt.uv - y.uv + 0.5) % 1.0 - 0.5
        if np.linalg.norm(metric.lattice.to_cover(duv)) <= 10 * endpoint_tol:
            kept.append(p)
    # dedup on (homotopy, launch angle)
    kept.sort(key=lambda p: (p.homotopy, p.launch_angle))
    dedup = []
    for p in kept:
        if dedup and dedup[-1].homotopy == p.homotopy and \
                abs(dedup[-1].launch_angle - p.launch_angle) <= angle_dedup_tol:
            continue
        dedup.append(p)
    dedup.sort(key=lambda p: (p.total_length, p.homotopy))
    family.paths = dedup
    if check_crossings:
        family.crossing_violations = find_precross_violations(family)
    return family


def find_precross_violations(family: ConnectingFamily, *, margin=1e-3,
                             min_sin=1e-3) -> list:
    """Transversal interior crossings between lifted paths of one family.

    Two shot geodesics from the same lift heading to different targets must
    not cross before their endpoints; any such crossing means a non-minimal
    path was found and is reported rather than dropped.
    """
    out = []
    paths = family.paths
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            hits = cover_crossings(paths[i].samples_s, paths[i].samples_pos,
                                   paths[j].samples_s, paths[j].samples_pos,
                                   margin_a=margin, margin_b=margin,
                                   min_sin=min_sin)
            for s_a, s_b, point in hits:
                out.append({"i": i, "j": j, "s_i": s_a, "s_j": s_b,
                            "point": [float(point[0]), float(point[1])]})
    return out
