"""Polyline geometry on the cover and on the torus: crossings and proximity.

Paths are dense sample polylines.  Torus-side computations work in lattice
coordinates with nearest-image wrapping; cover-side computations are plain
Euclidean.  Crossing detection is two-stage: a decimated proximity scan
followed by exact segment intersection on the fine samples near each hit.
"""

from __future__ import annotations

import numpy as np


def seg_intersect(p1, p2, q1, q2, eps: float = 1e-13):
    """Proper intersection of segments p1p2 and q1q2.

    Returns (t, u, point, sin_angle) with t, u in [0, 1], or None when the
    segments do not properly intersect (collinear overlap counts as none).
    """
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    n1 = np.linalg.norm(d1)
    n2 = np.linalg.norm(d2)
    if n1 == 0.0 or n2 == 0.0:
        return None
    sin_angle = abs(denom) / (n1 * n2)
    if abs(denom) <= eps * n1 * n2:
        return None
    w = q1 - p1
    t = (w[0] * d2[1] - w[1] * d2[0]) / denom
    u = (w[0] * d1[1] - w[1] * d1[0]) / denom
    if -1e-12 <= t <= 1 + 1e-12 and -1e-12 <= u <= 1 + 1e-12:
        t = min(max(t, 0.0), 1.0)
        u = min(max(u, 0.0), 1.0)
        return t, u, p1 + t * d1, sin_angle
    return None


def _decimate(n: int, stride: int) -> np.ndarray:
    idx = np.arange(0, n, stride)
    if idx[-1] != n - 1:
        idx = np.append(idx, n - 1)
    return idx


def cover_crossings(sa, pa, sb, pb, *, margin_a=0.0, margin_b=0.0,
                    min_sin=1e-4, stride=6):
    """Transversal crossings of two cover polylines.

    Returns a list of (s_a, s_b, point).  Crossings with either parameter
    inside its margin of the path ends are ignored, as are near-tangential
    intersections with |sin angle| < min_sin.
    """
    ia = _decimate(len(sa), stride)
    ib = _decimate(len(sb), stride)
    ca = pa[ia]
    cb = pb[ib]
    step_a = np.max(np.linalg.norm(np.diff(pa, axis=0), axis=1), initial=0.0)
    step_b = np.max(np.linalg.norm(np.diff(pb, axis=0), axis=1), initial=0.0)
    thresh = (step_a + step_b) * stride * 0.75 + 1e-9
    d = np.linalg.norm(ca[:, None, :] - cb[None, :, :], axis=-1)
    hits = np.argwhere(d <= thresh)
    found = []
    seen = set()
    for ha, hb in hits:
        a_lo = max(ia[ha] - stride, 0)
        a_hi = min(ia[ha] + stride, len(sa) - 1)
        b_lo = max(ib[hb] - stride, 0)
        b_hi = min(ib[hb] + stride, len(sb) - 1)
        for i in range(a_lo, a_hi):
            for j in range(b_lo, b_hi):
                if (i, j) in seen:
                    continue
                seen.add((i, j))
                res = seg_intersect(pa[i], pa[i + 1], pb[j], pb[j + 1])
                if res is None or res[3] < min_sin:
                    continue
                t, u, point, _ = res
                s_a = sa[i] + t * (sa[i + 1] - sa[i])
                s_b = sb[j] + u * (sb[j + 1] - sb[j])
                if s_a < margin_a or s_a > sa[-1] - margin_a:
                    continue
                if s_b < margin_b or s_b > sb[-1] - margin_b:
                    continue
                found.append((float(s_a), float(s_b), point))
    return _dedup_crossings(found)


def _dedup_crossings(found, param_tol=2e-2):
    found.sort(key=lambda r: (r[0], r[1]))
    out = []
    for r in found:
        if out and abs(r[0] - out[-1][0]) < param_tol and \
                abs(r[1] - out[-1][1]) < param_tol:
            continue
        out.append(r)
    return out


def torus_crossings(lattice, sa, pa, sb, pb, *, min_sin=1e-4, stride=6,
                    margin_a=0.0, margin_b=0.0):
    """Transversal crossings of two torus-projected polylines.

    pa, pb are cover polylines; crossings are detected between their
    projections by nearest-image shifting in lattice coordinates.  Returns a
    list of (s_a, s_b, point_on_a) with the point on A's cover representative.
    """
    ua = lattice.to_lattice(pa)
    ub = lattice.to_lattice(pb)
    ia = _decimate(len(sa), stride)
    ib = _decimate(len(sb), stride)
    step_a = np.max(np.linalg.norm(np.diff(pa, axis=0), axis=1), initial=0.0)
    step_b = np.max(np.linalg.norm(np.diff(pb, axis=0), axis=1), initial=0.0)
    thresh = (step_a + step_b) * stride * 0.75 + 1e-9
    duv = ua[ia][:, None, :] - ub[ib][None, :, :]
    duv -= np.round(duv)
    d = np.linalg.norm(duv @ lattice.basis.T, axis=-1)
    hits = np.argwhere(d <= thresh)
    found = []
    seen = set()
    for ha, hb in hits:
        a_lo = max(ia[ha] - stride, 0)
        a_hi = min(ia[ha] + stride, len(sa) - 1)
        b_lo = max(ib[hb] - stride, 0)
        b_hi = min(ib[hb] + stride, len(sb) - 1)
        for i in range(a_lo, a_hi):
            for j in range(b_lo, b_hi):
                if (i, j) in seen:
                    continue
                seen.add((i, j))
                # shift B's segment to A's sheet via the nearest image
                shift = np.round(ua[i] - ub[j])
                q1 = lattice.to_cover(ub[j] + shift)
                q2 = lattice.to_cover(ub[j + 1] + shift)
                res = seg_intersect(pa[i], pa[i + 1], q1, q2)
                if res is None or res[3] < min_sin:
                    continue
                t, u, point, _ = res
                s_a = sa[i] + t * (sa[i + 1] - sa[i])
                s_b = sb[j] + u * (sb[j + 1] - sb[j])
                if s_a < margin_a or s_a > sa[-1] - margin_a:
                    continue
                if s_b < margin_b or s_b > sb[-1] - margin_b:
                    continue
                found.append((float(s_a), float(s_b), point))
    return _dedup_crossings(found)


def point_path_passages(lattice, cand_uv, path_s, path_pos, *, tol,
                        stride=5):
    """All close passages of a path by each candidate point.

    cand_uv are lattice coordinates of the candidates; the path is a cover
    polyline.  Returns, per candidate, a list of (distance, s) pairs with
    distance <= tol, computed with nearest-image wrapping.  Distances are
    Euclidean in cover coordinates.
    """
    path_uv = lattice.to_lattice(path_pos)
    idx = _decimate(len(path_s), stride)
    coarse_uv = path_uv[idx]
    step = np.max(np.linalg.norm(np.diff(path_pos, axis=0), axis=1), initial=0.0)
    coarse_tol = tol + step * stride
    duv = cand_uv[:, None, :] - coarse_uv[None, :, :]
    duv -= np.round(duv)
    d = np.linalg.norm(duv @ lattice.basis.T, axis=-1)  # (C, n_coarse)
    results = [[] for _ in range(len(cand_uv))]
    hit_c, hit_k = np.nonzero(d <= coarse_tol)
    for c in np.unique(hit_c):
        ks = hit_k[hit_c == c]
        segs = set()
        for k in ks:
            lo = max(idx[k] - stride, 0)
            hi = min(idx[k] + stride, len(path_s) - 1)
            segs.update(range(lo, hi))
        passages = []
        for i in sorted(segs):
            shift = np.round(cand_uv[c] - path_uv[i])
            p = lattice.to_cover(cand_uv[c] - shift)
            a = path_pos[i]
            b = path_pos[i + 1]
            ab = b - a
            ab2 = float(ab @ ab)
            t = 0.0 if ab2 == 0.0 else float(np.clip((p - a) @ ab / ab2, 0.0, 1.0))
            q = a + t * ab
            dist = float(np.linalg.norm(p - q))
            if dist <= tol:
                s = path_s[i] + t * (path_s[i + 1] - path_s[i])
                passages.append((dist, float(s)))
        # merge passages belonging to the same local approach
        passages.sort(key=lambda r: r[1])
        merged = []
        for dist, s in passages:
            if merged and s - merged[-1][1] < (path_s[1] - path_s[0]) * 1.5:
                if dist < merged[-1][0]:
                    merged[-1] = (dist, s)
            else:
                merged.append((dist, s))
        results[c] = merged
    return results
