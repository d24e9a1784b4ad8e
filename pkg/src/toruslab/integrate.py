"""Batched adaptive Runge-Kutta 5(4) for the conformal geodesic Hamiltonian.

One embedded Dormand-Prince pair with PI step-size control drives every
integration in the package.  A batch of trajectories shares the step
sequence: member i integrates d(state)/d(tau) = span_i * F(state) over
tau in [0, 1], so members of different arc lengths finish together and the
error controller watches the worst member.  Energy drift is measured, never
hidden; momenta are not renormalized mid-flight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .defaults import MAX_STEP_CURVED, MIN_STEP
from .exceptions import NonFiniteStateError, StiffRegionError
from .metric import TorusMetric

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                 -17253 / 339200, 22 / 525, -1 / 40])


def hamiltonian_rhs(metric: TorusMetric):
    """Right-hand side of the unit-energy conformal geodesic system.

    State (..., 4) = (xi, eta, p_xi, p_eta):
        xi'  = exp(-2 phi) p_xi          p_xi'  = phi_xi  exp(-2 phi) |p|^2
        eta' = exp(-2 phi) p_eta         p_eta' = phi_eta exp(-2 phi) |p|^2
    """

    def rhs(y):
        pos = y[..., :2]
        mom = y[..., 2:]
        phi, grad = metric.phi_grad(pos)
        e2 = np.exp(-2.0 * phi)[..., None]
        p2 = np.sum(mom * mom, axis=-1, keepdims=True)
        return np.concatenate([e2 * mom, grad * (e2 * p2)], axis=-1)

    return rhs


def hamiltonian(metric: TorusMetric, y):
    """H = (1/2) exp(-2 phi) |p|^2; equals 1/2 on unit-speed trajectories."""
    y = np.asarray(y, dtype=float)
    phi, _ = metric.phi_grad(y[..., :2])
    return 0.5 * np.exp(-2.0 * phi) * np.sum(y[..., 2:] ** 2, axis=-1)


def launch_state(metric: TorusMetric, pos, angle):
    """Unit-speed state at a cover point with the given coordinate angle."""
    pos = np.asarray(pos, dtype=float)
    angle = np.asarray(angle, dtype=float)
    phi, _ = metric.phi_grad(pos)
    scale = np.exp(phi)
    mom = np.stack([scale * np.cos(angle), scale * np.sin(angle)], axis=-1)
    return np.concatenate([np.broadcast_to(pos, mom.shape), mom], axis=-1)


@dataclass
class StepStore:
    """Accepted steps of one batched integration, for interpolation."""

    tau0: np.ndarray   # (n_steps,)
    tau1: np.ndarray   # (n_steps,)
    y0: np.ndarray     # (n_steps, B, 4)
    y1: np.ndarray     # (n_steps, B, 4)
    f0: np.ndarray     # (n_steps, B, 4) derivatives in tau units
    f1: np.ndarray
    spans: np.ndarray  # (B,)

    def interp_member(self, i: int, s_values):
        """Cubic Hermite interpolation of member i at arc lengths s_values."""
        s_values = np.atleast_1d(np.asarray(s_values, dtype=float))
        span = self.spans[i]
        if span == 0.0:
            return np.repeat(self.y0[0, i][None, :], len(s_values), axis=0)
        tau = np.clip(s_values / span, 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.tau1, tau, side="left"), 0,
                      len(self.tau1) - 1)
        t0 = self.tau0[idx]
        h = self.tau1[idx] - t0
        theta = np.where(h > 0, (tau - t0) / np.where(h > 0, h, 1.0), 0.0)
        y0 = self.y0[idx, i]
        y1 = self.y1[idx, i]
        f0 = self.f0[idx, i] * h[:, None]
        f1 = self.f1[idx, i] * h[:, None]
        t2 = theta * theta
        t3 = t2 * theta
        h00 = 2 * t3 - 3 * t2 + 1
        h10 = t3 - 2 * t2 + theta
        h01 = -2 * t3 + 3 * t2
        h11 = t3 - t2
        return (h00[:, None] * y0 + h10[:, None] * f0
                + h01[:, None] * y1 + h11[:, None] * f1)


@dataclass
class BatchResult:
    y_end: np.ndarray          # (B, 4)
    spans: np.ndarray          # (B,)
    energy_drift: np.ndarray   # (B,) max |H - H0| / H0 at step ends
    n_steps: int
    steps: StepStore | None = None
    samples: list | None = None  # per member: (n_i, 5) rows (s, xi, eta, pxi, peta)


def _uniform_grid(span: float, ds: float) -> np.ndarray:
    n = max(1, int(np.ceil(span / ds - 1e-12)))
    return np.linspace(0.0, span, n + 1)


def integrate_batch(metric: TorusMetric, y0, spans, *, rtol, atol=None,
                    max_step=None, keep_steps=False, sample_ds=None,
                    max_steps=2_000_000) -> BatchResult:
    """Integrate a batch of geodesic states over per-member arc lengths.

    spans may differ across the batch; each member i runs from arc length 0
    to spans[i].  With keep_steps the accepted steps are retained for Hermite
    interpolation; with sample_ds each member is resampled on a uniform
    arc-length grid while stepping (memory stays bounded).
    """
    y = np.array(y0, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    B = y.shape[0]
    spans = np.broadcast_to(np.asarray(spans, dtype=float), (B,)).copy()
    if np.any(spans < 0):
        raise ValueError("negative integration span")
    atol = rtol * 1e-2 if atol is None else atol
    if max_step is None:
        max_step = np.inf if metric.is_flat else MAX_STEP_CURVED

    rhs = hamiltonian_rhs(metric)
    span_col = spans[:, None]

    def f_tau(state):
        return span_col * rhs(state)

    h0 = hamiltonian(metric, y)
    safe_h0 = np.where(h0 > 0, h0, 1.0)
    drift = np.zeros(B)

    max_span = float(spans.max(initial=0.0))
    if max_span == 0.0:
        empty = StepStore(np.zeros(1), np.ones(1), y[None], y[None],
                          np.zeros_like(y)[None], np.zeros_like(y)[None], spans)
        samples = None
        if sample_ds is not None:
            samples = [np.concatenate([[0.0], y[i]])[None, :] for i in range(B)]
        return BatchResult(y, spans, drift, 0, empty if keep_steps else None, samples)

    if sample_ds is not None:
        grids = [_uniform_grid(spans[i], sample_ds) if spans[i] > 0
                 else np.zeros(1) for i in range(B)]
        out = [np.empty((len(g), 5)) for g in grids]
        for i in range(B):
            out[i][0] = np.concatenate([[0.0], y[i]])
        cursor = np.ones(B, dtype=int)
        for i in range(B):
            if spans[i] == 0.0:
                cursor[i] = len(grids[i])

    tau = 0.0
    h = min(1.0, max_step / max_span) if np.isfinite(max_step) else 1.0
    h = min(h, 0.1)
    err_prev = 1.0
    k1 = f_tau(y)

    rec_tau0, rec_tau1, rec_y0, rec_y1, rec_f0, rec_f1 = [], [], [], [], [], []
    n_accepted = 0

    stages = np.empty((7,) + y.shape)
    while tau < 1.0 - 1e-14:
        h = min(h, 1.0 - tau, max_step / max_span)
        if h < MIN_STEP:
            raise StiffRegionError("step size underflow (stiff region)",
                                   s_reached=tau * spans)
        stages[0] = k1
        for j in range(1, 7):
            yj = y + h * np.tensordot(_A[j], stages[:j], axes=(0, 0))
            stages[j] = f_tau(yj)
        y_new = y + h * np.tensordot(_B5, stages, axes=(0, 0))
        err_vec = h * np.tensordot(_ERR, stages, axes=(0, 0))
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2, axis=-1)).max())
        if not np.isfinite(err) or not np.all(np.isfinite(y_new)):
            raise NonFiniteStateError("non-finite state during integration "
                                      "(bad metric input?)")
        if err <= 1.0:
            k_new = stages[6]  # FSAL
            if keep_steps:
                rec_tau0.append(tau)
                rec_tau1.append(tau + h)
                rec_y0.append(y.copy())
                rec_y1.append(y_new.copy())
                rec_f0.append(stages[0].copy())
                rec_f1.append(k_new.copy())
            if sample_ds is not None:
                tau_new = tau + h
                for i in range(B):
                    g = grids[i]
                    c = cursor[i]
                    while c < len(g) and g[c] <= tau_new * spans[i] + 1e-15:
                        th = (g[c] / spans[i] - tau) / h
                        th = min(max(th, 0.0), 1.0)
                        t2, t3 = th * th, th * th * th
                        val = ((2 * t3 - 3 * t2 + 1) * y[i]
                               + (t3 - 2 * t2 + th) * h * stages[0, i]
                               + (-2 * t3 + 3 * t2) * y_new[i]
                               + (t3 - t2) * h * k_new[i])
                        out[i][c, 0] = g[c]
                        out[i][c, 1:] = val
                        c += 1
                    cursor[i] = c
            h_val = hamiltonian(metric, y_new)
            drift = np.maximum(drift, np.abs(h_val - h0) / safe_h0)
            y = y_new
            k1 = k_new
            tau += h
            n_accepted += 1
            if n_accepted > max_steps:
                raise StiffRegionError("step budget exhausted", s_reached=tau * spans)
            err = max(err, 1e-10)
            factor = 0.9 * err ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
            err_prev = err
            h *= min(5.0, max(0.2, factor))
        else:
            h *= max(0.2, 0.9 * err ** (-0.2))

    steps = None
    if keep_steps:
        steps = StepStore(np.array(rec_tau0), np.array(rec_tau1),
                          np.array(rec_y0), np.array(rec_y1),
                          np.array(rec_f0), np.array(rec_f1), spans)
    samples = None
    if sample_ds is not None:
        for i in range(B):
            if cursor[i] < len(grids[i]):  # final point, guard rounding
                out[i][cursor[i]:] = np.concatenate([[grids[i][-1]], y[i]])
        samples = out
    return BatchResult(y, spans, drift, n_accepted, steps, samples)
