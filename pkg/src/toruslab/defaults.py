"""Default tolerances and caps, overridable per call and from the CLI config.

Every knob here is an explicitly testable quantity; the names match the
keyword arguments accepted by the operations that consume them.
"""

# Path sampling and geometric tolerances (cover units unless noted).
MAX_SAMPLE_SPACING = 1e-2    # dense-output spacing of stored path samples
SPATIAL_TOL = 1e-4           # point/curve coincidence tolerance
ENDPOINT_TOL = 1e-7          # shooting miss tolerance at the hit point
ANGLE_DEDUP_TOL = 1e-6       # radians; families dedup on (homotopy, angle)

# Integrator (embedded Runge-Kutta 5(4), PI step control).
FLOW_TOL = 1e-13             # relative local error target for flow()
SHOOT_TOL = 1e-10            # local error target inside shooting loops
MAX_STEP_CURVED = 0.03       # step cap on non-flat metrics (interpolation accuracy)
MIN_STEP = 1e-14             # below this the integrator reports a stiff region

# Minimality certificates.
DEFECT_TOL = 1e-5

# Connecting families.
TARGET_CAP = 10000
SEED_FAN = 8                 # perturbed seed angles per target
SEED_FAN_STEP = 0.05         # radians; fan is +-(1..SEED_FAN/2)*step
MAX_SHOOT_ITERS = 50

# Hitting sets.
EXACT_COVER_CAP = 64         # largest family solved exactly by branch and bound

# Periodic minimal geodesics.
CONVERGENCE_TOL = 1e-10      # relative length decrease per shortening sweep
STATIONARITY_TOL = 1e-7      # first-variation (tangent defect) residual
CLUSTER_TOL = 1e-3           # transversal-offset clustering of minimizers
LENGTH_TOL = 1e-6            # length equality tolerance between minimizers
MAX_SWEEPS = 10000
NODES_PER_CLASS_UNIT = 16    # N >= this * (|q| + |p|)

# Asymptotic certificates.
EPSILON_FLOOR = 0.05
MONOTONE_SLACK = 1e-3        # per-sample slack in the tail-monotonicity check
DECAY_RATIO = 0.5            # final distance must drop below ratio * initial

# Average slope of non-periodic paths.
SLOPE_WINDOW = 20.0          # trailing arc length used for the least-squares fit
BOUNDED_XI_TOL = 1.0         # below this xi-range the slope is reported infinite

# Metric family limits.
MODE_CAP = 64
PHI_GRID = 256               # grid used for the conformal bound
PHI_MARGIN = 1e-3            # safety margin added to the grid max of phi
