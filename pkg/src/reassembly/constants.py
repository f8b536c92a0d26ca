"""Default numerical tolerances, collected in one place.

Every tolerance used by the library defaults to a value from this table.
Functions that consume a tolerance accept it as a keyword argument, so tests
can override any of them without monkeypatching.
"""

# A rotation matrix is accepted when max|R^T R - I| and |det(R) - 1| stay
# below this bound.
ROTATION_ORTHONORMALITY_TOL = 1e-9

# Looser bound applied when reading a transform from JSON (files may have
# been produced by other tools with limited precision).
TRANSFORM_READ_ROTATION_TOL = 1e-6

# Largest covariance eigenvalue at or below this is treated as a fully
# degenerate neighborhood (corner penalty forced to 1.0).
DEGENERATE_EIGENVALUE = 1e-15

# Minimum graph degree required to estimate a neighbor covariance; points
# below it count as flat and are tallied in a diagnostics counter.
MIN_COVARIANCE_NEIGHBORS = 3

# The closed-form symmetric 3x3 eigensolver falls back to LAPACK when the
# normalized characteristic-polynomial discriminant is within this margin
# of degeneracy (repeated roots).
ANALYTIC_EIG_FALLBACK_MARGIN = 1e-8

# Principal-axis initialization treats a covariance as rank-deficient when
# the second eigenvalue falls below this fraction of the largest.
DEGENERATE_AXIS_RATIO = 1e-9

# Environment variable for overriding the worker count used by nearest
# neighbor queries. Results are identical for any worker count.
WORKERS_ENV_VAR = "REASSEMBLY_NUM_THREADS"
