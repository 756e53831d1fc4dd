"""Physical constants used throughout the package (CODATA 2018).

All other modules import from here so that there is exactly one place
where numerical values of constants live.
"""

import math

HBAR = 1.054571817e-34      # reduced Planck constant, J s
QE = 1.602176634e-19        # elementary charge, C
EPS0 = 8.8541878128e-12     # vacuum permittivity, F/m
AMU = 1.66053906660e-27     # atomic mass unit, kg

TWO_PI = 2.0 * math.pi
