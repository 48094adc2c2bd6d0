"""Physical constants (SI, CODATA 2018 exact values)."""

SPEED_OF_LIGHT = 299_792_458.0  # m/s
HBAR = 1.054_571_817e-34  # J s
