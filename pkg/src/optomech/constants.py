"""Physical constants (CODATA 2018), SI units.

Every module takes hbar and k_B from here so there is exactly one place to
change them.
"""

import math

HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K, exact since the 2019 SI redefinition
TWO_PI = 2.0 * math.pi


def hz_to_rad(f_hz):
    """Convert a frequency in Hz to an angular frequency in rad/s."""
    return TWO_PI * f_hz


def rad_to_hz(omega):
    """Convert an angular frequency in rad/s to Hz."""
    return omega / TWO_PI
