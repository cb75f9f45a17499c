"""Unit conventions and boundary conversions.

Internally everything is angular frequency in rad/us and rates in 1/us,
which keeps MHz-scale couplings and us-scale lifetimes within a few orders
of magnitude of unity.  All file formats and CLI flags use ordinary
frequency in MHz and times in us; the factor of 2*pi lives here and is
applied exactly once, at the boundary.

Columns and JSON keys named ``*_mhz`` are ordinary frequencies (the
``x/2pi`` value experimentalists quote); ``*_per_us`` quantities are
rates and pass through unchanged.
"""
import math

TWO_PI = 2.0 * math.pi


def mhz_to_angular(freq_mhz):
    """Ordinary frequency in MHz -> angular frequency in rad/us."""
    return TWO_PI * freq_mhz


def angular_to_mhz(omega):
    """Angular frequency in rad/us -> ordinary frequency in MHz."""
    return omega / TWO_PI
