"""Spectral networks and BPS spectra of polynomial quadratic differentials.

Subpackage layout:

  lattice      exact twisted-torus series algebra over a charge lattice
  geometry     flat trajectories, saddle-connection scans, periods
  homology     triangulations, intersection pairing, cycle classes
  lifts        path lifting to the double cover, wall identities
  laminations  integer laminations, edge coordinates, generator lifts
  cli          command line front end
"""

from .lattice import (
    ChargeLattice,
    LatticeVector,
    Sector,
    TwistedSeries,
    BpsRay,
    AutomorphismWord,
    twisted_multiply,
    truncate_height,
    k_apply,
    dt_exp_check,
    s_delta_apply,
    word_equal,
)

__all__ = [
    "ChargeLattice",
    "LatticeVector",
    "Sector",
    "TwistedSeries",
    "BpsRay",
    "AutomorphismWord",
    "twisted_multiply",
    "truncate_height",
    "k_apply",
    "dt_exp_check",
    "s_delta_apply",
    "word_equal",
]

__version__ = "0.1.0"
