"""Spectra and dynamics of a quantum particle on a 2D lattice in crossed fields.

The package is organized around the tight-binding Hamiltonian of a charged
particle on a square lattice threaded by a uniform magnetic flux (Peierls
phase ``alpha``) and tilted by an in-plane electric field of magnitude ``F``
and orientation ``beta = Fx/Fy``.  Submodules:

``core``
    Lattice data model, Hamiltonian/velocity stencils, gauge translations,
    characteristic scales and wave-packet observables.
``limits``
    Closed-form limiting cases: Bessel functions, Wannier-Stark states,
    Harper magnetic bands, double-periodic dispersions.
``lsx``
    Extended eigenstates for rational field orientation (rotated-gauge
    banded eigenproblem, bandwidth scans, perturbative widths).
``lsl``
    Localized eigenstates for irrational orientation via the fiber
    evolution-operator method.
``piflux``
    The half-flux / staggered-field two-sublattice problem and its
    averaging-method bandwidths.
``dynamics``
    Time propagation and wave-packet experiments.
``classical``
    The classical driven Harper model and parabolic-lattice sections.
``finite``
    Finite lattices: parabolic confinement, flux insertion, Dirichlet
    ribbons, edge-enhanced interband decay.
``multiband``
    Beyond tight-binding: magnetic bands with higher Bloch bands and
    truncated-Floquet decay rates.
``cli``
    Command-line front end writing CSV/JSON run directories.
"""

from hallsim.core import (
    CharacteristicScales,
    Gauge,
    HallConfig,
    Irrational,
    Rational,
    WaveFunction2D,
    apply_hamiltonian,
    apply_velocity,
    characteristic_scales,
    gauge_translate,
    observables,
)

__version__ = "0.1.0"

__all__ = [
    "CharacteristicScales",
    "Gauge",
    "HallConfig",
    "Irrational",
    "Rational",
    "WaveFunction2D",
    "apply_hamiltonian",
    "apply_velocity",
    "characteristic_scales",
    "gauge_translate",
    "observables",
    "__version__",
]
