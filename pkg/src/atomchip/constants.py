"""Physical constants, unit conversions, and the trapped-atom state record.

All computation inside the package is strictly SI (tesla, meter, ampere,
kelvin, joule).  Gauss and micrometer appear only at configuration and
report boundaries, through the conversion helpers below.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DomainError

# CODATA-style literals, fixed at build time for reproducible outputs.
MU0 = 1.25663706212e-06      # vacuum permeability, T m / A
MU_B = 9.2740100783e-24      # Bohr magneton, J / T
HBAR = 1.054571817e-34       # reduced Planck constant, J s
H_PLANCK = 6.62607015e-34    # Planck constant, J s
K_B = 1.380649e-23           # Boltzmann constant, J / K
G_EARTH = 9.80665            # standard gravitational acceleration, m / s^2
M_RB87 = 1.44316060e-25      # atomic mass of 87Rb, kg
LAMBDA_D2 = 780.241209e-9    # 87Rb D2 transition wavelength, m

GAUSS = 1e-4                 # 1 G in tesla
MICROMETER = 1e-6            # 1 um in meters


@dataclass(frozen=True)
class PhysicalConstants:
    """Bundle of the module constants, for callers that prefer a record."""

    mu0: float = MU0
    muB: float = MU_B
    hbar: float = HBAR
    h: float = H_PLANCK
    kB: float = K_B
    g_earth: float = G_EARTH
    mRb87: float = M_RB87
    lambdaD2: float = LAMBDA_D2


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class AtomState:
    """Magnetic state of the trapped species.

    ``gF_mF_product`` is the dimensionless Zeeman factor gF*mF of a
    weak-field-seeking state; it must be positive for the atom to be
    trapped at field-magnitude minima.
    """

    gF_mF_product: float = 1.0
    mass: float = M_RB87

    def __post_init__(self):
        if self.gF_mF_product <= 0:
            raise DomainError("gF_mF_product must be > 0 (weak-field seeker)")
        if self.mass <= 0:
            raise DomainError("mass must be > 0")

    @property
    def magnetic_moment(self) -> float:
        """Effective magnetic moment gF*mF*muB, J/T."""
        return self.gF_mF_product * MU_B


# |F=2, m=2> ground state of 87Rb: gF = 1/2, mF = 2.
RB87 = AtomState(gF_mF_product=1.0, mass=M_RB87)


def gauss_to_tesla(value):
    """Convert gauss to tesla (1 G = 1e-4 T)."""
    return value * GAUSS


def tesla_to_gauss(value):
    """Convert tesla to gauss."""
    return value / GAUSS


def um_to_m(value):
    """Convert micrometers to meters."""
    return value * MICROMETER


def m_to_um(value):
    """Convert meters to micrometers."""
    return value / MICROMETER


def recoil_frequency(atom: AtomState, wavelength: float) -> float:
    """Photon-recoil frequency h / (2 m lambda^2) in Hz.

    Raises:
        DomainError: if ``wavelength`` is not positive.
    """
    if wavelength <= 0:
        raise DomainError(f"wavelength must be > 0, got {wavelength}")
    return H_PLANCK / (2.0 * atom.mass * wavelength**2)
