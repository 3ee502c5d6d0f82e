"""Ready-made parameter sets for quasi-condensate chains (Rb-87 by default)."""
from __future__ import annotations

from .lattice import RB87_MASS_KG, Boundary, PhysicalParams, UnitSystem, coupling_from_healing_length

DEFAULT_DENSITY_PER_UM = 120.0
DEFAULT_HEALING_LENGTH_UM = 0.25


def healing_length_chain(box_length_um: float, n_pixels: int, boundary="neumann", *,
                         density_per_um: float = DEFAULT_DENSITY_PER_UM,
                         healing_length_um: float = DEFAULT_HEALING_LENGTH_UM,
                         mu_relative=None) -> PhysicalParams:
    """Chain with ``g`` fixed by the healing length (internal units, mass 1).

    ``mu_relative`` defaults to 1e-6 for Neumann ends and 0 for Dirichlet ends.
    """
    boundary = Boundary(boundary)
    g = coupling_from_healing_length(healing_length_um, 1.0, density_per_um)
    params = PhysicalParams(1.0, g, density_per_um, box_length_um, n_pixels, 0.0, boundary)
    if mu_relative is None:
        mu_relative = 1e-6 if boundary is Boundary.NEUMANN else 0.0
    return params.with_mu_relative(mu_relative)


def box_chain(boundary="neumann", mu_relative=None, n_pixels: int = 400,
              box_length_um: float = 50.0) -> PhysicalParams:
    """50 um box with 6000 atoms cut into 125 nm pixels (healing length 250 nm)."""
    return healing_length_chain(box_length_um, n_pixels, boundary,
                                density_per_um=6000.0 / 50.0, mu_relative=mu_relative)


RB87_UNITS = UnitSystem(RB87_MASS_KG)
