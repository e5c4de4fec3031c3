"""Classical (SU(3) coherent-state) and exact quantum dynamics of a condensate in a symmetric triple well."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    ChartError,
    FockBasis,
    ModelParams,
    TrapGeometry,
    build_hamiltonian,
    derive_collision_rates,
    fock_basis,
    generator_hamiltonian,
    generator_matrices,
    params_from_rates,
)
from .classical import (  # noqa: E402
    ChartOverflowError,
    ClassicalState,
    classical_energy,
    classical_js,
    eom_rhs,
    integrate,
    jacobian,
    sphere_coords,
    to_canonical,
    to_cartesian,
)
from .equilibria import (  # noqa: E402
    FixedPointRecord,
    discriminant,
    discriminant_roots,
    find_fixed_points,
    stability_closed_form,
    stability_map,
    stability_numeric,
)
from .quantum import (  # noqa: E402
    ConvergenceError,
    QuantumState,
    coherent_state,
    expectations,
    fock_state,
    propagate,
    purity,
)
from .sections import SectionPoint, SectionSpec, energy_shell_seed, poincare_section  # noqa: E402
