"""dilferro: diluted mean-field Ising ferromagnets, two dilution laws, and
their multi-overlap identities.

Subpackages by role:

* ``dilution``    - quenched graph sampling (Bernoulli / Poisson) and the
                    defining distribution identities;
* ``gibbs_exact`` - exact 2^N enumeration engine (partition function,
                    correlations, replicated monomial expectations);
* ``gibbs_mc``    - multi-replica heat-bath Monte Carlo for larger sizes;
* ``monomials``   - canonical algebra of multi-overlap monomials;
* ``symbolic``    - exact theta-expansions of the identity generators by two
                    independent methods, and their machine comparison;
* ``identities``  - numerical residuals, bounds, gauge and free-energy checks;
* ``cli``         - reproducible experiment runner (``dilferro`` entry point).

The hot kernels live in the compiled extension ``dilferro._core`` with a pure
NumPy/Python fallback selected at import (see ``dilferro.kernels``).
"""

from . import dilution, gibbs_exact, gibbs_mc, identities, kernels, monomials, symbolic
from .dilution import DilutionKind, DilutionModel, QuenchedGraph, sample_graph
from .errors import CapacityError, DilferroError, ParameterError, StructureError
from .gibbs_mc import McParams
from .monomials import ONE, OverlapMonomial, canonicalize, parse_monomial
from .rng import RandomStream

__version__ = "0.1.0"

__all__ = [
    "DilutionKind",
    "DilutionModel",
    "QuenchedGraph",
    "sample_graph",
    "McParams",
    "OverlapMonomial",
    "ONE",
    "canonicalize",
    "parse_monomial",
    "RandomStream",
    "DilferroError",
    "ParameterError",
    "CapacityError",
    "StructureError",
    "dilution",
    "gibbs_exact",
    "gibbs_mc",
    "identities",
    "kernels",
    "monomials",
    "symbolic",
    "__version__",
]
