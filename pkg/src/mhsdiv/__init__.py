"""Exact and p-adic multiple harmonic sums and their p-divisible sets."""
from .errors import BudgetExceeded, InconsistencyError, NotApplicable
from .exact import (ModResidue, PadicApprox, PrecisionUnderflow, bernoulli_mod_p,
                    irregular_indices, padic_add, padic_inv, padic_mul, padic_of_rational, vp)
from .mhs import (Composition, LevelIndex, PadicSweep, level_decompose_check, mhs_exact,
                  mhs_padic, mhs_star_exact, newton_decomposition)
from .jsets import (Budget, JSetReport, branch_search_depth1, compute_J1, criterion_check,
                    enumerate_J_direct, finiteness_verdict)
from .reserved import NoReservedSet, ReservedSet, reserved_set
from .congruences import (density_scan, h1l_2p_congruences, h121_2p_check, halfway_classify,
                          hstar_check, is_reserved_prime, j1_symmetry_check, j12sd_membership,
                          wolstenholme_check)
from .dyadic import (branching_simulation, cloitre_constant, offspring_mean, track_dyadic,
                     v2_profile_check)

__version__ = "0.1.0"
