"""Quadratic and cubic stochastic operators on the simplex, with majorization-based
dissipativity checks and trajectory analysis."""
from .dissipativity import (AlphaPartition, DissipativityReport, Form, NecessaryConditionsReport, Verdict,
                            certify_sampled, check_bistochastic_sampled, check_half_bound, check_vertex_rows,
                            classify_form, extract_alpha_partition, necessary_conditions)
from .dynamics import (CesaroResult, FixedPointClass, FixedPointResult, OmegaEstimate, Trajectory, cesaro, cesaro_many,
                       classify_fixed_point, find_fixed_points, iterate, iterate_many, lyapunov_phi,
                       majorization_chain_check, omega_estimate)
from .errors import QsoError
from .gallery import gallery, roster
from .operators import (CsoTensor, OperatorSpec, QsoTensor, VolterraForm, apply, apply_raw, jacobian,
                        validate, volterra_form)
from .simplex import (MajorizationVerdict, Relation, SimplexPoint, compare_majorization,
                      decreasing_rearrangement, sample_uniform)

__version__ = "0.1.0"
