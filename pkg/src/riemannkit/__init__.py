"""riemannkit: numerical Riemannian geometry from coordinate metric data.

Geodesics, parallel transport, curvature invariants, Jacobi fields,
variational quantities, and comparison-theorem checks, validated against
closed-form model spaces.
"""

__version__ = "0.1.0"

from .errors import (BadDimension, BadParam, BadProfile,
                     BarrierNotTransversal, ConjugateNotFound,
                     ConjugatePresent, DegeneratePlane, DomainExit,
                     DomainFault, InputOrderViolated, NoConvergence,
                     ParseError, RiemannKitError, SingularMetric, StepFault,
                     UnknownBuiltin, UnknownIdentifier)
from .expr import evaluate, eval2, parse, to_source
from .manifold import (FinslerNorm, MetricChart, SampledCurve, builtin,
                       chart_from_definition, curve_length, energy,
                       load_manifold, metric_at)
from .tensor import (CurvatureAlgebraElement, berger_curvatures, christoffel,
                     curvature, check_symmetries, killing_residual,
                     normal_taylor_check, ricci, sectional, weyl_decompose)
from .transport import (OdeSettings, Trajectory, develop, exp_map,
                        integrate_geodesic, log_map, parallel_transport,
                        reverse_develop, shortest_geodesic)
from .variation import (FieldAlongGeodesic, RectangleSpec,
                        basic_inequality_check, conjugate_points,
                        first_variation, index_form, jacobi_solve,
                        jacobi_system, nonminimality_witness)
from .comparison import (CurvatureProfile, compare_driving, myers_check,
                         rauch_ratio, riccati_solve, scalar_expansion_fit,
                         sturm_check, value_compare, volume_compare)
from .surfrev import (Profile, barriers, classify_geodesic, clairaut_constant,
                      delta_theta, load_profile, surface_of_revolution,
                      torus_chart)
