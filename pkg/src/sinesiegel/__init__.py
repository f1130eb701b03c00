"""Desk-scale toolkit for the Siegel disk geometry of the sine family."""

from .arithmetic import (ContinuedFraction, RotationClass, RotationKind,
                         cf_expand, cf_from_quotients, classify,
                         denominator_interlacing_check, double_mod1,
                         parse_theta)
from .circlemaps import (CircleMapHandle, OrbitTable, Partition,
                         RigidRotation, TabulatedCircleMap, cell_partition,
                         critical_preimages, dynamical_partition,
                         partition_lemmas_check, real_bounds_report,
                         rotation_number)
from .model import (ConformalModel, DomainD, ExteriorRiemannMap,
                    fit_exterior_map, sine_preimage_roundness,
                    solve_rotation_parameter, trace_domain_D)
from .cells import (CellAnnulus, ExtensionH, build_cells, build_extension,
                    dilatation_report)
from .escape import (EscapeInfo, area_decay_experiment, david_condition_fit,
                     first_entry, hyperbolic_nbhd, mu_magnitude, nu_magnitude,
                     sqrt_area_pullback_check, z_set_enclosure)
from .covering import (CoveringFamily, DiskPair, area_ratio_check,
                       best_disjoint_subfamily, covering_check)
from .gridfield import GridField, SphereAtlas
from .render import RenderResult, render_siegel

__version__ = "0.1.0"
