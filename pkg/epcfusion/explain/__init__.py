"""Post-hoc analyses of a trained fusion model."""

from .report import AttributionReport
from .gate import GateStats, alpha_stats, gate_weight_stats
from .shapley import (ShapleyValues, coalition_values, exact_shapley, select_background, shapley_importance,
                      shapley_tabular, shapley_values)
from .occlusion import occlude_field, text_field_occlusion
from .spatial import (BoundaryPermutation, boundary_permutation, derangement, point_saliency, saliency_frame,
                      spatial_permutation, spatial_permutation_report)
