"""Learning-free 6-DoF grasp planning from point clouds.

Multiple superquadrics are fitted to local parts of an object cloud with a
robust Gaussian-plus-uniform mixture, antipodal parallel-jaw candidates are
synthesized from their flip symmetry, infeasible poses are filtered, and the
rest are ranked by a four-factor quality score.
"""

from .cloud import PointCloud, fuse, load_cloud, remove_tabletop, voxel_downsample
from .pipeline import PipelineConfig, PlanResult, export_grasps, import_grasps, plan
from .recovery import (MembershipPosterior, RecoveryParams, RecoveryResult,
                       Workspace, choose_K, fit_superquadric,
                       initialize_ellipsoids, membership_posterior,
                       recover_superquadrics)
from .scoring import (ScoreBreakdown, ScoreParams, coverage_ratio,
                      point_to_surface, rank_candidates, score_candidate)
from .superquadric import (ShapeClass, Superquadric, SurfaceParam,
                           avg_endpoint_curvature, classify_shape,
                           gaussian_curvature, implicit_value,
                           principal_axis_endpoints, sample_surface,
                           surface_point, symmetry_transforms)
from .synthesis import (ClosingLine, FilterParams, GraspCandidate, GripperModel,
                        closing_lines_for, collision_check, filter_candidates,
                        rotations_about_line, support_check,
                        synthesize_candidates)
from .synthetic import (OracleParams, SceneObject, SceneSpec, antipodal_oracle,
                        generate_scene, render_partial)

__version__ = "0.1.0"
