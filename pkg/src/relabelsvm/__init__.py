"""Linear SVM training with simultaneous label-noise detection and correction.

Models: plain soft-margin SVM, relabeling SVM (per-point flip decisions at a
penalty), ramp-loss SVM (capped hinge via outlier indicators) and the two
cluster-SVM variants that pair the classifier with a 2-cluster assignment
(l1 distances / coordinate medians, or l2 distances / geometric medians).
Exact solvers cover small instances; monotone alternating heuristics scale
to the benchmark sizes. The harness runs the repeated cross-validation
label-flip protocol and emits deterministic reports.
"""

from .convex import (ConvexSubproblem, HingeTerm, Hyperplane, SignConstraint,
                     SvmSolution, coordinate_median, geometric_median,
                     solve_subproblem, train_svm)
from .cluster import (ClusterState, ClusterSvmResult, ClusterSvmSpec, assign_points,
                      cluster_objective, train_cluster_svm,
                      train_cluster_svm_alternating, train_cluster_svm_exact_tiny,
                      update_centroids)
from .data import (DataError, Dataset, FlipRecord, FoldPlan, MissingValueError,
                   NoiseSpec, NormalizationParams, ParseError, SingleClassError,
                   UnmappedLabelError, derive_seed, inject_label_noise, load_dataset,
                   make_folds, normalize)
from .harness import (CellRecord, ExperimentPlan, ExperimentReport, GridSpec,
                      ModelEntry, accuracy, default_models, emit_report, load_plan,
                      run_experiment, two_gaussians)
from .resvm import (ReSvmResult, ReSvmSpec, pointwise_flip_rule, ramp_pointwise_cost,
                    resvm_objective, train_resvm, train_resvm_alternating,
                    train_resvm_exact, train_rlsvm)

__version__ = "0.1.0"
