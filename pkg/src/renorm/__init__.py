"""Extension of distributions across singular sets and configuration-space renormalization."""
from .cutoff import CutoffFamily, annulus_weight, smoothstep, theta
from .errors import (DivergentConfiguration, InsufficientOrder, NotLocallyFinite, QuadratureFailure,
                     RenormError, UnsupportedSetError)
from .extend import (GrowthFit, PairResult, ProbeConfig, RenormalizedDistribution, ScalingConfig,
                     direct_pairing, extend_positive_measure, fit_growth, moderate_from_scaling,
                     renormalized_product, scaling_degree)
from .geometry import (AffineSubspace, BigDiagonal, PairwiseDiagonal, Point, SetUnion, SingularSet,
                       SmallDiagonal, set_from_json)
from .kernel import FeynmanGraph, SingularKernel, graph_amplitude, kernel_from_json, power_log_kernel
from .qft import (AxiomReport, CoverCell, RenormMapTower, cover_cells, renormalize_graph, split_pairing,
                  tempered_partition, verify_axioms)
from .quad import QuadConfig, QuadResult, integrate
from .scheme import RenormScheme, counterterm_pairing, taylor_project, taylor_remainder
from .testfn import Box, Seminorm, TestFunction, seminorm_value, standard_bump, tensor_product

__version__ = "0.1.0"
