"""Horseshoes with disjoint steps, correlated weighted averages and Riesz-product checks."""

__version__ = "0.1.0"

from .errors import (BohrChaosError, CertificateFailure, CodeError, ConstantWord, DepthExceeded,
                     EnvelopeTooLoose, IntegrityError, PreconditionError, SingularMatrix, Unsupported)
from .symbolic import (BlockCode, BlockStream, PeriodicPoint, RulePoint, block_decode, block_encode,
                       pair_window_disjointness, self_overlap_free, suffix_injectivity, window)
from .horseshoe import (CodedHorseshoe, DisjointStepsCertificate, DisplacementTask, build_horseshoe_in_cylinder,
                        certify, disjointify, find_displacement_witness, refine_avoiding, refine_cylinder,
                        solve_residue_cover, verify_certificate)
from .weights import WeightSequence, WeightSpec, best_residue, generate, nontriviality_index
