"""Toral affine maps: spectra, lacunary frequency plans and Riesz products."""
from .spectral import (IntMatrix, ToralAffineMap, SpectralData, Classification, spectral_analysis,
                       classify, choose_h0, is_irreducible)
from .lacunary import (FrequencyPlan, SplitReport, DissociateResult, frequency_orbit,
                       frequency_orbit_by_powers, psi_sequence, dissociate_check,
                       lacunarity_and_split_check, search_q)
from .riesz import (RieszSpec, SampleBatch, riesz_coefficient, character_expectation, riesz_sample,
                    empirical_character, verify_weighted_limit)

HORSESHOE_FREE_EXAMPLE = IntMatrix(((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1), (-1, 3, -3, 3)))
