from .spectra import EigenList, NormalizedSpectrum, GramRow, FidelityBounds, LogBase, one_parameter_eigenlist, is_one_parameter, random_eigenlist, dft_matrix, circulant_gram, eigen_to_gram, gram_to_eigen, canonical_states, holevo_information, channel_fidelity, pgm_error, pgm_error_oracle, fidelity_holevo_bounds, trace_square_gap
from .combine import Branch, HeraldedEnsemble, FidelityBoundReport, check_combine, bit_combine, check_combine_heralded, bit_combine_heralded, ensemble_holevo, ensemble_fidelity, ensemble_pgm_error, check_combine_oracle, bit_combine_oracle, fidelity_bound_check, heralded_fidelity_bound_check, holevo_chain_rule_gap
from .unitaries import UnitaryKind, UnitaryBundle, build_check_unitary, build_bit_unitary, conjugate_unitary, build_controlled_bit_unitary, build_controlled_check_unitary, controlled_pairs, check_unitary_branches, verify_check_contract, verify_bit_contract, verify_controlled_contract, verify_contract, dump_matrix, load_matrix, haar_unitary
