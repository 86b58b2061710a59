"""Process matrices, two-time states and the exact map between them."""

__version__ = "0.1.0"

from .channels import (Instrument, channel_vector, cj_operator, cj_operators, do_nothing,
                       kraus_density_vector, kraus_density_vectors, throw_away_and_replace,
                       validate_cptp)
from .errors import *  # noqa: F401,F403
from .postselect import (PreparationProtocol, ShotCounts, Variant, conditional_stats, entangled_ancilla_protocol,
                         mixed_state_protocol, sample_shots, unconditional_stats)
from .process import (CONDITIONS, ProcessMatrix, channel_ordered_w, prob_w, random_valid_w,
                      trace_and_replace, trivial_w, validate_w)
from .report import Check, VerificationReport
from .states import (DensityVector, contract_table, density_vector, eta_to_w, is_linear, prob_eta,
                     prob_pure, pure_state, validate_eta_conditions, w_to_eta)
from .tensor import (LabeledTensor, SlotLabel, Space, bullet, dagger, identity_vector, matricize,
                     space, unmatricize)
from .verify import (EpsilonPolicy, TheoremCheckConfig, check_theorem_eta, check_theorem_w,
                     compare_representations, perturbed_channel)
