"""Steering, measurement incompatibility and genuine multipartite steering at desk scale."""

from .assemblage import SteeringAssemblage, apply_measurement, merge_parties, steer_one_sided, steer_two_sided, white_noise
from .construct import Thm2Constants, left_inverse, parent_from_lhs, thm2_G, thm2_H, verify_thm2
from .incompat import genjm_full, genjm_no_free, incompat_robustness, is_jointly_measurable
from .povm import MeasurementAssemblage, Povm, ResponseFunction, depolarize, noisy_pauli_pair, pauli_measurements, post_process
from .sdpcore import FeasibilityProblem, Verdict, enumerate_deterministic, ns_vertices, solve
from .states import PureState, dicke, ghz, max_entangled, thm1_hypothesis, w
from .steering import gms_one_sided, gms_two_sided, is_unsteerable, steering_robustness

__version__ = "0.1.0"
