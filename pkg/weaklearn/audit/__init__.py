"""Identifiability audits and adversarial target construction."""

from weaklearn.audit.adversarial import (
    AdversarialTarget,
    CalibrationRecord,
    ComplementFunction,
    build_target,
    calibrate_epsilon,
    default_dictionary,
    gram_schmidt_complement,
    protected_functions,
    protected_rank,
    verify_stationarity,
)
from weaklearn.audit.identifiability import (
    FisherReport,
    HessianEnvelope,
    LogisticCertificate,
    ProofConstants,
    StrongIdentProbeResult,
    SupportCheck,
    check_support_cardinality,
    delta_for_radius,
    fisher,
    function_distance,
    hessian_envelope,
    logistic_gaussian_certificate,
    probe_strong_identifiability,
    proof_constants,
)

__all__ = [
    "AdversarialTarget",
    "CalibrationRecord",
    "ComplementFunction",
    "FisherReport",
    "HessianEnvelope",
    "LogisticCertificate",
    "ProofConstants",
    "StrongIdentProbeResult",
    "SupportCheck",
    "build_target",
    "calibrate_epsilon",
    "check_support_cardinality",
    "default_dictionary",
    "delta_for_radius",
    "fisher",
    "function_distance",
    "gram_schmidt_complement",
    "hessian_envelope",
    "logistic_gaussian_certificate",
    "probe_strong_identifiability",
    "proof_constants",
    "protected_functions",
    "protected_rank",
    "verify_stationarity",
]
