"""Intervention coefficients, neural-ODE probe and saliency maps."""
from ltcnav.causal.coefficients import (
    InterventionCoefficients,
    external_coefficients_C,
    internal_coefficients_B,
    intervention_coefficients,
    ltc_jacobian_x,
)
from ltcnav.causal.export import export_coefficients_csv, export_saliency, overlay
from ltcnav.causal.probe import CausalityProbeReport, neural_ode_causality_probe
from ltcnav.causal.saliency import (
    AttentionScore,
    SaliencyMap,
    attention_on_target_score,
    bootstrap_interval,
    box_upsample,
    policy_saliency,
    visual_backprop,
)

__all__ = [
    "AttentionScore", "CausalityProbeReport", "InterventionCoefficients", "SaliencyMap",
    "attention_on_target_score", "bootstrap_interval", "box_upsample", "export_coefficients_csv",
    "export_saliency", "external_coefficients_C", "internal_coefficients_B",
    "intervention_coefficients", "ltc_jacobian_x", "neural_ode_causality_probe", "overlay",
    "policy_saliency", "visual_backprop",
]
