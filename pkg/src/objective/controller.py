"""
DDI-acceptance controller for the loss weight beta
"""

from .losses import LossWeights


def beta_controller(rate: float, weights: LossWeights) -> float:
    """
    beta for the next epoch from the observed training DDI rate

    Disabled: the configured beta. Enabled: 1 while the rate is at or below
    the target, then a proportional decay reaching 0 at target + kappa.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"DDI rate must be in [0, 1], got {rate}")
    if not weights.controller:
        return weights.beta
    if rate <= weights.ddi_target:
        return 1.0
    return max(0.0, 1.0 - (rate - weights.ddi_target) / weights.kappa)
