"""
Training objective: BCE, multi-label hinge and DDI losses
"""

from .controller import beta_controller
from .losses import LossWeights, bce_loss, combined_loss, ddi_loss, hinge_loss

__all__ = ["LossWeights", "bce_loss", "hinge_loss", "ddi_loss", "combined_loss", "beta_controller"]
