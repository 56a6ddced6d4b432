"""
Training losses and the beta controller
"""

import math

import pytest
import torch
from torch.autograd import gradcheck

from src.objective import LossWeights, bce_loss, beta_controller, combined_loss, ddi_loss, hinge_loss
from src.utils.errors import ShapeMismatch


def _t(values):
    return torch.tensor(values, dtype=torch.float64)


def test_bce_is_summed_and_clamped():
    scores, truth = _t([0.9, 0.2]), _t([1.0, 0.0])
    assert bce_loss(scores, truth).item() == pytest.approx(-math.log(0.9) - math.log(0.8))
    extreme = bce_loss(_t([0.0, 1.0]), _t([1.0, 0.0])).item()
    assert math.isfinite(extreme)
    assert extreme == pytest.approx(-2 * math.log(1e-7))


def test_hinge_counts_positive_negative_pairs():
    scores, truth = _t([0.9, 0.2, 0.5]), _t([1.0, 0.0, 1.0])
    # (0, 1): 1 - 0.7, (2, 1): 1 - 0.3
    assert hinge_loss(scores, truth).item() == pytest.approx(1.0 / 3)
    assert hinge_loss(scores, _t([1.0, 1.0, 1.0])).item() == 0.0
    assert hinge_loss(scores, _t([0.0, 0.0, 0.0])).item() == 0.0


def test_ddi_loss_over_ordered_pairs():
    ddi = _t([[0, 1, 0], [1, 0, 0], [0, 0, 0]])
    assert ddi_loss(_t([1.0, 1.0, 0.0]), ddi).item() == pytest.approx(2.0)
    assert ddi_loss(_t([0.5, 0.4, 1.0]), ddi).item() == pytest.approx(0.4)
    with pytest.raises(ShapeMismatch):
        ddi_loss(_t([1.0, 1.0]), ddi)


def test_combined_loss_weights_its_terms():
    scores, truth = _t([0.9, 0.2, 0.5]), _t([1.0, 0.0, 1.0])
    ddi = _t([[0, 0, 1], [0, 0, 0], [1, 0, 0]])
    weights = LossWeights(beta=0.8, gamma=0.6)
    expected = 0.8 * (0.6 * bce_loss(scores, truth) + 0.4 * hinge_loss(scores, truth)) \
        + 0.2 * ddi_loss(scores, ddi)
    assert combined_loss(scores, truth, ddi, weights).item() == pytest.approx(expected.item())
    only_ddi = combined_loss(scores, truth, ddi, weights, beta=0.0)
    assert only_ddi.item() == pytest.approx(2 * 0.9 * 0.5)


def test_losses_reduce_per_visit():
    scores = _t([[0.9, 0.2, 0.5], [0.1, 0.8, 0.3]])
    truth = _t([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    ddi = torch.zeros(3, 3, dtype=torch.float64)
    per_visit = combined_loss(scores, truth, ddi, LossWeights())
    assert per_visit.shape == (2,)
    assert per_visit[1].item() == pytest.approx(combined_loss(scores[1], truth[1], ddi, LossWeights()).item())
    with pytest.raises(ShapeMismatch):
        bce_loss(scores, truth[:, :2])


def test_combined_loss_gradcheck():
    torch.manual_seed(0)
    scores = torch.rand(2, 4, dtype=torch.float64).mul(0.8).add(0.1).requires_grad_(True)
    truth = _t([[1, 0, 1, 0], [0, 1, 1, 1]])
    ddi = _t([[0, 1, 0, 0], [1, 0, 0, 1], [0, 0, 0, 0], [0, 1, 0, 0]])
    weights = LossWeights(beta=0.7, gamma=0.5)
    # perturbations stay well inside the hinge's linear regions
    assert gradcheck(lambda s: combined_loss(s, truth, ddi, weights).sum(), (scores,),
                     eps=1e-6, rtol=1e-4, atol=1e-6)


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(beta=1.5)
    with pytest.raises(ValueError):
        LossWeights(gamma=-0.1)
    with pytest.raises(ValueError):
        LossWeights(kappa=0.0)


def test_controller_disabled_returns_configured_beta():
    assert beta_controller(0.5, LossWeights(beta=0.7)) == 0.7


@pytest.mark.parametrize("rate, expected", [
    (0.00, 1.0),
    (0.06, 1.0),
    (0.085, 0.5),
    (0.11, 0.0),
    (0.50, 0.0),
])
def test_controller_decay(rate, expected):
    weights = LossWeights(controller=True, ddi_target=0.06, kappa=0.05)
    assert beta_controller(rate, weights) == pytest.approx(expected)


def test_controller_rejects_bad_rates():
    with pytest.raises(ValueError):
        beta_controller(1.2, LossWeights(controller=True))
    with pytest.raises(ValueError):
        beta_controller(-0.1, LossWeights())
