# domain/services/optimizer_service.py

import logging
from typing import Dict, Tuple

import torch

from domain.model.entities.errors import DimensionError
from domain.model.entities.training import AdamState, TrainConfig

logger = logging.getLogger(__name__)


class AdamOptimizer:
    """Bias-corrected Adam over named float64 parameter tensors, updated in place."""

    def adam_step(self, params: Dict[str, torch.Tensor], grads: Dict[str, torch.Tensor],
                  state: AdamState, config: TrainConfig) -> Tuple[Dict[str, torch.Tensor], AdamState]:
        """
        Applies one Adam update.

        Args:
            params: Named parameters, modified in place
            grads: Gradients with the same names and shapes
            state: Moment estimates, modified in place
            config: Supplies lr, beta1, beta2 and eps

        Returns:
            The same params and state objects after the update

        Raises:
            DimensionError: A gradient is missing or has another shape
        """
        for name, tensor in params.items():
            if name not in grads or grads[name].shape != tensor.shape:
                raise DimensionError(f"Gradient for '{name}' missing or misshaped")

        state.step += 1
        bias_correction1 = 1.0 - config.beta1 ** state.step
        bias_correction2 = 1.0 - config.beta2 ** state.step
        step_size = config.lr / bias_correction1

        for name, tensor in params.items():
            grad = grads[name]
            if name not in state.first_moment:
                state.first_moment[name] = torch.zeros_like(tensor)
                state.second_moment[name] = torch.zeros_like(tensor)
            m = state.first_moment[name]
            v = state.second_moment[name]
            m.mul_(config.beta1).add_(grad, alpha=1.0 - config.beta1)
            v.mul_(config.beta2).add_(grad * grad, alpha=1.0 - config.beta2)
            denom = (v / bias_correction2).sqrt().add_(config.eps)
            tensor.sub_(step_size * m / denom)

        logger.debug("Adam step %d (lr=%g, step size %.3e)", state.step, config.lr, step_size)
        return params, state

