# domain/model/entities/flow.py

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List

import torch


@dataclass
class AffineParams:
    """
    One fully connected layer: y = x @ weight + bias.

    Attributes:
        weight: (fan_in, fan_out) matrix
        bias: (1, fan_out) row vector
    """
    weight: torch.Tensor
    bias: torch.Tensor


@dataclass
class SubNetwork:
    """Three stacked affine layers with LeakyReLU between them."""
    layers: List[AffineParams]


@dataclass
class CouplingLayer:
    """
    RealNVP affine coupling layer without batch normalization.

    Attributes:
        parity: 0 transforms the first half using the second as conditioner,
                1 transforms the second half using the first
        hidden: Hidden width H of both subnetworks
        scale_net: D/2 -> H -> H -> D/2 network, output passed through tanh
        translation_net: Same shape as scale_net, linear output
    """
    parity: int
    hidden: int
    scale_net: SubNetwork
    translation_net: SubNetwork


@dataclass
class FlowModel:
    """
    Bijection T from the original latent space to the proxy space.

    Attributes:
        dim: Latent width D (even)
        hidden: Hidden width of every subnetwork
        layers: Coupling layers in application order, parities alternating
        leaky_slope: Negative-side slope of the hidden activations
        seed: Seed used at initialization
    """
    dim: int
    hidden: int
    layers: List[CouplingLayer] = field(default_factory=list)
    leaky_slope: float = 0.01
    seed: int = 0

    @property
    def half(self) -> int:
        return self.dim // 2

    @property
    def parities(self) -> List[int]:
        return [layer.parity for layer in self.layers]

    def parameters(self) -> "OrderedDict[str, torch.Tensor]":
        """
        Named parameter tensors in declared order.

        The tensors are the ones held by the model, so in-place updates
        through this mapping update the model.
        """
        named: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        for index, layer in enumerate(self.layers):
            for net_name, net in (("scale", layer.scale_net), ("translation", layer.translation_net)):
                for depth, affine in enumerate(net.layers):
                    prefix = f"layers.{index}.{net_name}.{depth}"
                    named[f"{prefix}.weight"] = affine.weight
                    named[f"{prefix}.bias"] = affine.bias
        return named

    def parameter_count(self) -> int:
        return sum(tensor.numel() for tensor in self.parameters().values())

    def load_parameters(self, values: Dict[str, torch.Tensor]) -> None:
        """Copies values into the model's parameter tensors, matching by name."""
        for name, tensor in self.parameters().items():
            tensor.copy_(values[name])

    def clone(self) -> "FlowModel":
        def copy_net(net: SubNetwork) -> SubNetwork:
            return SubNetwork([AffineParams(a.weight.clone(), a.bias.clone()) for a in net.layers])

        return FlowModel(
            dim=self.dim,
            hidden=self.hidden,
            layers=[
                CouplingLayer(
                    parity=layer.parity,
                    hidden=layer.hidden,
                    scale_net=copy_net(layer.scale_net),
                    translation_net=copy_net(layer.translation_net)
                )
                for layer in self.layers
            ],
            leaky_slope=self.leaky_slope,
            seed=self.seed
        )
