# domain/services/flow_service.py

import logging
import math
from typing import Dict, Optional, Tuple

import torch

from domain.model.entities.autodiff import TapeNode
from domain.model.entities.classifier import LatentSpace
from domain.model.entities.errors import ConfigurationError, ContractError, DimensionError
from domain.model.entities.flow import AffineParams, CouplingLayer, FlowModel, SubNetwork
from domain.services.autodiff_service import DTYPE, Tape, as_matrix

logger = logging.getLogger(__name__)

SUBNET_DEPTH = 3


class FlowService:
    """
    Builds and evaluates RealNVP coupling flows.

    Every evaluation runs on a Tape: the plain tensor API uses a disabled
    tape, the loss functions pass a recording one, so both share one code path.
    """

    def init_flow(self, dim: int, num_layers: int = 3, hidden: Optional[int] = None,
                  seed: int = 0, leaky_slope: float = 0.01) -> FlowModel:
        """
        Creates a flow that starts at the identity map.

        Args:
            dim: Latent width D, must be even and >= 2
            num_layers: Number of coupling layers (>= 1)
            hidden: Hidden width H, defaults to D
            seed: Seed of the uniform initialization of the hidden layers
            leaky_slope: Negative-side slope of the LeakyReLU activations

        Returns:
            FlowModel: Hidden layers drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
                       final layer of each subnetwork zero

        Raises:
            ConfigurationError: For odd or non-positive dims, or num_layers < 1
        """
        hidden = dim if hidden is None else hidden
        if dim < 2 or dim % 2 != 0:
            raise ConfigurationError(f"Latent dimension must be even and >= 2, got {dim}")
        if num_layers < 1:
            raise ConfigurationError(f"num_layers must be >= 1, got {num_layers}")
        if hidden < 1:
            raise ConfigurationError(f"hidden width must be >= 1, got {hidden}")

        generator = torch.Generator().manual_seed(seed)
        half = dim // 2
        widths = [(half, hidden), (hidden, hidden), (hidden, half)]

        def make_net() -> SubNetwork:
            layers = []
            for depth, (fan_in, fan_out) in enumerate(widths):
                if depth == SUBNET_DEPTH - 1:
                    layers.append(AffineParams(
                        weight=torch.zeros(fan_in, fan_out, dtype=DTYPE),
                        bias=torch.zeros(1, fan_out, dtype=DTYPE)
                    ))
                    continue
                bound = 1.0 / math.sqrt(fan_in)
                weight = (torch.rand(fan_in, fan_out, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * bound
                bias = (torch.rand(1, fan_out, generator=generator, dtype=DTYPE) * 2.0 - 1.0) * bound
                layers.append(AffineParams(weight=weight, bias=bias))
            return SubNetwork(layers)

        layers = [
            CouplingLayer(parity=index % 2, hidden=hidden, scale_net=make_net(), translation_net=make_net())
            for index in range(num_layers)
        ]
        model = FlowModel(dim=dim, hidden=hidden, layers=layers, leaky_slope=leaky_slope, seed=seed)
        logger.info("Initialized flow: D=%d, layers=%d, H=%d, %d parameters",
                    dim, num_layers, hidden, model.parameter_count())
        return model

    def validate_model(self, model: FlowModel) -> None:
        if model.dim < 2 or model.dim % 2 != 0:
            raise ConfigurationError(f"Latent dimension must be even and >= 2, got {model.dim}")
        if not model.layers:
            raise ConfigurationError("Flow has no coupling layers")

    # Plain tensor API

    def flow_forward(self, model: FlowModel, codes) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        Maps original codes to proxy codes.

        Args:
            model: Flow to evaluate
            codes: (N, D) batch, or a single (D,) code

        Returns:
            Tuple of the (N, D) proxy codes and the (N,) log-determinants
        """
        tape = Tape(enabled=False)
        params = self.bind_parameters(tape, model, requires_grad=False)
        z, logdet = self.forward_nodes(tape, model, params, tape.constant(self._check_width(model, codes)))
        return z.value, logdet.value.reshape(-1)

    def flow_inverse(self, model: FlowModel, codes) -> torch.Tensor:
        """Maps proxy codes back to the original space."""
        return self.flow_inverse_with_logdet(model, codes)[0]

    def flow_inverse_with_logdet(self, model: FlowModel, codes) -> Tuple[torch.Tensor, torch.Tensor]:
        """Inverse pass together with log|det dT^-1|, which is minus the forward log-det at the result."""
        tape = Tape(enabled=False)
        params = self.bind_parameters(tape, model, requires_grad=False)
        x, logdet = self.inverse_nodes(tape, model, params, tape.constant(self._check_width(model, codes)))
        return x.value, logdet.value.reshape(-1)

    def to_space(self, model: Optional[FlowModel], codes, space: LatentSpace) -> torch.Tensor:
        """Original-space codes expressed in the requested space."""
        if space == LatentSpace.ORIGINAL:
            return as_matrix(codes)
        if model is None:
            raise ContractError("Proxy-space codes need a flow model")
        return self.flow_forward(model, codes)[0]

    # Taped API

    def bind_parameters(self, tape: Tape, model: FlowModel, requires_grad: bool = True) -> Dict[str, TapeNode]:
        """Registers every model parameter as a leaf on the tape."""
        return {name: tape.leaf(tensor, requires_grad=requires_grad)
                for name, tensor in model.parameters().items()}

    def forward_nodes(self, tape: Tape, model: FlowModel, params: Dict[str, TapeNode],
                      x: TapeNode) -> Tuple[TapeNode, TapeNode]:
        self.validate_model(model)
        logdet = None
        for index, layer in enumerate(model.layers):
            active, passive = self._split(tape, model, layer, x)
            s, t = self._conditioners(tape, model, params, index, passive)
            y_active = tape.add(tape.hadamard(active, tape.exp(s)), t)
            x = self._merge(tape, layer, y_active, passive)
            layer_logdet = tape.sum_rows(s)
            logdet = layer_logdet if logdet is None else tape.add(logdet, layer_logdet)
        return x, logdet

    def inverse_nodes(self, tape: Tape, model: FlowModel, params: Dict[str, TapeNode],
                      y: TapeNode) -> Tuple[TapeNode, TapeNode]:
        self.validate_model(model)
        logdet = None
        for index in reversed(range(len(model.layers))):
            layer = model.layers[index]
            active, passive = self._split(tape, model, layer, y)
            s, t = self._conditioners(tape, model, params, index, passive)
            x_active = tape.hadamard(tape.sub(active, t), tape.exp(tape.scale(s, -1.0)))
            y = self._merge(tape, layer, x_active, passive)
            layer_logdet = tape.scale(tape.sum_rows(s), -1.0)
            logdet = layer_logdet if logdet is None else tape.add(logdet, layer_logdet)
        return y, logdet

    # Internals

    def _check_width(self, model: FlowModel, codes) -> torch.Tensor:
        matrix = as_matrix(codes)
        if matrix.shape[1] != model.dim:
            raise DimensionError(f"Expected codes of width {model.dim}, got {matrix.shape[1]}")
        return matrix

    def _split(self, tape: Tape, model: FlowModel, layer: CouplingLayer, x: TapeNode):
        first, second = tape.split_cols(x, model.half)
        return (first, second) if layer.parity == 0 else (second, first)

    def _merge(self, tape: Tape, layer: CouplingLayer, active: TapeNode, passive: TapeNode) -> TapeNode:
        return tape.concat_cols(active, passive) if layer.parity == 0 else tape.concat_cols(passive, active)

    def _conditioners(self, tape: Tape, model: FlowModel, params: Dict[str, TapeNode],
                      index: int, passive: TapeNode) -> Tuple[TapeNode, TapeNode]:
        s = tape.tanh(self._subnet(tape, model, params, f"layers.{index}.scale", passive))
        t = self._subnet(tape, model, params, f"layers.{index}.translation", passive)
        return s, t

    def _subnet(self, tape: Tape, model: FlowModel, params: Dict[str, TapeNode],
                prefix: str, x: TapeNode) -> TapeNode:
        h = x
        for depth in range(SUBNET_DEPTH):
            h = tape.add(tape.matmul(h, params[f"{prefix}.{depth}.weight"]), params[f"{prefix}.{depth}.bias"])
            if depth < SUBNET_DEPTH - 1:
                h = tape.leaky_relu(h, model.leaky_slope)
        return h
