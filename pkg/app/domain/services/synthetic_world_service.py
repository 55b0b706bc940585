# domain/services/synthetic_world_service.py

import logging
import math

import torch

from domain.model.entities.dataset import LabeledLatentDataset, Provenance, WorldSpec
from domain.model.entities.errors import ConfigurationError, NumericError
from domain.services.autodiff_service import DTYPE, as_matrix

logger = logging.getLogger(__name__)


class SyntheticWorldService:
    """
    Generates entangled labeled latent datasets with a known disentangled origin.

    The factors g are sign bits scaled by gamma, so every attribute is a linear
    function of the hidden coordinates; the rotation Q and the elementwise
    nonlinearity psi hide that structure from linear probes in code space.
    """

    def __init__(self, bisection_tolerance: float = 1e-10, max_bisection_steps: int = 200):
        self.bisection_tolerance = bisection_tolerance
        self.max_bisection_steps = max_bisection_steps

    def validate_spec(self, spec: WorldSpec) -> None:
        if spec.num_attributes < 1:
            raise ConfigurationError(f"num_attributes must be >= 1, got {spec.num_attributes}")
        if spec.dim < spec.num_attributes:
            raise ConfigurationError(f"dim ({spec.dim}) must be >= num_attributes ({spec.num_attributes})")
        if spec.nonlinearity <= -1.0:
            raise ConfigurationError(f"nonlinearity must exceed -1 to keep psi invertible, got {spec.nonlinearity}")
        if spec.gamma <= 0.0:
            raise ConfigurationError(f"gamma must be positive, got {spec.gamma}")
        if spec.nuisance_scale <= 0.0:
            raise ConfigurationError(f"nuisance_scale must be positive, got {spec.nuisance_scale}")
        if not 0.0 <= spec.rho < 1.0:
            raise ConfigurationError(f"rho must be in [0, 1), got {spec.rho}")
        if spec.attribute_names is not None and len(spec.attribute_names) != spec.num_attributes:
            raise ConfigurationError("attribute_names must have one entry per attribute")

    def entangling_matrix(self, spec: WorldSpec) -> torch.Tensor:
        """Orthogonal Q of the world: seeded QR of a Gaussian matrix, or the identity."""
        if not spec.random_rotation:
            return torch.eye(spec.dim, dtype=DTYPE)
        generator = torch.Generator().manual_seed(spec.seed)
        gaussian = torch.randn(spec.dim, spec.dim, generator=generator, dtype=DTYPE)
        q, r = torch.linalg.qr(gaussian)
        signs = torch.sign(torch.diagonal(r))
        signs[signs == 0] = 1.0
        return q * signs

    def psi(self, spec: WorldSpec, x: torch.Tensor) -> torch.Tensor:
        return x + spec.nonlinearity * torch.tanh(x)

    def psi_inverse(self, spec: WorldSpec, y: torch.Tensor) -> torch.Tensor:
        """
        Inverts psi elementwise by monotone bisection.

        |psi(x) - x| < |a| everywhere, so the root lies in y +/- (|a| + 1).

        Raises:
            NumericError: If the bracket does not shrink below the tolerance
        """
        if spec.nonlinearity == 0.0:
            return y.clone()
        reach = abs(spec.nonlinearity) + 1.0
        lo, hi = y - reach, y + reach
        for _ in range(self.max_bisection_steps):
            mid = 0.5 * (lo + hi)
            above = self.psi(spec, mid) > y
            hi = torch.where(above, mid, hi)
            lo = torch.where(above, lo, mid)
            if bool(((hi - lo) <= self.bisection_tolerance * torch.clamp(torch.abs(mid), min=1.0)).all()):
                return 0.5 * (lo + hi)
        raise NumericError(
            f"psi inversion did not converge in {self.max_bisection_steps} steps "
            f"(max bracket {float((hi - lo).max()):.3e})"
        )

    def generate(self, spec: WorldSpec, num_samples: int, seed: int = 0) -> LabeledLatentDataset:
        """
        Samples a labeled dataset from the world.

        Each factor copies a shared random sign with probability sqrt(rho) and is
        an independent sign otherwise, which gives pairwise sign correlation rho
        while keeping every attribute balanced.

        Args:
            spec: World description
            num_samples: N >= 1
            seed: Seed of the sample stream (Q uses spec.seed)

        Returns:
            LabeledLatentDataset: codes (N, D), labels (N, K), provenance SYNTHETIC

        Raises:
            ConfigurationError: For N < 1 or an invalid spec
        """
        self.validate_spec(spec)
        if num_samples < 1:
            raise ConfigurationError(f"Number of samples must be >= 1, got {num_samples}")

        k = spec.num_attributes
        generator = torch.Generator().manual_seed(seed)
        shared = torch.randint(0, 2, (num_samples, 1), generator=generator).to(DTYPE) * 2.0 - 1.0
        independent = torch.randint(0, 2, (num_samples, k), generator=generator).to(DTYPE) * 2.0 - 1.0
        copies = torch.rand(num_samples, k, generator=generator, dtype=DTYPE) < math.sqrt(spec.rho)
        signs = torch.where(copies, shared.expand(-1, k), independent)
        factors = spec.gamma * signs
        nuisance = spec.nuisance_scale * torch.randn(num_samples, spec.nuisance_dim, generator=generator,
                                                     dtype=DTYPE)

        hidden = torch.cat([factors, nuisance], dim=1)
        codes = self.psi(spec, hidden @ self.entangling_matrix(spec).T)
        labels = (factors > 0).to(torch.uint8)

        logger.info("Generated synthetic world: N=%d, K=%d, D=%d, a=%.3f, rho=%.3f, nuisance scale %.3f",
                    num_samples, k, spec.dim, spec.nonlinearity, spec.rho, spec.nuisance_scale)
        return LabeledLatentDataset(
            codes=codes,
            labels=labels,
            attribute_names=spec.names(),
            provenance=Provenance.SYNTHETIC,
            seed=seed
        )

    def ground_truth_oracle(self, spec: WorldSpec, codes) -> torch.Tensor:
        """
        Recovers the factor vector g of codes produced by this world.

        Returns:
            torch.Tensor: (N, K) factors, the first K entries of Q^T psi^-1(code)
        """
        self.validate_spec(spec)
        matrix = as_matrix(codes)
        hidden = self.psi_inverse(spec, matrix) @ self.entangling_matrix(spec)
        return hidden[:, :spec.num_attributes]
