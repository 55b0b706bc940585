# domain/services/projection_service.py

import logging
from typing import List

import torch

from domain.model.entities.classifier import LatentSpace, SvmHyperplane
from domain.model.entities.errors import ConfigurationError, DimensionError
from domain.model.entities.projection import Projection
from domain.services.autodiff_service import as_matrix

logger = logging.getLogger(__name__)


class ProjectionService:
    """2D views of a latent space along two hyperplane normals."""

    def average_style_rows(self, codes, rows: int) -> torch.Tensor:
        """
        Replaces every style row of a flattened (rows x width) code with the mean row.

        The result keeps the original width, so hyperplanes fitted on full codes still apply.
        """
        matrix = as_matrix(codes)
        if rows < 1 or matrix.shape[1] % rows != 0:
            raise ConfigurationError(f"Code width {matrix.shape[1]} is not divisible into {rows} style rows")
        if rows == 1:
            return matrix
        n, width = matrix.shape[0], matrix.shape[1] // rows
        mean_row = matrix.reshape(n, rows, width).mean(dim=1, keepdim=True)
        return mean_row.expand(n, rows, width).reshape(n, rows * width)

    def project(self, codes, labels: torch.Tensor, hyperplane_x: SvmHyperplane, hyperplane_y: SvmHyperplane,
                names: List[str], color_index: int, space: LatentSpace, style_rows: int = 1) -> Projection:
        """
        Projects codes of the given space onto the unit normals of two hyperplanes.

        Args:
            codes: (N, D) codes already expressed in `space`
            labels: (N, K) labels
            hyperplane_x: Hyperplane of the horizontal axis
            hyperplane_y: Hyperplane of the vertical axis
            names: Attribute names
            color_index: Attribute coloring the points
            space: Space of codes and hyperplanes
            style_rows: Style rows averaged before projecting

        Returns:
            Projection: Signed distances to both hyperplanes plus the coloring labels
        """
        matrix = self.average_style_rows(codes, style_rows)
        for hyperplane in (hyperplane_x, hyperplane_y):
            if hyperplane.weight.numel() != matrix.shape[1]:
                raise DimensionError(f"Hyperplane width {hyperplane.weight.numel()} does not match codes "
                                     f"of width {matrix.shape[1]}")
        if not 0 <= color_index < labels.shape[1]:
            raise ConfigurationError(f"Color attribute {color_index} outside [0, {labels.shape[1]})")

        points = torch.stack([hyperplane_x.signed_distance(matrix), hyperplane_y.signed_distance(matrix)], dim=1)
        logger.debug("Projected %d codes onto %s/%s normals", matrix.shape[0],
                     names[hyperplane_x.attribute_index], names[hyperplane_y.attribute_index])
        return Projection(points=points, labels=labels[:, color_index].clone(),
                          x_name=names[hyperplane_x.attribute_index], y_name=names[hyperplane_y.attribute_index],
                          color_name=names[color_index], space=space)
