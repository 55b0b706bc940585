# domain/model/entities/projection.py

from dataclasses import dataclass
from typing import Optional

import torch

from domain.model.entities.classifier import LatentSpace


@dataclass
class Projection:
    """
    Codes placed on the plane spanned by two hyperplane normals.

    Attributes:
        points: (N, 2) signed distances to the x and y hyperplanes
        labels: (N,) labels of the coloring attribute
        x_name: Attribute of the horizontal axis
        y_name: Attribute of the vertical axis
        color_name: Attribute used for coloring
        space: Space the codes were projected in
    """
    points: torch.Tensor
    labels: torch.Tensor
    x_name: str
    y_name: str
    color_name: str
    space: LatentSpace

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass
class PlotRequest:
    """
    Parameters of the `plot2d` subcommand.

    Attributes:
        dataset_path: LDS1 dataset to plot
        model_path: NFM1 model with the flow and the fitted hyperplanes
        out_path: SVG destination
        space: ORIGINAL or PROXY
        attr_x: Attribute whose normal spans the horizontal axis
        attr_y: Attribute whose normal spans the vertical axis
        color_attr: Attribute whose label colors the points
        style_rows: Number of style rows averaged before projecting (1 keeps codes as they are)
        max_points: Optional cap on plotted codes (the first rows are kept)
    """
    dataset_path: str
    model_path: str
    out_path: str
    space: LatentSpace = LatentSpace.PROXY
    attr_x: int = 0
    attr_y: int = 1
    color_attr: int = 0
    style_rows: int = 1
    max_points: Optional[int] = None


@dataclass
class PlotResponse:
    out_path: str
    num_points: int
    space: str

    def to_dict(self) -> dict:
        return {"out_path": self.out_path, "num_points": self.num_points, "space": self.space}
