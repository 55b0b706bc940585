# infrastructure/svg_plot_writer.py

import io
import logging

import matplotlib
from matplotlib.figure import Figure

from domain.model.entities.projection import Projection
from infrastructure.file_repository import FileRepository

logger = logging.getLogger(__name__)

POSITIVE_COLOR = "#d62728"
NEGATIVE_COLOR = "#1f77b4"
POSITIVE_GROUP = "positive"
NEGATIVE_GROUP = "negative"

# fixed element ids; text stays in <text> elements
SVG_STYLE = {"svg.hashsalt": "latentflow", "svg.fonttype": "none"}


class SvgPlotWriter:
    """
    Renders a Projection as a standalone SVG scatter plot with matplotlib.

    Points of the two label classes land in the SVG groups "positive" and
    "negative". The dashed zero lines are the two decision boundaries.
    """

    def __init__(self, width: float = 6.4, height: float = 4.8, marker_size: float = 6.0):
        self.width = width
        self.height = height
        self.marker_size = marker_size

    def render(self, projection: Projection) -> str:
        points = projection.points.numpy()
        positive = projection.labels.numpy().astype(bool)

        figure = Figure(figsize=(self.width, self.height))
        axes = figure.add_subplot()
        for mask, color, group, value in ((positive, POSITIVE_COLOR, POSITIVE_GROUP, 1),
                                          (~positive, NEGATIVE_COLOR, NEGATIVE_GROUP, 0)):
            collection = axes.scatter(points[mask, 0], points[mask, 1], s=self.marker_size, c=color, alpha=0.6,
                                      linewidths=0, label=f"{projection.color_name} = {value}")
            collection.set_gid(group)
        axes.axhline(0.0, color="#999999", linestyle="--", linewidth=0.8)
        axes.axvline(0.0, color="#999999", linestyle="--", linewidth=0.8)
        axes.set_xlabel(f"distance to {projection.x_name} hyperplane")
        axes.set_ylabel(f"distance to {projection.y_name} hyperplane")
        axes.set_title(f"{projection.space.value} space, colored by {projection.color_name}")
        axes.legend(loc="upper right")

        buffer = io.StringIO()
        with matplotlib.rc_context(SVG_STYLE):
            figure.savefig(buffer, format="svg", metadata={"Date": None})
        return buffer.getvalue()

    def save(self, projection: Projection, filepath: str) -> str:
        logger.info("Writing %d-point scatter plot to %s", projection.size, filepath)
        return FileRepository.write_text(self.render(projection), filepath)
