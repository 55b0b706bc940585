# domain/model/entities/editing.py

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import torch

from domain.model.entities.classifier import LatentSpace


class EditMode(Enum):
    """
    How the edit magnitude is chosen.

    Options:
        FIXED_STEP: Move alpha distance units along the normal
        TO_TARGET: Move until the signed distance equals target_distance
    """
    FIXED_STEP = "fixed-step"
    TO_TARGET = "to-target"


DEFAULT_TARGET_DISTANCE = 3.0
MAX_ABLATION_STEP = 10.0


@dataclass
class EditRequest:
    """
    A single-attribute hyperplane edit.

    Attributes:
        attribute_index: Attribute j whose hyperplane normal is followed
        mode: FIXED_STEP or TO_TARGET
        space: ORIGINAL edits w directly, PROXY edits T(w) and maps back
        alpha: Step in distance units (FIXED_STEP)
        target_distance: Desired signed distance (TO_TARGET)
    """
    attribute_index: int
    mode: EditMode = EditMode.TO_TARGET
    space: LatentSpace = LatentSpace.PROXY
    alpha: float = 0.0
    target_distance: float = DEFAULT_TARGET_DISTANCE

    def validate(self, num_attributes: int) -> None:
        if not 0 <= self.attribute_index < num_attributes:
            raise ValueError(f"Attribute index {self.attribute_index} outside [0, {num_attributes})")
        if not math.isfinite(self.alpha) or not math.isfinite(self.target_distance):
            raise ValueError("alpha and target_distance must be finite")

    def to_dict(self) -> dict:
        return {
            "attribute_index": self.attribute_index,
            "mode": self.mode.value,
            "space": self.space.value,
            "alpha": self.alpha,
            "target_distance": self.target_distance
        }


@dataclass
class EditResult:
    """
    Edited codes with their signed distances in the editing space.

    Attributes:
        codes: (N, D) edited codes, always in the original space
        distances_before: (N,) signed distances before the edit
        distances_after: (N,) signed distances after the edit
        steps: (N,) applied step per row
    """
    codes: torch.Tensor
    distances_before: torch.Tensor
    distances_after: torch.Tensor
    steps: torch.Tensor


@dataclass
class EditCommandRequest:
    """
    Parameters of the `edit` subcommand.

    Attributes:
        dataset_path: LDS1 file with the codes to edit
        model_path: NFM1 file holding the flow and the hyperplanes
        out_path: LDS1 file receiving the edited codes
        edit: Edit to apply
        report_path: Optional JSON summary of the distances
    """
    dataset_path: str
    model_path: str
    out_path: str
    edit: EditRequest
    report_path: Optional[str] = None


@dataclass
class EditCommandResponse:
    """Paths written by `edit` plus summary statistics of the distances."""
    out_path: str
    num_codes: int
    attribute_name: str
    mean_distance_before: float
    mean_distance_after: float
    written: List[str]

    def to_dict(self) -> dict:
        return {
            "out_path": self.out_path,
            "num_codes": self.num_codes,
            "attribute_name": self.attribute_name,
            "mean_distance_before": self.mean_distance_before,
            "mean_distance_after": self.mean_distance_after,
            "written": self.written
        }
