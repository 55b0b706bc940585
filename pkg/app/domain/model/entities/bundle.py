# domain/model/entities/bundle.py

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from domain.model.entities.classifier import ClassifierBank, LatentSpace, SvmHyperplane
from domain.model.entities.flow import FlowModel


@dataclass
class ModelBundle:
    """
    Everything a model file holds.

    Attributes:
        flow: The bijection T (the identity right after pretraining)
        bank: Frozen classifier bank of the original space
        hyperplanes: Fitted editing hyperplanes per space, ordered by attribute index
        training_config: Effective configuration that produced the file
        seed: Seed of the run that produced the file
    """
    flow: FlowModel
    bank: ClassifierBank
    hyperplanes: Dict[LatentSpace, List[SvmHyperplane]] = field(
        default_factory=lambda: {LatentSpace.ORIGINAL: [], LatentSpace.PROXY: []}
    )
    training_config: dict = field(default_factory=dict)
    seed: int = 0

    def hyperplanes_in(self, space: LatentSpace) -> List[SvmHyperplane]:
        return self.hyperplanes.get(space, [])

    def hyperplane_for(self, space: LatentSpace, attribute_index: int) -> Optional[SvmHyperplane]:
        for hyperplane in self.hyperplanes_in(space):
            if hyperplane.attribute_index == attribute_index:
                return hyperplane
        return None

    def hyperplane_map(self, space: LatentSpace) -> Dict[int, SvmHyperplane]:
        return {h.attribute_index: h for h in self.hyperplanes_in(space)}
