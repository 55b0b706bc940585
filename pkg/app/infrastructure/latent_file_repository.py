# infrastructure/latent_file_repository.py

import json
import logging
from typing import List, Tuple

import numpy as np
import torch

from domain.model.entities.bundle import ModelBundle
from domain.model.entities.classifier import ClassifierBank, LatentSpace, LinearAttributeClassifier, SvmHyperplane
from domain.model.entities.dataset import LabeledLatentDataset, Provenance
from domain.model.entities.errors import ConfigurationError, FileFormatError
from domain.services.flow_service import FlowService
from infrastructure.file_repository import FileRepository

logger = logging.getLogger(__name__)

DATASET_FORMAT = "LDS1"
MODEL_FORMAT = "NFM1"
HYPERPLANE_SPACES = (LatentSpace.ORIGINAL, LatentSpace.PROXY)


def _manifest_line(manifest: dict) -> bytes:
    return (json.dumps(manifest, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n").encode("utf-8")


class LatentFileRepository:
    """
    Binary dataset (LDS1) and model (NFM1) files.

    Both formats are one UTF-8 JSON manifest line with sorted keys followed by
    a little-endian payload: float32 codes plus uint8 labels for datasets,
    float64 parameters for models.
    """

    def __init__(self, flow_service: FlowService = None):
        self.flow_service = flow_service or FlowService()

    # Datasets

    def save_dataset(self, dataset: LabeledLatentDataset, filepath: str) -> str:
        manifest = {
            "format": DATASET_FORMAT,
            "dim": dataset.dim,
            "num_attributes": dataset.num_attributes,
            "num_samples": dataset.size,
            "attribute_names": list(dataset.attribute_names),
            "provenance": dataset.provenance.value,
            "seed": dataset.seed
        }
        codes = dataset.codes.detach().cpu().numpy().astype("<f4").tobytes()
        labels = dataset.labels.detach().cpu().numpy().astype("u1").tobytes()
        logger.info("Writing %d codes (D=%d, K=%d) to %s", dataset.size, dataset.dim, dataset.num_attributes, filepath)
        return FileRepository.write_bytes(_manifest_line(manifest) + codes + labels, filepath)

    def load_dataset(self, filepath: str) -> LabeledLatentDataset:
        """
        Reads an LDS1 file.

        Raises:
            FileFormatError: Wrong version, malformed manifest or a payload of the wrong length
        """
        manifest, payload = self._read(filepath, DATASET_FORMAT)
        try:
            n, d, k = int(manifest["num_samples"]), int(manifest["dim"]), int(manifest["num_attributes"])
            names = list(manifest["attribute_names"])
            provenance = Provenance(manifest["provenance"])
        except (KeyError, TypeError, ValueError) as e:
            raise FileFormatError(f"{filepath}: malformed {DATASET_FORMAT} manifest ({e})") from e
        if len(names) != k:
            raise FileFormatError(f"{filepath}: {len(names)} attribute names for {k} attributes")

        code_bytes = 4 * n * d
        self._check_length(filepath, code_bytes + n * k, len(payload))
        codes = np.frombuffer(payload, dtype="<f4", count=n * d).reshape(n, d).astype(np.float64)
        labels = np.frombuffer(payload, dtype="u1", offset=code_bytes).reshape(n, k).copy()
        if (labels > 1).any():
            raise FileFormatError(f"{filepath}: labels must be 0 or 1")
        logger.debug("Loaded %d codes from %s", n, filepath)
        return LabeledLatentDataset(codes=torch.from_numpy(codes), labels=torch.from_numpy(labels),
                                    attribute_names=names, provenance=provenance, seed=manifest.get("seed"))

    # Models

    def save_model(self, bundle: ModelBundle, filepath: str) -> str:
        flow, bank = bundle.flow, bundle.bank
        chunks: List[torch.Tensor] = [tensor.reshape(-1) for tensor in flow.parameters().values()]
        for classifier in bank.classifiers:
            chunks.append(classifier.weight.reshape(-1))
            chunks.append(torch.tensor([classifier.bias], dtype=torch.float64))
        for space in HYPERPLANE_SPACES:
            for hyperplane in bundle.hyperplanes_in(space):
                chunks.append(hyperplane.weight.reshape(-1))
                chunks.append(torch.tensor([hyperplane.bias], dtype=torch.float64))
        values = torch.cat([chunk.to(torch.float64) for chunk in chunks])

        manifest = {
            "format": MODEL_FORMAT,
            "dim": flow.dim,
            "layers": len(flow.layers),
            "hidden": flow.hidden,
            "parities": flow.parities,
            "leaky_slope": flow.leaky_slope,
            "flow_seed": flow.seed,
            "parameter_count": flow.parameter_count(),
            "num_attributes": bank.size,
            "attribute_names": list(bank.attribute_names),
            "hyperplanes": {space.value: [h.attribute_index for h in bundle.hyperplanes_in(space)]
                            for space in HYPERPLANE_SPACES},
            "payload_floats": int(values.numel()),
            "training_config": bundle.training_config,
            "seed": bundle.seed
        }
        logger.info("Writing model (%d flow parameters, %d payload floats) to %s",
                    manifest["parameter_count"], manifest["payload_floats"], filepath)
        return FileRepository.write_bytes(_manifest_line(manifest) + values.numpy().astype("<f8").tobytes(), filepath)

    def load_model(self, filepath: str) -> ModelBundle:
        """
        Reads an NFM1 file back into a ModelBundle.

        Raises:
            FileFormatError: Wrong version, inconsistent manifest or a payload of the wrong length
        """
        manifest, payload = self._read(filepath, MODEL_FORMAT)
        try:
            dim, layers, hidden = int(manifest["dim"]), int(manifest["layers"]), int(manifest["hidden"])
            k = int(manifest["num_attributes"])
            names = list(manifest["attribute_names"])
            layout = {space: [int(i) for i in manifest["hyperplanes"][space.value]] for space in HYPERPLANE_SPACES}
            flow = self.flow_service.init_flow(dim, layers, hidden, seed=int(manifest.get("flow_seed", 0)),
                                               leaky_slope=float(manifest["leaky_slope"]))
        except (KeyError, TypeError, ValueError, ConfigurationError) as e:
            raise FileFormatError(f"{filepath}: malformed {MODEL_FORMAT} manifest ({e})") from e

        if flow.parities != list(manifest.get("parities", flow.parities)):
            raise FileFormatError(f"{filepath}: unsupported layer parities {manifest['parities']}")
        if int(manifest.get("parameter_count", -1)) != flow.parameter_count():
            raise FileFormatError(f"{filepath}: declared parameter_count {manifest.get('parameter_count')} "
                                  f"but the architecture has {flow.parameter_count()}")

        num_hyperplanes = sum(len(indices) for indices in layout.values())
        expected_floats = flow.parameter_count() + k * (dim + 1) + num_hyperplanes * (dim + 1)
        self._check_length(filepath, 8 * expected_floats, len(payload))
        values = torch.from_numpy(np.frombuffer(payload, dtype="<f8").astype(np.float64))

        cursor = 0

        def take(count: int) -> torch.Tensor:
            nonlocal cursor
            chunk = values[cursor:cursor + count].clone()
            cursor += count
            return chunk

        flow.load_parameters({name: take(tensor.numel()).reshape(tensor.shape)
                              for name, tensor in flow.parameters().items()})
        classifiers = []
        for _ in range(k):
            weight = take(dim)
            classifiers.append(LinearAttributeClassifier(weight=weight, bias=float(take(1)[0]), frozen=True))
        hyperplanes = {}
        for space in HYPERPLANE_SPACES:
            hyperplanes[space] = []
            for index in layout[space]:
                weight = take(dim)
                hyperplanes[space].append(SvmHyperplane(weight=weight, bias=float(take(1)[0]),
                                                        attribute_index=index, space=space))
        try:
            bank = ClassifierBank(classifiers=classifiers, attribute_names=names)
        except ConfigurationError as e:
            raise FileFormatError(f"{filepath}: {e}") from e
        logger.debug("Loaded model from %s", filepath)
        return ModelBundle(flow=flow, bank=bank, hyperplanes=hyperplanes,
                           training_config=manifest.get("training_config", {}), seed=int(manifest.get("seed", 0)))

    # Internals

    def _read(self, filepath: str, expected_format: str) -> Tuple[dict, bytes]:
        with open(filepath, "rb") as f:
            content = f.read()
        newline = content.find(b"\n")
        if newline < 0:
            raise FileFormatError(f"{filepath}: missing {expected_format} manifest line")
        try:
            manifest = json.loads(content[:newline].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FileFormatError(f"{filepath}: unreadable manifest ({e})") from e
        if not isinstance(manifest, dict) or manifest.get("format") != expected_format:
            found = manifest.get("format") if isinstance(manifest, dict) else None
            raise FileFormatError(f"{filepath}: expected format {expected_format}, found {found}")
        return manifest, content[newline + 1:]

    @staticmethod
    def _check_length(filepath: str, expected: int, actual: int) -> None:
        if expected != actual:
            logger.error("Payload length mismatch in %s: expected %d bytes, got %d", filepath, expected, actual)
            raise FileFormatError(f"{filepath}: payload has {actual} bytes, expected {expected}")
