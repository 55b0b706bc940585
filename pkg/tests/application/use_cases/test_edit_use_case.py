# tests/application/use_cases/test_edit_use_case.py

import json

import pytest
import torch

from application.use_cases.edit_use_case import EditUseCase
from domain.model.entities.classifier import LatentSpace
from domain.model.entities.editing import EditCommandRequest, EditMode, EditRequest
from domain.model.entities.errors import RequestValidationError
from infrastructure.latent_file_repository import LatentFileRepository


def test_edit_to_target_in_proxy_space(pipeline_files, tmp_path):
    out, report = str(tmp_path / "edited.lds"), str(tmp_path / "edit.json")
    edit = EditRequest(attribute_index=0, mode=EditMode.TO_TARGET, space=LatentSpace.PROXY, target_distance=2.5)
    response = EditUseCase().execute(EditCommandRequest(pipeline_files["world.lds"], pipeline_files["trained.nfm"],
                                                        out, edit, report_path=report))

    assert response.written == [out, report]
    assert response.mean_distance_after == pytest.approx(2.5, abs=1e-6)
    repository = LatentFileRepository()
    original = repository.load_dataset(pipeline_files["world.lds"])
    edited = repository.load_dataset(out)
    assert torch.equal(edited.labels, original.labels)
    assert edited.codes.shape == original.codes.shape

    with open(report, encoding="utf-8") as f:
        content = json.load(f)
    assert content["config"]["mode"] == "to-target"
    assert content["results"]["attribute_name"] == "attr_0"
    assert "out_path" not in content["results"]


def test_fixed_step_in_original_space(pipeline_files, tmp_path):
    edit = EditRequest(attribute_index=1, mode=EditMode.FIXED_STEP, space=LatentSpace.ORIGINAL, alpha=-1.0)
    response = EditUseCase().execute(EditCommandRequest(pipeline_files["world.lds"], pipeline_files["trained.nfm"],
                                                        str(tmp_path / "edited.lds"), edit))
    assert response.mean_distance_after - response.mean_distance_before == pytest.approx(-1.0, abs=1e-6)
    assert response.written == [str(tmp_path / "edited.lds")]


def test_large_step_is_logged(pipeline_files, tmp_path, caplog):
    edit = EditRequest(attribute_index=0, mode=EditMode.FIXED_STEP, space=LatentSpace.ORIGINAL, alpha=12.0)
    EditUseCase().execute(EditCommandRequest(pipeline_files["world.lds"], pipeline_files["trained.nfm"],
                                             str(tmp_path / "edited.lds"), edit))
    assert "exceeds the usual upper bound" in caplog.text


def test_attribute_out_of_range(pipeline_files, tmp_path):
    edit = EditRequest(attribute_index=2)
    with pytest.raises(RequestValidationError):
        EditUseCase().execute(EditCommandRequest(pipeline_files["world.lds"], pipeline_files["trained.nfm"],
                                                 str(tmp_path / "edited.lds"), edit))
