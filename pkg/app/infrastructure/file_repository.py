# infrastructure/file_repository.py

import json
import os
import tempfile
from typing import Iterable


class FileRepository:
    """
    Handles file system operations for reports and logs.

    Every full-file write goes to a temporary file in the destination
    directory first and is moved into place with os.replace.
    """

    @staticmethod
    def save(data: dict, filepath: str) -> str:
        """
        Saves data as JSON with sorted keys.

        Args:
            data: JSON-serializable dictionary
            filepath: Destination path; parent directories are created

        Returns:
            str: The path written
        """
        text = json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
        return FileRepository.write_text(text, filepath)

    @staticmethod
    def save_lines(records: Iterable[dict], filepath: str) -> str:
        """Writes a whole JSON-lines file at once."""
        text = "".join(json.dumps(record, sort_keys=True) + "\n" for record in records)
        return FileRepository.write_text(text, filepath)

    @staticmethod
    def write_text(text: str, filepath: str) -> str:
        return FileRepository.write_bytes(text.encode("utf-8"), filepath)

    @staticmethod
    def write_bytes(payload: bytes, filepath: str) -> str:
        directory = FileRepository._ensure_parent(filepath)
        handle, temp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(filepath))
        try:
            with os.fdopen(handle, "wb") as f:
                f.write(payload)
            os.replace(temp_path, filepath)
        except BaseException:
            if os.path.exists(temp_path):
                os.remove(temp_path)
            raise
        return filepath

    @staticmethod
    def _ensure_parent(filepath: str) -> str:
        directory = os.path.dirname(os.path.abspath(filepath))
        os.makedirs(directory, exist_ok=True)
        return directory
