import json
import re
import sys
from pathlib import Path

from . import config
from .errors import ModelFileError

PACKAGE_ROOT = Path(__file__).resolve().parent.parent


def normalize_path(path_input):
    """Ensure all paths are Path objects"""
    if isinstance(path_input, str):
        return Path(path_input).resolve()
    elif isinstance(path_input, Path):
        return path_input.resolve()
    else:
        raise ValueError(f"Invalid path type: {type(path_input)}")


def sanitize_filename(filename):
    """Strip path separators and control characters from a report file name"""
    sanitized = re.sub(r'[<>:"/\\|?*\x00-\x1f\s]', '_', filename)
    sanitized = sanitized.lstrip('. ')
    if len(sanitized) > 255:
        sanitized = sanitized[:255]
    return sanitized or "unnamed"


class DirectoryManager:
    """Bundled model files and the report directory"""

    def __init__(self, base_dir=None, report_dir=None):
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self.models_dir = PACKAGE_ROOT / "models"
        self.report_dir = Path(report_dir or config.REPORT_DIR)
        if not self.report_dir.is_absolute():
            self.report_dir = self.base_dir / self.report_dir

    def ensure_report_directory(self):
        self.report_dir.mkdir(parents=True, exist_ok=True)
        return self.report_dir

    def list_models(self):
        """Names of the bundled model files"""
        if not self.models_dir.exists():
            return []
        return sorted(p.stem for p in self.models_dir.glob("*.json"))

    def resolve_model(self, name_or_path):
        """Path of a model file given a path or a bundled model name"""
        path = Path(name_or_path)
        if path.exists():
            return path.resolve()
        if not path.is_absolute() and not path.suffix:
            bundled = self.models_dir / f"{name_or_path}.json"
            if bundled.exists():
                return bundled
        known = ", ".join(self.list_models())
        raise ModelFileError(f"No model file or bundled model named '{name_or_path}' (bundled: {known})")

    def report_path(self, model_name, command, seed=None):
        stem = f"{model_name or 'model'}_{command}"
        if seed is not None:
            stem += f"_seed{seed}"
        return self.report_dir / f"{sanitize_filename(stem)}.json"

    def save_json(self, file_path, data):
        """Atomically save JSON data (temporary file, then rename)"""
        file_path = normalize_path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)

        temp_path = file_path.with_suffix('.tmp')
        try:
            with open(temp_path, 'w', encoding='utf-8') as f:
                json.dump(data, f, indent=2, ensure_ascii=False)
                f.write("\n")
            temp_path.replace(file_path)
            print(f"✅ Atomically saved JSON: {file_path}", file=sys.stderr)
        except Exception:
            if temp_path.exists():
                temp_path.unlink()
            raise
        return file_path

    def load_json(self, file_path):
        """Load a JSON document, reporting syntax errors with line and column"""
        file_path = normalize_path(file_path)
        if not file_path.exists():
            raise ModelFileError(f"File not found: {file_path}")

        file_size = file_path.stat().st_size
        max_file_size = 50 * 1024 * 1024
        if file_size > max_file_size:
            raise ModelFileError(f"File too large: {file_size} bytes (max: {max_file_size})")

        with open(file_path, 'r', encoding='utf-8') as f:
            try:
                return json.load(f)
            except json.JSONDecodeError as e:
                raise ModelFileError(f"Invalid JSON: {e.msg}",
                                     location=f"{file_path.name}:{e.lineno}:{e.colno}") from e
            except UnicodeDecodeError as e:
                raise ModelFileError(f"File is not UTF-8 text: {e.reason}", location=file_path.name) from e

    def save_report(self, report, model_name, command, seed=None):
        """Write a report document under the report directory"""
        self.ensure_report_directory()
        path = self.report_path(model_name, command, seed)
        document = dict(report)
        return self.save_json(path, document)


# Create global instance
dir_manager = DirectoryManager()
