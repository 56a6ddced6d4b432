"""
Synthetic data specification

Loaded from a YAML file such as config/synth_spec.yaml. Validation errors
name the offending field and, when the file is available, its line.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from ..align.records import CoverageProfile
from ..utils.config_loader import MODALITIES
from ..utils.errors import ConfigError

COUNT_FIELDS = ("n_molecules", "n_diseases", "n_procedures", "n_medications", "n_patients")
UNIT_FIELDS = ("rule_noise", "ddi_density")
FIELDS = ("seed",) + COUNT_FIELDS + ("visits_mean",) + UNIT_FIELDS + ("coverage",)


def _key_lines(text: str) -> Dict[str, int]:
    """Dotted key -> 1-based line of the key in the YAML source"""
    lines: Dict[str, int] = {}

    def walk(node, prefix: str):
        if not isinstance(node, yaml.MappingNode):
            return
        for key_node, value_node in node.value:
            dotted = f"{prefix}{key_node.value}"
            lines[dotted] = key_node.start_mark.line + 1
            walk(value_node, dotted + ".")

    walk(yaml.compose(text), "")
    return lines


@dataclass
class SynthSpec:
    """Shape of the generated corpus, EHR and DDI matrix"""
    seed: int = 0
    n_molecules: int = 1000
    n_diseases: int = 60
    n_procedures: int = 30
    n_medications: int = 131
    n_patients: int = 1000
    visits_mean: float = 2.4
    rule_noise: float = 0.05
    ddi_density: float = 0.08
    coverage: CoverageProfile = field(default_factory=CoverageProfile)

    def __post_init__(self):
        self.validate()

    def validate(self, lines: Optional[Dict[str, int]] = None, source: str = "synth spec"):
        lines = lines or {}

        def fail(key: str, message: str):
            where = f" (line {lines[key]})" if key in lines else ""
            raise ConfigError(f"{source}{where}: field '{key}' {message}")

        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            fail("seed", f"must be an integer >= 0, got {self.seed!r}")
        for name in COUNT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                fail(name, f"must be an integer >= 1, got {value!r}")
        if not isinstance(self.visits_mean, (int, float)) or self.visits_mean < 1:
            fail("visits_mean", f"must be a number >= 1, got {self.visits_mean!r}")
        for name in UNIT_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not 0.0 <= value <= 1.0:
                fail(name, f"must be in [0, 1], got {value!r}")
        if self.n_molecules < self.n_medications:
            fail("n_molecules", f"must cover the {self.n_medications} medications, got {self.n_molecules}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any], lines: Optional[Dict[str, int]] = None,
                  source: str = "synth spec") -> 'SynthSpec':
        lines = lines or {}
        for key in data:
            if key not in FIELDS:
                where = f" (line {lines[key]})" if key in lines else ""
                raise ConfigError(f"{source}{where}: unknown field '{key}'")

        values = {k: v for k, v in data.items() if k != "coverage"}
        coverage_raw = data.get("coverage", {m: 0.4 for m in MODALITIES})
        if not isinstance(coverage_raw, dict):
            raise ConfigError(f"{source}: field 'coverage' must map modality names to probabilities")
        for modality, p in coverage_raw.items():
            key = f"coverage.{modality}"
            where = f" (line {lines[key]})" if key in lines else ""
            if modality not in MODALITIES:
                raise ConfigError(f"{source}{where}: unknown modality '{modality}'")
            if not isinstance(p, (int, float)) or isinstance(p, bool) or not 0.0 <= p <= 1.0:
                raise ConfigError(f"{source}{where}: field '{key}' must be in [0, 1], got {p!r}")
        probabilities = {m: float(coverage_raw.get(m, 0.0)) for m in MODALITIES}
        if not any(p > 0 for p in probabilities.values()):
            raise ConfigError(f"{source}: field 'coverage' must give at least one modality a positive probability")
        seed = values.get("seed", 0)

        spec = cls.__new__(cls)
        defaults = cls.__dataclass_fields__
        for name in FIELDS[:-1]:
            setattr(spec, name, values.get(name, defaults[name].default))
        spec.coverage = CoverageProfile(probabilities, seed if isinstance(seed, int) else 0)
        spec.validate(lines, source)
        return spec

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'SynthSpec':
        """
        Read a spec file

        Raises:
            ConfigError: malformed YAML, unknown field or out-of-range value
        """
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"cannot read synth spec {path}: {e}") from e
        try:
            data = yaml.safe_load(text) or {}
            lines = _key_lines(text) if data else {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f" (line {mark.line + 1})" if mark is not None else ""
            raise ConfigError(f"{path}{where}: malformed YAML: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_dict(data, lines, str(path))

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {name: getattr(self, name) for name in FIELDS[:-1]}
        out["coverage"] = dict(self.coverage.probabilities)
        return out
