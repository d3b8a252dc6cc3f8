"""
config.py
---------
Pipeline configuration: every hyperparameter with its default, loaded from a
JSON object or `key = value` lines.

Expected JSON format (every key optional):
{
    "seed": 0,
    "classes": ["arch", "column", "statue", "roof"],
    "views": 8,
    "N": 4,
    "sigma_a": 0.3,
    "ae_epochs": 100,
    "field_iterations": 3000,
    "ensemble": {"type": "weighted"},
    "queries": "queries.tsv"
}
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional, Union

from scoremaps.segment import make_ensemble
from wildscene.spec import SPEC_KEYS, SceneSpec, load_scene_spec, parse_structured_text, spec_from_dict


class ConfigError(ValueError):
    """
    Raised for an invalid pipeline config or query file.
    """


@dataclass
class PipelineConfig:
    # scene generation (see wildscene.SceneSpec)
    seed: int = 0
    num_gaussians: int = 200
    classes: Union[int, list] = 4
    views: int = 8
    d_a: int = 8
    D: int = 128
    C: int = 3
    N: int = 4
    sigma_a: float = 0.3
    transient_rate: float = 0.0
    eps_q: float = 0.05
    eps_d: Optional[float] = None
    height: int = 64
    width: int = 64
    max_transients: int = 1
    num_transient_classes: int = 2
    levels: int = 1
    styles: list = field(default_factory=list)
    true_style: Optional[str] = None
    scene_spec: Optional[str] = None

    # autoencoder
    ae_epochs: int = 100
    ae_learning_rate: float = 1e-4
    ae_batch_size: int = 256
    ae_hidden: list = field(default_factory=lambda: [256, 128, 32])
    ae_pixel_stride: int = 1
    ae_use_uncertainty: bool = True
    ae_all_appearances: bool = False
    tau_u: float = 0.9

    # language field
    field_iterations: int = 30000
    field_learning_rate: float = 0.0025
    use_aum: bool = True
    use_tum: bool = True

    # querying
    tau: float = 0.4
    tau_3d: float = 0.6
    smooth_kernel: int = 20
    ensemble: Union[str, dict] = field(default_factory=lambda: {"type": "weighted"})
    background_filter: bool = True
    queries: Optional[Union[str, list]] = None

    out: str = "out"

    # scene fields given explicitly; they win over the scene_spec file
    scene_overrides: tuple = field(default=(), compare=False, repr=False)

    def validate(self):
        """
        Raises:
            ConfigError naming the offending field
        """
        try:
            scene = self.scene()
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid scene fields: {e}")

        checks = [
            (self.ae_epochs >= 0, "ae_epochs must be >= 0"),
            (self.ae_learning_rate >= 0, "ae_learning_rate must be >= 0"),
            (self.ae_batch_size >= 1, "ae_batch_size must be >= 1"),
            (all(isinstance(h, int) and h >= 1 for h in self.ae_hidden), "ae_hidden must be positive ints"),
            (self.ae_pixel_stride >= 1, "ae_pixel_stride must be >= 1"),
            (0.0 <= self.tau_u <= 1.0, "tau_u must be in [0, 1]"),
            (self.field_iterations >= 0, "field_iterations must be >= 0"),
            (self.field_learning_rate >= 0, "field_learning_rate must be >= 0"),
            (0.0 < self.tau < 1.0, "tau must be in (0, 1)"),
            (0.0 < self.tau_3d < 1.0, "tau_3d must be in (0, 1)"),
            (isinstance(self.smooth_kernel, int) and 1 <= self.smooth_kernel <= min(scene.height, scene.width),
             "smooth_kernel must be an int in [1, min(height, width)]"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

        try:
            make_ensemble(self.ensemble)
        except (ImportError, ValueError, TypeError) as e:
            raise ConfigError(f"Invalid ensemble {self.ensemble}: {e}")

    def scene(self) -> SceneSpec:
        """
        Scene spec: the referenced spec file (if any) overridden by the scene
        fields named in scene_overrides, whatever their values.
        """
        if self.scene_spec is None:
            return spec_from_dict({k: getattr(self, k) for k in SPEC_KEYS})
        base = load_scene_spec(self.scene_spec).to_dict()
        base.update({k: getattr(self, k) for k in self.scene_overrides})
        return spec_from_dict(base)

    def summary(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_dict(self) -> dict:
        data = asdict(self)
        del data["scene_overrides"]
        return data

    def with_overrides(self, **overrides) -> "PipelineConfig":
        unknown = set(overrides) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"Unknown config fields: {sorted(unknown)}")
        given = tuple(sorted(set(self.scene_overrides) | (set(overrides) & SPEC_KEYS)))
        cfg = replace(self, **overrides, scene_overrides=given)
        cfg.validate()
        return cfg


CONFIG_KEYS = {f.name for f in fields(PipelineConfig)} - {"scene_overrides"}


def config_from_dict(data: dict) -> PipelineConfig:
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"Unknown config fields: {sorted(unknown)}")
    try:
        cfg = PipelineConfig(**data, scene_overrides=tuple(sorted(set(data) & SPEC_KEYS)))
    except TypeError as e:
        raise ConfigError(str(e))
    cfg.validate()
    return cfg


def load_config(path: str, **overrides) -> PipelineConfig:
    """
    Load and validate a pipeline config file.

    Parameters:
        path (str): JSON or key = value file
        overrides: Fields replacing the file's values (e.g. seed, out)

    Returns:
        PipelineConfig

    Raises:
        FileNotFoundError, ConfigError
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Config file '{path}' not found")
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = parse_structured_text(f.read())
        except ValueError as e:
            raise ConfigError(f"Cannot parse '{path}': {e}")

    if data.get("scene_spec") and not os.path.isabs(data["scene_spec"]):
        data["scene_spec"] = os.path.join(os.path.dirname(os.path.abspath(path)), data["scene_spec"])
    if isinstance(data.get("queries"), str) and not os.path.isabs(data["queries"]):
        data["queries"] = os.path.join(os.path.dirname(os.path.abspath(path)), data["queries"])

    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data)
