"""
Scene Spec Module
-----------------
Parameters of a synthetic unconstrained photo collection.

A spec is structured UTF-8 text, either a JSON object or `key = value`
lines (values are parsed as JSON literals when possible, `#` starts a
comment):

    seed = 7
    num_gaussians = 200
    classes = ["arch", "column", "statue", "roof"]
    views = 8
    sigma_a = 0.3
"""

import json
import math
import os
from dataclasses import dataclass, field, fields
from typing import Optional, Union


@dataclass
class SceneSpec:
    """
    Parameters:
        seed (int): Master seed; every generated quantity derives from it
        num_gaussians (int): Gaussians across all objects
        classes (int or list[str]): Object class count or names
        views (int): Number of unconstrained photos
        d_a (int): Appearance embedding width
        D (int): High-dimensional language feature width
        C (int): Compressed latent width
        N (int): Language slots per Gaussian (N - 1 novel + self)
        sigma_a (float): Appearance noise scale of the feature oracle
        transient_rate (float): Probability a view carries occluders
        eps_q (float): Rendering-quality bound for novel appearances (mean L1)
        eps_d (float): Manhattan distance bound; None means 0.5 * sqrt(d_a)
        height, width (int): Image resolution
        max_transients (int): Upper bound R on occluders per view
        num_transient_classes (int): Distinct occluder classes
        levels (int): Hierarchical semantic levels
        styles (list[str]): Style candidates for style voting
        true_style (str): Which candidate the scene actually has
    """
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

    def __post_init__(self):
        if self.eps_d is None:
            self.eps_d = 0.5 * math.sqrt(self.d_a)
        self.validate()

    @property
    def class_names(self) -> list:
        if isinstance(self.classes, int):
            return [f"class_{k}" for k in range(self.classes)]
        return list(self.classes)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def validate(self):
        """
        Raises:
            ValueError, TypeError on out-of-range fields
        """
        names = self.class_names
        if len(names) < 1:
            raise ValueError("At least one class is required")
        if len(set(names)) != len(names):
            raise ValueError(f"Class names must be unique, got {names}")
        if not isinstance(self.num_gaussians, int) or self.num_gaussians < 1:
            raise ValueError(f"num_gaussians must be a positive int, got {self.num_gaussians}")
        if self.num_gaussians < len(names):
            raise ValueError(f"num_gaussians ({self.num_gaussians}) must cover every class ({len(names)})")
        if self.views < 1:
            raise ValueError(f"views must be >= 1, got {self.views}")
        if self.d_a < 1:
            raise ValueError(f"d_a must be >= 1, got {self.d_a}")
        if not self.D >= self.C >= 1:
            raise ValueError(f"Need D >= C >= 1, got D={self.D}, C={self.C}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.sigma_a < 0:
            raise ValueError(f"sigma_a must be >= 0, got {self.sigma_a}")
        if not 0 <= self.transient_rate <= 1:
            raise ValueError(f"transient_rate must be in [0, 1], got {self.transient_rate}")
        if self.eps_q < 0 or self.eps_d < 0:
            raise ValueError("eps_q and eps_d must be non-negative")
        if self.height < 8 or self.width < 8:
            raise ValueError(f"Resolution must be at least 8x8, got {self.height}x{self.width}")
        if self.max_transients < 0 or self.num_transient_classes < 1:
            raise ValueError("max_transients must be >= 0 and num_transient_classes >= 1")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")
        if self.true_style is not None and self.true_style not in self.styles:
            raise ValueError(f"true_style '{self.true_style}' is not one of {self.styles}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


SPEC_KEYS = {f.name for f in fields(SceneSpec)}


def parse_structured_text(text: str) -> dict:
    """
    Parse a JSON object or `key = value` lines into a dict.

    Raises:
        ValueError on malformed lines
    """
    stripped = text.strip()
    if stripped.startswith("{"):
        data = json.loads(stripped)
        if not isinstance(data, dict):
            raise ValueError("Structured text must be a JSON object")
        return data

    data = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"Line {lineno}: expected 'key = value', got '{line}'")
        key, raw = (part.strip() for part in line.split("=", 1))
        try:
            data[key] = json.loads(raw)
        except json.JSONDecodeError:
            data[key] = raw
    return data


def spec_from_dict(data: dict) -> SceneSpec:
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise ValueError(f"Unknown scene spec fields: {sorted(unknown)}")
    return SceneSpec(**data)


def load_scene_spec(path: str) -> SceneSpec:
    """
    Load a scene spec file.

    Raises:
        FileNotFoundError, ValueError
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Scene spec '{path}' not found")
    with open(path, "r", encoding="utf-8") as f:
        return spec_from_dict(parse_structured_text(f.read()))
