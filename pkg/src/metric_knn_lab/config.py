"""JSON-friendly construction of models, problems and grids."""

from __future__ import annotations

import hashlib
import json
import math
import re

import numpy as np

from .measure_models import (
    BernoulliSeqModel,
    DiscreteModel,
    GaussianMixtureModel,
    LearningProblem,
    MonteCarloModel,
    NestedBallModel,
    UniformCubeModel,
    constant_eta,
    coordinate_eta,
    dirac_model,
    parity_eta,
)
from .metric_core import Euclidean, Heisenberg, NestedBallSpace, UltrametricSeq


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def checkerboard_mixture(side: int = 4, spacing: float = 1.5, sigma: float = 0.5) -> dict:
    """Equal-weight isotropic Gaussians on a ``side x side`` grid, labels alternating."""
    cells = [(i, j) for i in range(side) for j in range(side)]
    return {
        "kind": "gaussian-mixture",
        "weights": [1.0 / len(cells)] * len(cells),
        "means": [[spacing * i, spacing * j] for i, j in cells],
        "sigmas": [sigma] * len(cells),
        "labels": [(i + j) % 2 for i, j in cells],
    }


MODEL_PRESETS = {
    "nested": {"kind": "nested"},
    "cantor": {"kind": "bernoulli-seq", "depth": 52, "p": 0.5},
    "uniform1": {"kind": "uniform-cube", "d": 1},
    "uniform2": {"kind": "uniform-cube", "d": 2},
    "checkerboard": checkerboard_mixture(),
    "two-gaussians": {
        "kind": "gaussian-mixture",
        "weights": [0.5, 0.5],
        "means": [[0.0, 0.0], [2.0, 0.0]],
        "sigmas": [1.0, 1.0],
        "labels": [0, 1],
    },
    # same center, different spreads: the Bayes boundary is a circle
    "concentric-gaussians": {
        "kind": "gaussian-mixture",
        "weights": [0.5, 0.5],
        "means": [[0.0, 0.0], [0.0, 0.0]],
        "sigmas": [1.0, 1.7],
        "labels": [0, 1],
    },
    "dirac": {"kind": "dirac"},
    "heisenberg-box": {"kind": "heisenberg-mc", "half_width": 1.0, "M": 20000},
}


def _space(cfg: dict):
    name = cfg.get("space", "euclidean")
    if name == "euclidean":
        return Euclidean(int(cfg.get("d", 1)))
    if name == "sequence":
        return UltrametricSeq()
    if name == "nested":
        return NestedBallSpace()
    if name == "heisenberg":
        return Heisenberg()
    raise ConfigError(f"unknown space {name!r}")


def build_model(cfg, seed: int = 0):
    if isinstance(cfg, str):
        if cfg not in MODEL_PRESETS:
            raise ConfigError(f"unknown model preset {cfg!r}; known: {', '.join(MODEL_PRESETS)}")
        cfg = MODEL_PRESETS[cfg]
    kind = cfg.get("kind")
    try:
        if kind == "nested":
            return NestedBallModel()
        if kind == "bernoulli-seq":
            return BernoulliSeqModel(int(cfg.get("depth", 52)), float(cfg.get("p", 0.5)))
        if kind == "uniform-cube":
            return UniformCubeModel(int(cfg.get("d", 1)))
        if kind == "gaussian-mixture":
            return GaussianMixtureModel(cfg["weights"], cfg["means"], cfg["sigmas"], cfg["labels"])
        if kind == "checkerboard":
            sub = checkerboard_mixture(int(cfg.get("side", 4)), float(cfg.get("spacing", 1.5)), float(cfg.get("sigma", 0.5)))
            return GaussianMixtureModel(sub["weights"], sub["means"], sub["sigmas"], sub["labels"])
        if kind == "dirac":
            space = _space(cfg)
            point = cfg.get("point", [0.0] * getattr(space, "d", 1))
            return dirac_model(space, point)
        if kind == "discrete":
            space = _space(cfg)
            atoms = np.asarray(cfg["atoms"], dtype=np.uint8 if isinstance(space, UltrametricSeq) else None)
            return DiscreteModel(space, atoms, cfg.get("weights"))
        if kind == "heisenberg-mc":
            h = float(cfg.get("half_width", 1.0))
            sampler = lambda rng, n: rng.uniform(-h, h, size=(n, 3))
            return MonteCarloModel(Heisenberg(), sampler, int(cfg.get("M", 20000)), seed)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad model config {cfg!r}: {exc}") from exc
    raise ConfigError(f"unknown model kind {kind!r}")


def build_eta(cfg, model):
    if isinstance(cfg, (int, float)):
        return constant_eta(float(cfg)), ""
    if isinstance(cfg, str):
        cfg = {"name": cfg}
    name = cfg.get("name")
    if name == "constant":
        return constant_eta(float(cfg.get("value", 0.5))), ""
    if name == "coordinate":
        return coordinate_eta, ""
    if name == "parity":
        return parity_eta, ""
    if name == "posterior":
        if not isinstance(model, GaussianMixtureModel):
            raise ConfigError("eta 'posterior' needs a gaussian-mixture model")
        return model.posterior, "posterior"
    raise ConfigError(f"unknown eta {name!r}")


def build_problem(model_cfg, eta_cfg, seed: int = 0) -> LearningProblem:
    model = build_model(model_cfg, seed)
    eta, tag = build_eta(eta_cfg, model)
    return LearningProblem(model, eta, name=tag)


_POW = re.compile(r"^\s*(\d+(?:\.\d*)?)\s*\^\s*(-?\d+)\s*$")


def parse_number(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    m = _POW.match(str(text))
    if m:
        return float(m.group(1)) ** int(m.group(2))
    if str(text).strip() in ("e^-1", "1/e"):
        return math.exp(-1)
    return float(text)


def parse_grid(text) -> list[float]:
    """``"2^-3..2^-10"`` (powers of a common base), ``"a,b,c"`` or a list."""
    if isinstance(text, (list, tuple)):
        return [parse_number(t) for t in text]
    text = str(text)
    if ".." in text:
        a, b = text.split("..")
        ma, mb = _POW.match(a), _POW.match(b)
        if not (ma and mb and ma.group(1) == mb.group(1)):
            raise ConfigError(f"range grids must read base^i..base^j, got {text!r}")
        base, i, j = float(ma.group(1)), int(ma.group(2)), int(mb.group(2))
        step = 1 if j >= i else -1
        return [base**e for e in range(i, j + step, step)]
    return [parse_number(t) for t in text.split(",") if t.strip()]


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def config_digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()
