"""Experiment configuration: JSON files validated against ``config.schema.json``."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import jsonschema

from .errors import ConfigError
from .fem.loads import CoupleField
from .geometry.domain import AprioriData, DomainSpec, Inclusion, curve_from_spec
from .geometry.mesh import Mesh
from .tensors import ElasticityTensor, PlateTensor, make_isotropic

DEFAULT_SOLVER = {"target_h": 0.05, "refine": 0, "tol": 1e-10}


def load_schema() -> dict:
    text = resources.files("platelab").joinpath("config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def canonical_json(data: dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(data: dict) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def elasticity_from_spec(spec: dict) -> ElasticityTensor:
    if "isotropic" in spec:
        return make_isotropic(spec["isotropic"]["lam"], spec["isotropic"]["mu"])
    return ElasticityTensor.from_array(spec["coefficients"])


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated configuration with builders for the library objects."""

    data: dict
    source: str = ""
    hash: str = field(init=False)

    def __post_init__(self):
        try:
            jsonschema.validate(self.data, load_schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid config at {where}: {exc.message}") from None
        object.__setattr__(self, "hash", config_hash(self.data))
        # build once to surface semantic errors early
        self.domain()
        self.apriori()
        self.plate()

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
        return cls(data, str(path))

    def block(self, name: str) -> dict:
        return dict(self.data.get(name, {}))

    @property
    def seed(self) -> int:
        return int(self.data.get("seed", 0))

    @property
    def solver(self) -> dict:
        return {**DEFAULT_SOLVER, **self.block("solver")}

    def domain(self) -> DomainSpec:
        g = self.data["geometry"]
        incs = [Inclusion(curve_from_spec(i["curve"]), i.get("role", "rigid")) for i in g.get("inclusions", [])]
        gamma = tuple(g["gamma"]) if "gamma" in g else None
        return DomainSpec(curve_from_spec(g["outer"]), tuple(incs), gamma)

    def apriori(self) -> AprioriData:
        try:
            return AprioriData(**self.block("apriori"))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def plate(self) -> PlateTensor:
        t = self.data["tensor"]
        return PlateTensor(elasticity_from_spec(t["matrix"]), float(t["thickness"]))

    def inclusion_plate(self) -> PlateTensor | None:
        t = self.data["tensor"]
        if "inclusion" not in t:
            return None
        return PlateTensor(elasticity_from_spec(t["inclusion"]), float(t["thickness"]))

    def load(self) -> Callable[[Mesh], CoupleField]:
        spec = self.block("load") or {"kind": "cos_theta"}
        amp = float(spec.get("amplitude", 1.0))
        kind = spec["kind"]
        if kind == "cos_theta":
            return lambda m: CoupleField.cos_theta(m, amp)
        if kind == "gamma_bump":
            d = tuple(spec.get("direction", (1.0, 0.0)))
            return lambda m: CoupleField.gamma_bump(m, d, amp)
        return CoupleField.zero
