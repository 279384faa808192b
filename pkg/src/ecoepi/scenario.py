"""Scenario files: JSON documents naming a model variant, parameters and run settings."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .equilibria import EquilibriumId
from .integrate import SolverOptions
from .model import ModelDomainError, ModelParams, ParameterDomainError, StateOriginal, StateReformed, Variant, to_reformed
from .sweep import SweepSpec, default_init

__all__ = ["Scenario", "ScenarioError", "load_scenario", "parse_scenario", "bundled_scenarios", "load_schema"]


class ScenarioError(ModelDomainError):
    """Malformed scenario; ``key`` is the dotted path of the offending entry when known."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("ecoepi.schemas").joinpath(f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def bundled_scenarios() -> list[str]:
    files = resources.files("ecoepi.scenarios").iterdir()
    return sorted(f.name[:-5] for f in files if f.name.endswith(".json"))


@dataclass(frozen=True)
class Scenario:
    name: str
    params: ModelParams
    init: StateReformed | None = None
    solver: SolverOptions = SolverOptions()
    sweep: SweepSpec | None = None
    target: EquilibriumId | None = None
    comment: str = ""
    digest: str = ""
    source: str = ""

    @property
    def start(self) -> StateReformed:
        """The scenario's initial state, or the default interior point ``(0.5, sqrt(K)/2, 0.1)``."""
        return self.init if self.init is not None else default_init(self.params)


def _line_of(text, key):
    # Best-effort location of a key for diagnostics.
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def parse_scenario(text: str, name: str = "<string>", source: str = "") -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(exc.msg, line=exc.lineno) from None
    validator = jsonschema.Draft202012Validator(load_schema("scenario"))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            extra = sorted(set(err.instance) - allowed)
            key = ".".join(filter(None, [path, extra[0] if extra else ""]))
            raise ScenarioError("unknown key", key=key, line=_line_of(text, extra[0]) if extra else None)
        last = str(err.absolute_path[-1]) if err.absolute_path else None
        raise ScenarioError(err.message, key=path or None, line=_line_of(text, last) if last else None)

    variant = Variant(doc["model"])
    try:
        params = ModelParams.from_dict(doc["params"], variant, doc.get("validate_constraints", True))
    except ParameterDomainError as exc:
        raise ScenarioError(str(exc), key=f"params.{exc.key}", line=_line_of(text, exc.key)) from None

    init = None
    if "init" in doc:
        values = doc["init"]
        try:
            if "A" in values:
                init = StateReformed(values["A"], values["T"], values["U"])
            else:
                init = to_reformed(StateOriginal(values["S"], values["I"], values["P"]))
        except ModelDomainError as exc:
            raise ScenarioError(str(exc), key="init") from None

    try:
        solver = SolverOptions(**doc.get("solver", {}))
    except ModelDomainError as exc:
        raise ScenarioError(str(exc), key="solver") from None

    sweep = None
    if "sweep" in doc:
        s = doc["sweep"]
        kw = dict(with_simulation=s.get("with_simulation", False), sim_opts=solver, init=init)
        try:
            if "values" in s:
                sweep = SweepSpec(params, s["parameter"], tuple(s["values"]), **kw)
            else:
                sweep = SweepSpec.from_range(params, s["parameter"], s["start"], s["stop"], s["step"], **kw)
        except ModelDomainError as exc:
            raise ScenarioError(str(exc), key="sweep") from None

    target = None
    if "target" in doc:
        label = doc["target"]
        if label[0] != variant.prefix:
            raise ScenarioError(f"{label} does not name a {variant.value} equilibrium "
                                f"(use the {variant.prefix} prefix)", key="target", line=_line_of(text, "target"))
        target = EquilibriumId(f"E{label[1]}")

    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return Scenario(doc.get("name", name), params, init, solver, sweep, target,
                    doc.get("comment", ""), digest, source)


def load_scenario(ref) -> Scenario:
    """Load a scenario from a file path or by bundled name (``e3_scenario`` or ``e3``)."""
    path = Path(ref)
    if path.is_file():
        return parse_scenario(path.read_text(encoding="utf-8"), path.stem, str(path))
    names = bundled_scenarios()
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    for candidate in (stem, f"{stem}_scenario"):
        if candidate in names:
            text = resources.files("ecoepi.scenarios").joinpath(f"{candidate}.json").read_text(encoding="utf-8")
            return parse_scenario(text, candidate, f"bundled:{candidate}")
    raise ScenarioError(f"no such scenario file or bundled scenario: {ref}")

