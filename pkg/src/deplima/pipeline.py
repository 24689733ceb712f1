"""Abstract pipeline: ordered processing units over shared analysis data.

Analysis data is a map of named layers. A unit declares which layers it
reads and which it produces; the runtime hands it exactly the declared
inputs and accepts exactly the declared outputs, so a unit can neither
read nor publish anything undeclared. Steps run unconditionally, in
configuration order, each exactly once; a failing step aborts the run
without publishing its outputs.

Configuration file format (UTF-8, line-oriented, '#' comments):

    pipeline <name> lang=<code>
    step <unit-name> [key=value]...
    resource <name> path=<path>

``${model_dir}`` and ``${lang}`` expand in resource paths.
"""

from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .conllu import ConlluDocument
from .errors import (
    ConfigError,
    MissingLayer,
    MissingParam,
    MissingResource,
    UnitFailure,
    UnknownUnit,
    UnsatisfiedInput,
)
from .graph import AnalysisGraph

log = logging.getLogger("deplima")

PRIMORDIAL_LAYERS = ("raw-text", "conllu-input")

LAYER_KINDS = {
    "graph": AnalysisGraph,
    "document": ConlluDocument,
    "table": (list, dict),
    "bytes": (str, bytes),
}


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str


class AnalysisData:
    """Named analysis layers; lookup of an absent layer is a hard miss."""

    def __init__(self, layers=None):
        self.layers = dict(layers or {})

    def get(self, name):
        try:
            return self.layers[name]
        except KeyError:
            raise MissingLayer(name) from None

    def has(self, name):
        return name in self.layers

    def names(self):
        return sorted(self.layers)


class ProcessingUnit:
    """Base class; subclasses declare contract fields and implement run().

    Class attributes: ``name``, ``inputs``/``outputs`` (LayerSpec tuples),
    ``required_params`` and ``required_resources`` (name tuples).
    """

    name = "abstract"
    inputs = ()
    outputs = ()
    required_params = ()
    required_resources = ()

    def __init__(self, params, language, resources):
        self.params = dict(params or {})
        self.language = language
        self.resources = resources
        for key in self.required_params:
            if key not in self.params:
                raise MissingParam(self.name, key)

    def resource(self, name):
        return self.resources.get(self.language, name)

    def run(self, layers):
        raise NotImplementedError


class UnitRegistry:
    def __init__(self):
        self.factories = {}

    def register(self, name, factory):
        """Bind a unit factory; re-registration replaces and logs a warning."""
        if not name:
            raise ConfigError("unit name must be non-empty")
        if name in self.factories:
            log.warning("unit %r re-registered; previous factory replaced", name)
        self.factories[name] = factory
        return self

    def resolve(self, name):
        try:
            return self.factories[name]
        except KeyError:
            raise UnknownUnit(name) from None


def register_unit(registry, name, factory):
    return registry.register(name, factory)


class ResourceRegistry:
    """Lazily loaded, per-(language, name) shared resources.

    Loading is serialized; loaded objects are shared read-only. ``loaders``
    maps a resource name to a callable (path, language, registry) -> object.
    """

    def __init__(self, loaders=None):
        self.loaders = dict(loaders or {})
        self.paths = {}
        self.cache = {}
        self._lock = threading.RLock()

    def register_path(self, language, name, path):
        self.paths[(language, name)] = str(path)

    def get(self, language, name):
        key = (language, name)
        with self._lock:
            if key in self.cache:
                return self.cache[key]
            if key not in self.paths:
                raise MissingResource(language, name, "no path registered")
            path = self.paths[key]
            if not Path(path).exists():
                raise MissingResource(language, name, f"file {path} not found")
            loader = self.loaders.get(name)
            if loader is None:
                raise MissingResource(language, name, "no loader for this resource kind")
            value = loader(path, language, self)
            self.cache[key] = value
            return value


@dataclass
class PipelineConfig:
    name: str
    language: str
    steps: list = field(default_factory=list)      # (unit-name, params dict)
    resources: dict = field(default_factory=dict)  # name -> path


def parse_pipeline_config(text, variables=None):
    """Parse the line-oriented configuration format with ${var} expansion."""
    for key, value in (variables or {}).items():
        text = text.replace("${" + key + "}", str(value))
    name = None
    language = None
    steps = []
    resources = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        kind = fields[0]
        if kind == "pipeline":
            if len(fields) < 3 or not fields[2].startswith("lang="):
                raise ConfigError(f"line {line_no}: expected 'pipeline <name> lang=<code>'")
            name = fields[1]
            language = fields[2][len("lang="):]
        elif kind == "step":
            if len(fields) < 2:
                raise ConfigError(f"line {line_no}: step without a unit name")
            params = {}
            for item in fields[2:]:
                key, sep, value = item.partition("=")
                if not sep:
                    raise ConfigError(f"line {line_no}: bad step parameter {item!r}")
                params[key] = value
            steps.append((fields[1], params))
        elif kind == "resource":
            if len(fields) != 3 or not fields[2].startswith("path="):
                raise ConfigError(f"line {line_no}: expected 'resource <name> path=<path>'")
            resources[fields[1]] = fields[2][len("path="):]
        else:
            raise ConfigError(f"line {line_no}: unknown directive {kind!r}")
    if name is None:
        raise ConfigError("missing 'pipeline' header line")
    return PipelineConfig(name=name, language=language, steps=steps, resources=resources)


class Pipeline:
    def __init__(self, config, units, resources):
        self.config = config
        self.units = units
        self.resources = resources

    @property
    def steps(self):
        return list(self.config.steps)

    def run(self, data):
        return run_pipeline(self, data)


def build_pipeline(config, registry, resources):
    """Instantiate units and statically check layer and resource wiring."""
    units = []
    for unit_name, params in config.steps:
        factory = registry.resolve(unit_name)
        units.append(factory(params, config.language, resources))
    available = set(PRIMORDIAL_LAYERS)
    for index, unit in enumerate(units, start=1):
        for spec in unit.inputs:
            if spec.name not in available:
                raise UnsatisfiedInput(index, spec.name)
        available.update(spec.name for spec in unit.outputs)
    for unit in units:
        for res_name in unit.required_resources:
            if res_name not in config.resources:
                raise MissingResource(config.language, res_name, "not in configuration")
            path = config.resources[res_name]
            if not Path(path).exists():
                raise MissingResource(config.language, res_name, f"file {path} not found")
            resources.register_path(config.language, res_name, path)
    return Pipeline(config, units, resources)


def _check_kind(step_index, spec, value):
    expected = LAYER_KINDS.get(spec.kind)
    if expected is not None and not isinstance(value, expected):
        raise UnitFailure(
            step_index,
            f"layer {spec.name!r} has kind {type(value).__name__}, expected {spec.kind}",
        )


def run_pipeline(pipeline, data):
    """Execute every step once, in order; returns fresh AnalysisData."""
    layers = dict(data.layers)
    for index, unit in enumerate(pipeline.units, start=1):
        inputs = {}
        for spec in unit.inputs:
            if spec.name not in layers:
                raise UnitFailure(index, f"missing input layer {spec.name!r}")
            _check_kind(index, spec, layers[spec.name])
            inputs[spec.name] = layers[spec.name]
        try:
            produced = unit.run(inputs)
        except UnitFailure:
            raise
        except Exception as exc:
            raise UnitFailure(index, f"{unit.name}: {exc}") from exc
        declared = {spec.name: spec for spec in unit.outputs}
        for name in produced:
            if name not in declared:
                raise UnitFailure(index, f"{unit.name} wrote undeclared layer {name!r}")
            _check_kind(index, declared[name], produced[name])
        for name in declared:
            if name not in produced:
                raise UnitFailure(index, f"{unit.name} did not produce layer {name!r}")
        layers.update(produced)
    return AnalysisData(layers)


def run_many(pipeline, inputs, jobs=1):
    """Analyze several documents, optionally with a small thread pool.

    Each document gets its own AnalysisData; resources are shared read-only.
    """
    if jobs <= 1:
        return [pipeline.run(item) for item in inputs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(pipeline.run, inputs))
