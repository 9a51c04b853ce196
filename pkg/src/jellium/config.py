"""Experiment configuration: JSON schema, validation, canonical
serialization, and hashing.

Configs are dict-backed; `canonical` is the byte-stable form (sorted keys,
no whitespace) whose SHA-256 is stamped into every output file.
"""

import hashlib
import json
import math

from .errors import ValidationError
from .measures import (MeasureSpec, UniformCircle, UniformDisk, UniformAnnulus,
                       RadialDensity, PolarDensity)
from .stats import RegionSpec, make_kappa_rule

EXPERIMENT_KINDS = (
    "kernel-convergence",
    "annulus-Q",
    "independence",
    "zeros",
    "counts",
    "scaling",
    "sampler-validation",
    "sample",
)

_PROFILE_BUILDERS = {
    "uniform_circle": lambda p: UniformCircle(float(p["radius"])),
    "uniform_disk": lambda p: UniformDisk(float(p["radius"])),
    "uniform_annulus": lambda p: UniformAnnulus(float(p["inner"]), float(p["outer"])),
    "radial_density": lambda p: RadialDensity(tuple(p["radii"]), tuple(p["cdf"])),
    "polar_density": lambda p: PolarDensity(tuple(p["r_grid"]),
                                            tuple(p["theta_grid"]),
                                            tuple(map(tuple, p["values"]))),
}


def build_measure(spec_list, errors):
    comps = []
    for i, entry in enumerate(spec_list):
        kind = entry.get("profile")
        builder = _PROFILE_BUILDERS.get(kind)
        if builder is None:
            errors.append(f"measure[{i}]: unknown profile {kind!r}")
            continue
        try:
            comps.append((float(entry["mass"]), builder(entry.get("params", {}))))
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            errors.append(f"measure[{i}]: {exc}")
    if errors:
        return None
    try:
        return MeasureSpec(tuple(comps))
    except ValidationError as exc:
        errors.append(f"measure: {exc}")
        return None


def build_region(entry, errors, label="region"):
    try:
        r_max = entry.get("r_max")
        return RegionSpec(
            r_min=float(entry.get("r_min", 0.0)),
            r_max=math.inf if r_max is None else float(r_max),
            theta_min=entry.get("theta_min"),
            theta_max=entry.get("theta_max"),
            compact_in_component=bool(entry.get("compact_in_component", False)),
        )
    except (TypeError, ValueError, ValidationError) as exc:
        errors.append(f"{label}: {exc}")
        return None


def build_kappa_rule(entry, errors):
    kind = entry.get("kind")
    try:
        if kind == "N+chi":
            chi = entry.get("chi")
            if chi is not None and float(chi) <= 0.0:
                errors.append("kappa rule: kappa must exceed N (chi > 0 required)")
                return None
            return make_kappa_rule(kind, chi)
        return make_kappa_rule(kind)
    except ValidationError as exc:
        errors.append(f"kappa_rule: {exc}")
        return None


class ExperimentConfig:
    """Validated experiment description backed by its raw dict."""

    def __init__(self, raw):
        if not isinstance(raw, dict):
            raise ValidationError("config must be a JSON object")
        self.raw = raw
        errors = []
        kind = raw.get("experiment")
        if kind not in EXPERIMENT_KINDS:
            errors.append(f"experiment: unknown kind {kind!r}")
        self.kind = kind
        seed = raw.get("seed", 0)
        if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
            errors.append("seed: must be an unsigned 64-bit integer")
        self.seed = seed
        self.measure = None
        if "measure" in raw:
            self.measure = build_measure(raw["measure"], errors)
        self.kappa_rule = None
        if "kappa_rule" in raw:
            self.kappa_rule = build_kappa_rule(raw["kappa_rule"], errors)
        self.gates = dict(raw.get("gates", {}))
        if errors:
            raise ValidationError(json.dumps({"errors": errors}))
        self._validate_kind_fields()

    def _require(self, *names):
        missing = [n for n in names if n not in self.raw]
        if missing:
            raise ValidationError(json.dumps(
                {"errors": [f"{self.kind}: missing fields {missing}"]}))

    def _validate_kind_fields(self):
        kind = self.kind
        if kind in ("kernel-convergence",):
            self._require("measure", "kappa_rule", "n_list", "grid", "region")
        elif kind == "annulus-Q":
            self._require("measure", "kappa_rule", "region", "targets", "grid",
                          "select_tol", "n_select_max", "n_cap")
        elif kind == "independence":
            self._require("measure", "kappa_rule", "n", "replicas",
                          "region_a", "region_b")
        elif kind == "zeros":
            self._require("degree", "replicas")
        elif kind == "counts":
            self._require("measure", "kappa_rule", "n", "regions")
        elif kind == "scaling":
            self._require("measure", "kappa_rule", "n_list", "region")
        elif kind == "sampler-validation":
            self._require("measure", "kappa_rule")
        elif kind == "sample":
            self._require("measure", "kappa_rule", "n", "replicas", "method")

    def region(self, key="region"):
        errors = []
        out = build_region(self.raw[key], errors, key)
        if errors:
            raise ValidationError(json.dumps({"errors": errors}))
        return out

    def gate(self, name, default):
        return self.gates.get(name, default)

    def canonical(self):
        return canonical_json(self.raw)

    def config_hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True)


def parse_config(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(json.dumps({"errors": [f"invalid JSON: {exc}"]}))
    return ExperimentConfig(raw)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
