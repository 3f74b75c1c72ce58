"""Scenario files: the JSON schema, validation, and the shipped presets.

A scenario pins everything a sweep needs: topology, propagation profile,
constellation, detector list, the sweep axis and its points, Monte Carlo
sizes and the master seed.  Top-level keys are exactly ``topology``,
``profile``, ``constellation``, ``detectors``, ``sweep``, ``trials`` and
``seed``; unknown keys anywhere are rejected.

Sweeps along ``snr_db`` reuse the top-level topology at every point; the
other axes (``n_r``, ``n_classes``, ``k_users``, ``tx_per_user``) list
explicit per-point topologies together with a fixed operating ``snr_db``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .channel import HeadOverrides, LargeScaleProfile, SystemTopology
from .detect import Constellation, DetectorSpec
from .errors import (
    DimensionError,
    InvalidCorrelationError,
    ScenarioParseError,
    ScenarioValidationError,
)

__all__ = [
    "SweepPoint",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "preset_names",
    "preset_path",
    "load_preset",
]

AXES = ("snr_db", "n_r", "n_classes", "k_users", "tx_per_user")
METRICS = ("ber", "rate", "flops")

#: --full-scale multipliers restoring the published Monte Carlo scale from
#: the shipped desk-scale presets.
FULL_SCALE_REALIZATIONS = 10
FULL_SCALE_VECTORS = 5


@dataclass(frozen=True)
class SweepPoint:
    """One sweep coordinate: its x-value, operating SNR and topology."""

    value: float
    snr_db: float | None
    topology: SystemTopology


@dataclass(frozen=True)
class Scenario:
    name: str
    metric: str
    base_topology: SystemTopology
    profile: LargeScaleProfile
    constellation: Constellation
    detectors: tuple[DetectorSpec, ...]
    sweep_axis: str
    points: tuple[SweepPoint, ...]
    symbol_vectors: int
    realizations: int
    seed: int
    cache_decouplers: bool = False

    def to_json(self) -> dict:
        """Canonical JSON form; reloading it reproduces this scenario."""
        sweep: dict = {"axis": self.sweep_axis}
        if self.sweep_axis == "snr_db":
            sweep["values"] = [None if p.snr_db is None else p.snr_db for p in self.points]
        else:
            if self.points and self.points[0].snr_db is not None:
                sweep["snr_db"] = self.points[0].snr_db
            sweep["points"] = [
                {"value": p.value, "topology": _topology_json(p.topology)} for p in self.points
            ]
        trials: dict = {"metric": self.metric}
        if self.metric == "ber":
            trials["symbol_vectors"] = self.symbol_vectors
        if self.metric in ("ber", "rate"):
            trials["realizations"] = self.realizations
        if self.metric == "flops" and self.cache_decouplers:
            trials["cache_decouplers"] = True
        return {
            "topology": _topology_json(self.base_topology),
            "profile": _profile_json(self.profile),
            "constellation": self.constellation.name,
            "detectors": [_detector_json(d) for d in self.detectors],
            "sweep": sweep,
            "trials": trials,
            "seed": self.seed,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


# ---------------------------------------------------------------------------
# parsing helpers


def _fail_parse(path: str, message: str):
    raise ScenarioParseError(f"{path}: {message}")


def _fail_valid(message: str):
    raise ScenarioValidationError(message)


def _expect_object(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail_parse(path, f"expected an object, got {type(value).__name__}")
    return value


def _reject_unknown(obj: dict, known: tuple[str, ...], path: str) -> None:
    extra = sorted(set(obj) - set(known))
    if extra:
        _fail_parse(path, f"unknown keys {extra}; allowed: {sorted(known)}")


def _get_number(obj: dict, key: str, path: str, required=True, default=None):
    if key not in obj:
        if required:
            _fail_parse(path, f"missing required key '{key}'")
        return default
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail_parse(f"{path}.{key}", "expected a number")
    return value


def _get_int(obj: dict, key: str, path: str, required=True, default=None):
    value = _get_number(obj, key, path, required, default)
    if value is default and not required:
        return default
    if int(value) != value:
        _fail_parse(f"{path}.{key}", "expected an integer")
    return int(value)


def _as_range(value, path: str) -> tuple[float, float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (float(value), float(value))
    if isinstance(value, list) and len(value) == 2:
        return (float(value[0]), float(value[1]))
    _fail_parse(path, "expected a number or a [low, high] pair")


def _parse_topology(obj, path: str) -> SystemTopology:
    obj = _expect_object(obj, path)
    keys = ("classes", "users_per_class", "tx_antennas_per_user", "bs_antennas",
            "radio_heads", "antennas_per_head")
    _reject_unknown(obj, keys, path)
    n_classes = _get_int(obj, "classes", path, required=False)
    users = obj.get("users_per_class")
    if users is None:
        _fail_parse(path, "missing required key 'users_per_class'")
    tx = obj.get("tx_antennas_per_user")
    if tx is None:
        _fail_parse(path, "missing required key 'tx_antennas_per_user'")
    try:
        return SystemTopology.create(
            users,
            tx,
            _get_int(obj, "bs_antennas", path),
            _get_int(obj, "radio_heads", path, required=False, default=0),
            _get_int(obj, "antennas_per_head", path, required=False, default=0),
            n_classes=n_classes,
        )
    except (ValueError, TypeError, DimensionError) as exc:
        _fail_valid(f"{path}: {exc}")


def _parse_profile(obj, path: str) -> LargeScaleProfile:
    obj = _expect_object(obj, path)
    keys = ("path_loss_exponent", "loss_range", "distance_range", "shadow_sigma_db",
            "rho_rx", "rho_tx", "heads")
    _reject_unknown(obj, keys, path)
    heads = None
    if "heads" in obj:
        hobj = _expect_object(obj["heads"], f"{path}.heads")
        hkeys = ("loss_range", "distance_range", "shadow_sigma_db", "rho_rx")
        _reject_unknown(hobj, hkeys, f"{path}.heads")
        heads = HeadOverrides(
            loss_range=_as_range(hobj["loss_range"], f"{path}.heads.loss_range")
            if "loss_range" in hobj else None,
            distance_range=_as_range(hobj["distance_range"], f"{path}.heads.distance_range")
            if "distance_range" in hobj else None,
            shadow_sigma_db=_get_number(hobj, "shadow_sigma_db", f"{path}.heads", required=False),
            rho_rx=_get_number(hobj, "rho_rx", f"{path}.heads", required=False),
        )
    try:
        return LargeScaleProfile(
            path_loss_exponent=float(_get_number(obj, "path_loss_exponent", path)),
            loss_range=_as_range(obj.get("loss_range"), f"{path}.loss_range"),
            distance_range=_as_range(obj.get("distance_range"), f"{path}.distance_range"),
            shadow_sigma_db=float(_get_number(obj, "shadow_sigma_db", path)),
            rho_rx=float(_get_number(obj, "rho_rx", path)),
            rho_tx=float(_get_number(obj, "rho_tx", path)),
            heads=heads,
        )
    except (ValueError, TypeError, InvalidCorrelationError) as exc:
        _fail_valid(f"{path}: {exc}")


def _parse_detector(obj, path: str) -> DetectorSpec:
    obj = _expect_object(obj, path)
    _reject_unknown(obj, ("family", "mode", "ordering", "branches"), path)
    if "family" not in obj:
        _fail_parse(path, "missing required key 'family'")
    kwargs = {"family": obj["family"]}
    if "mode" in obj:
        kwargs["mode"] = obj["mode"]
    if "ordering" in obj:
        kwargs["ordering"] = obj["ordering"]
    if "branches" in obj and obj["branches"] is not None:
        kwargs["branches"] = _get_int(obj, "branches", path)
    try:
        return DetectorSpec(**kwargs)
    except (ValueError, TypeError) as exc:
        _fail_valid(f"{path}: {exc}")


def parse_scenario(doc: dict, name: str = "scenario") -> Scenario:
    """Validate a parsed JSON document and build the scenario."""
    doc = _expect_object(doc, name)
    top_keys = ("topology", "profile", "constellation", "detectors", "sweep", "trials", "seed")
    _reject_unknown(doc, top_keys, name)
    for key in ("profile", "sweep", "trials", "seed"):
        if key not in doc:
            _fail_parse(name, f"missing required key '{key}'")

    profile = _parse_profile(doc["profile"], f"{name}.profile")
    constellation = Constellation.from_name(doc.get("constellation", "qpsk"))
    detectors = tuple(
        _parse_detector(d, f"{name}.detectors[{i}]")
        for i, d in enumerate(doc.get("detectors", []))
    )

    trials = _expect_object(doc["trials"], f"{name}.trials")
    _reject_unknown(trials, ("metric", "symbol_vectors", "realizations", "cache_decouplers"),
                    f"{name}.trials")
    metric = trials.get("metric")
    if metric not in METRICS:
        _fail_valid(f"{name}.trials.metric must be one of {METRICS}, got {metric!r}")
    symbol_vectors = _get_int(trials, "symbol_vectors", f"{name}.trials",
                              required=metric == "ber", default=1)
    realizations = _get_int(trials, "realizations", f"{name}.trials",
                            required=metric in ("ber", "rate"), default=1)
    cache = bool(trials.get("cache_decouplers", False))
    if symbol_vectors < 1 or realizations < 1:
        _fail_valid(f"{name}.trials: symbol_vectors and realizations must be >= 1")
    if metric == "ber" and not detectors:
        _fail_valid(f"{name}: a BER sweep needs at least one detector")
    if metric == "flops" and not detectors:
        _fail_valid(f"{name}: a FLOP table needs at least one detector")

    sweep = _expect_object(doc["sweep"], f"{name}.sweep")
    axis = sweep.get("axis")
    if axis not in AXES:
        _fail_valid(f"{name}.sweep.axis must be one of {AXES}, got {axis!r}")
    points: list[SweepPoint] = []
    if axis == "snr_db":
        _reject_unknown(sweep, ("axis", "values"), f"{name}.sweep")
        if "topology" not in doc:
            _fail_parse(name, "missing required key 'topology'")
        topology = _parse_topology(doc["topology"], f"{name}.topology")
        values = sweep.get("values")
        if not isinstance(values, list) or not values:
            _fail_valid(f"{name}.sweep.values must be a nonempty list")
        for i, v in enumerate(values):
            if v is None:
                if metric == "rate":
                    _fail_valid(f"{name}: rate sweeps need a finite SNR at every point")
                points.append(SweepPoint(math.inf, None, topology))
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                points.append(SweepPoint(float(v), float(v), topology))
            else:
                _fail_parse(f"{name}.sweep.values[{i}]", "expected a number or null")
        base_topology = topology
    else:
        _reject_unknown(sweep, ("axis", "snr_db", "points"), f"{name}.sweep")
        raw_points = sweep.get("points")
        if not isinstance(raw_points, list) or not raw_points:
            _fail_valid(f"{name}.sweep.points must be a nonempty list")
        snr_db = _get_number(sweep, "snr_db", f"{name}.sweep", required=metric != "flops",
                             default=None)
        for i, p in enumerate(raw_points):
            p = _expect_object(p, f"{name}.sweep.points[{i}]")
            _reject_unknown(p, ("value", "topology"), f"{name}.sweep.points[{i}]")
            value = _get_number(p, "value", f"{name}.sweep.points[{i}]")
            topology = _parse_topology(p.get("topology"), f"{name}.sweep.points[{i}].topology")
            points.append(SweepPoint(float(value), snr_db, topology))
        if "topology" in doc:
            base_topology = _parse_topology(doc["topology"], f"{name}.topology")
        else:
            base_topology = points[0].topology

    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        _fail_valid(f"{name}.seed must be a nonnegative integer")

    return Scenario(
        name=name,
        metric=metric,
        base_topology=base_topology,
        profile=profile,
        constellation=constellation,
        detectors=detectors,
        sweep_axis=axis,
        points=tuple(points),
        symbol_vectors=symbol_vectors,
        realizations=realizations,
        seed=seed,
        cache_decouplers=cache,
    )


def load_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_scenario(doc, name=path.stem)


# ---------------------------------------------------------------------------
# serialization back to JSON


def _topology_json(t: SystemTopology) -> dict:
    out = {
        "classes": t.n_classes,
        "users_per_class": list(t.users_per_class),
        "tx_antennas_per_user": [list(cls) for cls in t.tx_antennas],
        "bs_antennas": t.n_bs,
    }
    if t.n_heads:
        out["radio_heads"] = t.n_heads
        out["antennas_per_head"] = t.antennas_per_head
    return out


def _profile_json(p: LargeScaleProfile) -> dict:
    out = {
        "path_loss_exponent": p.path_loss_exponent,
        "loss_range": list(p.loss_range),
        "distance_range": list(p.distance_range),
        "shadow_sigma_db": p.shadow_sigma_db,
        "rho_rx": p.rho_rx,
        "rho_tx": p.rho_tx,
    }
    if p.heads is not None:
        heads = {}
        if p.heads.loss_range is not None:
            heads["loss_range"] = list(p.heads.loss_range)
        if p.heads.distance_range is not None:
            heads["distance_range"] = list(p.heads.distance_range)
        if p.heads.shadow_sigma_db is not None:
            heads["shadow_sigma_db"] = p.heads.shadow_sigma_db
        if p.heads.rho_rx is not None:
            heads["rho_rx"] = p.heads.rho_rx
        out["heads"] = heads
    return out


def _detector_json(d: DetectorSpec) -> dict:
    out = {"family": d.family, "mode": d.mode, "ordering": d.ordering}
    if d.branches is not None:
        out["branches"] = d.branches
    return out


# ---------------------------------------------------------------------------
# presets


def _preset_dir():
    return resources.files("dsdlab") / "presets"


def preset_names() -> list[str]:
    return sorted(p.name[: -len(".json")] for p in _preset_dir().iterdir()
                  if p.name.endswith(".json"))


def preset_path(name: str) -> Path:
    candidate = _preset_dir() / f"{name}.json"
    if not candidate.is_file():
        raise ScenarioParseError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    return Path(str(candidate))


def load_preset(name: str) -> Scenario:
    return load_scenario(preset_path(name))
