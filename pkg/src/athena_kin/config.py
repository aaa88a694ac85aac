"""Geometry parameters, joint limits and their JSON configuration file.

All lengths are millimetres and all angles radians once loaded. The file
format stores angles in degrees; conversion happens here and nowhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError

GEOMETRY_KEYS = ("l1", "l2", "l3", "l4", "l5", "l2min", "l2max", "l_tool", "l01", "l02", "l03", "l0")
POSITIVE_KEYS = ("l1", "l2", "l3", "l4", "l5", "l2min", "l2max", "l_tool")
LIMIT_KEYS = ("q4_range_deg", "lins_max_mm", "q3a2_range_deg")
MODEL_KEYS = ("variant", "l0_sign", "a2_root")
STIFFNESS_KEYS = ("label", "athena1", "athena2")

VARIANTS = ("literal", "symmetrized")
A2_ROOTS = ("nearest", "other")

DEFAULT_CONFIG = "default_config.json"


@dataclass(frozen=True)
class GeometryParams:
    """Link lengths and frame offsets shared by ATHENA-1 and ATHENA-2.

    ``l0`` is the offset of the ATHENA-2 ``t1``/``t3`` intermediates. When it
    is not given it is bound to ``l01``.
    """

    l1: float
    l2: float
    l3: float
    l4: float
    l5: float
    l2min: float
    l2max: float
    l_tool: float
    l01: float
    l02: float
    l03: float
    l0: float | None = None

    def __post_init__(self):
        if self.l0 is None:
            object.__setattr__(self, "l0", self.l01)


@dataclass(frozen=True)
class JointLimits:
    q1_range: tuple[float, float]
    q2_range: tuple[float, float]
    q3_range_a1: tuple[float, float]  # open interval
    q3_range_a2: tuple[float, float]
    q4_range: tuple[float, float]
    lins_max: float = 250.0

    @classmethod
    def from_geometry(
        cls,
        geom: GeometryParams,
        q3_range_a2: tuple[float, float] = (-math.pi / 4, math.pi / 4),
        q4_range: tuple[float, float] = (-math.pi / 2, math.pi / 2),
        lins_max: float = 250.0,
    ) -> "JointLimits":
        return cls(
            q1_range=(0.0, geom.l1),
            q2_range=(0.0, 2.0 * geom.l1),
            q3_range_a1=(geom.l2min, geom.l2max),
            q3_range_a2=tuple(q3_range_a2),
            q4_range=tuple(q4_range),
            lins_max=lins_max,
        )


@dataclass(frozen=True)
class KinematicsOptions:
    """Switches for the readings the equations leave open.

    variant: ``literal`` uses the chain coordinate ``q2 - q1/2`` in f2 and
        the ATHENA-1 f3; ``symmetrized`` uses the half-difference ``(q2 - q1)/2``.
    l0_sign: +1 evaluates ``Xp + l0`` in the ATHENA-2 intermediates, -1
        evaluates ``Xp - l0``.
    a2_root: which in-range q3 root of the crank closure to keep when there are several.
    """

    variant: str = "literal"
    l0_sign: int = 1
    a2_root: str = "nearest"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}", "variant", "variant in {literal, symmetrized}")
        if self.l0_sign not in (1, -1):
            raise ConfigError("l0_sign must be +1 or -1", "l0_sign", "l0_sign in {+1, -1}")
        if self.a2_root not in A2_ROOTS:
            raise ConfigError(f"a2_root must be one of {A2_ROOTS}", "a2_root", "a2_root in {nearest, other}")


@dataclass(frozen=True)
class Config:
    geometry: GeometryParams
    limits: JointLimits
    options: KinematicsOptions = field(default_factory=KinematicsOptions)
    joint_stiffness: dict = field(default_factory=dict)
    stiffness_label: str = "illustrative"


def validate(geom: GeometryParams, limits: JointLimits) -> None:
    """Raise :class:`ConfigError` naming the first violated invariant."""
    for key in GEOMETRY_KEYS:
        value = getattr(geom, key)
        if not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"geometry.{key} must be a finite number", key, "finite")
    for key in POSITIVE_KEYS:
        if getattr(geom, key) <= 0:
            raise ConfigError(f"geometry.{key} must be > 0 (got {getattr(geom, key)})", key, f"{key} > 0")
    if not geom.l2min < geom.l2max:
        raise ConfigError(
            f"constraint l2min < l2max violated (l2min={geom.l2min}, l2max={geom.l2max})",
            "l2min",
            "l2min < l2max",
        )
    if not limits.lins_max > 0:
        raise ConfigError("limits.lins_max_mm must be > 0", "lins_max_mm", "lins_max > 0")
    if not geom.l_tool > limits.lins_max:
        raise ConfigError(
            f"constraint l_tool > lins_max violated (l_tool={geom.l_tool}, lins_max={limits.lins_max})",
            "l_tool",
            "l_tool > lins_max",
        )
    for name in ("q1_range", "q2_range", "q3_range_a1", "q3_range_a2", "q4_range"):
        lo, hi = getattr(limits, name)
        if not lo < hi:
            raise ConfigError(f"limits.{name} is empty ({lo}, {hi})", name, "lower < upper")
    if limits.q1_range[0] != 0 or limits.q2_range[0] != 0:
        raise ConfigError("q1/q2 ranges must start at 0", "q1_range", "lower bound = 0")


def _number(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}", key, "number")
    return float(value)


def _interval_deg(key: str, value) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"limits.{key} must be a [lower, upper] pair", key, "pair")
    lo, hi = (_number("limits", key, v) for v in value)
    return math.radians(lo), math.radians(hi)


def _check_keys(section: str, data: dict, allowed, strict: bool) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"'{section}' must be an object", section, "object")
    if strict:
        unknown = sorted(set(data) - set(allowed))
        if unknown:
            raise ConfigError(f"unknown key(s) in '{section}': {', '.join(unknown)}", unknown[0], "known key")


def parse_config(text: str, strict: bool = True) -> Config:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed configuration document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration document must be a JSON object")
    _check_keys("<root>", doc, ("geometry", "limits", "model", "stiffness"), strict)
    if "geometry" not in doc:
        raise ConfigError("missing required section 'geometry'", "geometry", "required")

    g = doc["geometry"]
    _check_keys("geometry", g, GEOMETRY_KEYS, strict)
    values = {}
    for key in GEOMETRY_KEYS:
        if key not in g:
            if key == "l0":
                continue
            raise ConfigError(f"missing required field geometry.{key}", key, "required")
        values[key] = _number("geometry", key, g[key])
    geom = GeometryParams(**values)

    lim = doc.get("limits", {})
    _check_keys("limits", lim, LIMIT_KEYS, strict)
    kwargs = {}
    if "q4_range_deg" in lim:
        kwargs["q4_range"] = _interval_deg("q4_range_deg", lim["q4_range_deg"])
    if "q3a2_range_deg" in lim:
        kwargs["q3_range_a2"] = _interval_deg("q3a2_range_deg", lim["q3a2_range_deg"])
    if "lins_max_mm" in lim:
        kwargs["lins_max"] = _number("limits", "lins_max_mm", lim["lins_max_mm"])
    limits = JointLimits.from_geometry(geom, **kwargs)
    validate(geom, limits)

    model = doc.get("model", {})
    _check_keys("model", model, MODEL_KEYS, strict)
    options = KinematicsOptions(**{k: model[k] for k in MODEL_KEYS if k in model})

    stiff = doc.get("stiffness", {})
    _check_keys("stiffness", stiff, STIFFNESS_KEYS, strict)
    joint_stiffness = {}
    for arch in ("athena1", "athena2"):
        if arch in stiff:
            ks = stiff[arch]
            if not isinstance(ks, list) or len(ks) != 3:
                raise ConfigError(f"stiffness.{arch} must list three joint stiffnesses", arch, "length 3")
            joint_stiffness[arch] = tuple(_number("stiffness", arch, k) for k in ks)
            if min(joint_stiffness[arch]) <= 0:
                raise ConfigError(f"stiffness.{arch} values must be > 0", arch, "k > 0")
    return Config(geom, limits, options, joint_stiffness, str(stiff.get("label", "illustrative")))


def load_config(text: str, strict: bool = True) -> tuple[GeometryParams, JointLimits]:
    cfg = parse_config(text, strict=strict)
    return cfg.geometry, cfg.limits


def read_config_file(path, strict: bool = True) -> Config:
    return parse_config(Path(path).read_text(encoding="utf-8"), strict=strict)


def default_config_text() -> str:
    return resources.files("athena_kin.data").joinpath(DEFAULT_CONFIG).read_text(encoding="utf-8")


def default_config() -> Config:
    return parse_config(default_config_text())


def default_geometry() -> tuple[GeometryParams, JointLimits]:
    """The repository default parameter set (engineering values chosen for this package)."""
    cfg = default_config()
    return cfg.geometry, cfg.limits


def serialize(geom: GeometryParams, limits: JointLimits | None = None, options: KinematicsOptions | None = None) -> str:
    """Render a configuration document that :func:`parse_config` reads back."""
    doc = {"geometry": {k: float(v) for k, v in asdict(geom).items()}}
    if limits is not None:
        doc["limits"] = {
            "q4_range_deg": [math.degrees(v) for v in limits.q4_range],
            "lins_max_mm": float(limits.lins_max),
            "q3a2_range_deg": [math.degrees(v) for v in limits.q3_range_a2],
        }
    if options is not None:
        doc["model"] = asdict(options)
    return json.dumps(doc, indent=2) + "\n"
