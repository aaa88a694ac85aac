"""Cartesian grid sweep of the reachable workspace.

Grid points are generated from integer indices (``lo + i * step``), x outer,
y middle, z inner. Each x index is one unit of work: the whole y-z slice is
classified with the vectorised IK solvers, so a sweep is ``nx`` independent
tasks whose results are concatenated in index order. That makes the output
identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .athena1 import solve_a1_arrays
from .athena2 import solve_a2_arrays
from .common import REASON_INDEX, REASONS, Arch, JointVector, Reason
from .config import GeometryParams, JointLimits, KinematicsOptions
from .errors import ConfigError, ExportFormatError, GridMismatchError
from .rcm import TipPoint

FRAMES = ("rcm", "base")
STORE_MODES = ("valid", "all", "none")
EXPORT_FORMATS = ("csv", "ply", "json")
CSV_HEADER = ("x_mm", "y_mm", "z_mm", "arch", "valid", "reason", "q1", "q2", "q3", "q4")

# Slack on span/step before flooring, so 300/2 stays 150 under rounding.
_COUNT_SLACK = 1e-9


@dataclass(frozen=True)
class GridSpec:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    z_range: tuple[float, float]
    increment: float

    def __post_init__(self):
        if not (math.isfinite(self.increment) and self.increment > 0):
            raise ConfigError(f"grid increment must be > 0 (got {self.increment})", "increment", "increment > 0")
        for name in ("x_range", "y_range", "z_range"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ConfigError(f"{name} must be a nonempty interval (got [{lo}, {hi}])", name, "lower <= upper")
            object.__setattr__(self, name, (float(lo), float(hi)))
        object.__setattr__(self, "increment", float(self.increment))

    @classmethod
    def default(cls) -> "GridSpec":
        """X in [0, 300], Y in [-500, 500], Z in [-350, 0] mm at 2 mm."""
        return cls((0.0, 300.0), (-500.0, 500.0), (-350.0, 0.0), 2.0)

    def _count(self, rng) -> int:
        return math.floor((rng[1] - rng[0]) / self.increment + _COUNT_SLACK) + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return self._count(self.x_range), self._count(self.y_range), self._count(self.z_range)

    @property
    def total(self) -> int:
        nx, ny, nz = self.shape
        return nx * ny * nz

    def axis(self, name: str) -> np.ndarray:
        rng = getattr(self, f"{name}_range")
        return rng[0] + np.arange(self._count(rng)) * self.increment

    def to_dict(self) -> dict:
        return {
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "z_range": list(self.z_range),
            "increment": self.increment,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        return cls(tuple(data["x_range"]), tuple(data["y_range"]), tuple(data["z_range"]), data["increment"])


def enumerate_grid(spec: GridSpec) -> Iterator[TipPoint]:
    """Lazily yield every grid point, x outer, then y, then z inner."""
    xs, ys, zs = spec.axis("x"), spec.axis("y"), spec.axis("z")
    for x in xs:
        for y in ys:
            for z in zs:
                yield TipPoint(float(x), float(y), float(z))


def grid_slices(spec: GridSpec) -> Iterator[tuple[int, np.ndarray, np.ndarray, np.ndarray]]:
    """Yield ``(i, x, y, z)`` flat arrays for each x index, in enumeration order."""
    ys, zs = spec.axis("y"), spec.axis("z")
    yy, zz = (a.ravel() for a in np.meshgrid(ys, zs, indexing="ij"))
    for i, x in enumerate(spec.axis("x")):
        yield i, np.full(yy.shape, x), yy, zz


@dataclass(frozen=True)
class ValidityRecord:
    tip: TipPoint
    arch: Arch
    valid: bool
    reason: Reason
    joints: JointVector | None = None

    def __post_init__(self):
        if self.valid != (self.reason is Reason.OK) or self.valid != (self.joints is not None):
            raise ValueError("valid, reason == OK and joints present must agree")


@dataclass
class PointTable:
    """Columnar storage for classified points (tip in the RCM frame)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    reason: np.ndarray
    q: np.ndarray  # shape (n, 4); NaN rows for invalid points

    @classmethod
    def empty(cls) -> "PointTable":
        z = np.empty(0)
        return cls(z, z.copy(), z.copy(), np.empty(0, dtype=np.int8), np.empty((0, 4)))

    @classmethod
    def concat(cls, parts) -> "PointTable":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(
            np.concatenate([p.x for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.z for p in parts]),
            np.concatenate([p.reason for p in parts]),
            np.concatenate([p.q for p in parts]),
        )

    def __len__(self) -> int:
        return self.x.size

    @property
    def valid(self) -> np.ndarray:
        return self.reason == REASON_INDEX[Reason.OK]

    def subset(self, mask) -> "PointTable":
        return PointTable(self.x[mask], self.y[mask], self.z[mask], self.reason[mask], self.q[mask])


@dataclass
class WorkspaceResult:
    arch: Arch
    grid: GridSpec | None
    total_candidates: int
    valid_count: int
    reason_histogram: dict
    points: PointTable = field(default_factory=PointTable.empty)
    stored: str = "valid"
    frame: str = "rcm"

    def records(self) -> Iterator[ValidityRecord]:
        p = self.points
        for i in range(len(p)):
            reason = REASONS[int(p.reason[i])]
            ok = reason is Reason.OK
            joints = JointVector(*map(float, p.q[i]), self.arch) if ok else None
            yield ValidityRecord(TipPoint(float(p.x[i]), float(p.y[i]), float(p.z[i])), self.arch, ok, reason, joints)

    def check(self) -> None:
        non_ok = sum(v for k, v in self.reason_histogram.items() if k != Reason.OK.value)
        if self.valid_count + non_ok != self.total_candidates:
            raise ValueError("histogram does not add up to the candidate count")


def _empty_histogram() -> dict:
    return {r.value: 0 for r in REASONS}


def classify_arrays(
    x,
    y,
    z,
    arch: Arch,
    geom: GeometryParams,
    limits: JointLimits,
    options: KinematicsOptions | None = None,
    branch: int = 1,
):
    """Reason codes and joint values for tip arrays, with phi = 0.

    Precedence follows ``Reason``: DEGENERATE_TIP, INSERTION_LIMIT,
    NO_REAL_SOLUTION, then Q1..Q4 limits.
    """
    arch = Arch(arch)
    x, y, z = (np.asarray(v, dtype=float) for v in (x, y, z))
    solve = solve_a1_arrays if arch is Arch.ATHENA1 else solve_a2_arrays
    sol = solve(x, y, z, 0.0, geom, limits, options, branch)
    r = np.sqrt(x * x + y * y + z * z)
    l_ins = geom.l_tool - r
    reason = np.asarray(sol.reason, dtype=np.int8)
    reason = np.where((l_ins < 0) | (l_ins >= limits.lins_max), REASON_INDEX[Reason.INSERTION_LIMIT], reason)
    reason = np.where(r == 0, REASON_INDEX[Reason.DEGENERATE_TIP], reason).astype(np.int8)
    q = np.column_stack([sol.q1, sol.q2, sol.q3, sol.q4])
    q[reason != REASON_INDEX[Reason.OK]] = np.nan
    return reason, q


def classify_point(
    tip: TipPoint,
    arch: Arch,
    geom: GeometryParams,
    limits: JointLimits,
    options: KinematicsOptions | None = None,
    branch: int = 1,
) -> ValidityRecord:
    reason, q = classify_arrays([tip.xp], [tip.yp], [tip.zp], arch, geom, limits, options, branch)
    code = REASONS[int(reason[0])]
    joints = JointVector(*map(float, q[0]), Arch(arch)) if code is Reason.OK else None
    return ValidityRecord(tip, Arch(arch), code is Reason.OK, code, joints)


def _frame_offset(geom: GeometryParams, frame: str) -> np.ndarray:
    if frame not in FRAMES:
        raise ConfigError(f"frame must be one of {FRAMES}", "frame", "frame in {rcm, base}")
    # Base-frame grid coordinates are measured from (l01, l02, l03) in the RCM frame.
    return np.zeros(3) if frame == "rcm" else np.array([geom.l01, geom.l02, geom.l03])


def _sweep_slice(task):
    i, arch, spec, geom, limits, options, branch, store, frame = task
    ys, zs = spec.axis("y"), spec.axis("z")
    yy, zz = (a.ravel() for a in np.meshgrid(ys, zs, indexing="ij"))
    off = _frame_offset(geom, frame)
    x = np.full(yy.shape, spec.axis("x")[i]) + off[0]
    y, z = yy + off[1], zz + off[2]
    reason, q = classify_arrays(x, y, z, arch, geom, limits, options, branch)
    hist = np.bincount(reason, minlength=len(REASONS))
    if store == "none":
        return hist, None
    keep = slice(None) if store == "all" else reason == REASON_INDEX[Reason.OK]
    return hist, PointTable(x[keep], y[keep], z[keep], reason[keep], q[keep])


def sweep(
    arch: Arch,
    spec: GridSpec,
    geom: GeometryParams,
    limits: JointLimits,
    options: KinematicsOptions | None = None,
    branch: int = 1,
    workers: int = 1,
    store: str = "valid",
    frame: str = "rcm",
) -> WorkspaceResult:
    """Classify every grid point.

    ``store`` keeps the valid points (default), every record, or nothing
    beyond the histogram. Stored tip coordinates are always RCM-frame values.
    """
    if store not in STORE_MODES:
        raise ConfigError(f"store must be one of {STORE_MODES}", "store", "store mode")
    if workers < 1:
        raise ConfigError("workers must be >= 1", "workers", "workers >= 1")
    arch = Arch(arch)
    _frame_offset(geom, frame)
    nx = spec.shape[0]
    tasks = [(i, arch, spec, geom, limits, options, branch, store, frame) for i in range(nx)]
    if workers == 1:
        parts = list(map(_sweep_slice, tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sweep_slice, tasks, chunksize=max(1, nx // (4 * workers))))
    hist = np.zeros(len(REASONS), dtype=np.int64)
    for h, _ in parts:
        hist += h
    points = PointTable.concat(p for _, p in parts if p is not None)
    histogram = {r.value: int(hist[i]) for i, r in enumerate(REASONS)}
    return WorkspaceResult(
        arch=arch,
        grid=spec,
        total_candidates=int(hist.sum()),
        valid_count=histogram[Reason.OK.value],
        reason_histogram=histogram,
        points=points,
        stored=store,
        frame=frame,
    )


def synthetic_result(arch: Arch, spec: GridSpec, valid_count: int, total_candidates: int | None = None) -> WorkspaceResult:
    """A point-free result carrying only counts (for comparing external figures)."""
    total = spec.total if total_candidates is None else int(total_candidates)
    if not 0 <= valid_count <= total:
        raise ValueError("valid_count must lie in [0, total_candidates]")
    hist = _empty_histogram()
    hist[Reason.OK.value] = int(valid_count)
    hist[Reason.NO_REAL_SOLUTION.value] = total - int(valid_count)
    return WorkspaceResult(Arch(arch), spec, total, int(valid_count), hist, stored="none")


@dataclass(frozen=True)
class ComparisonReport:
    arch_a: str
    arch_b: str
    count_a: int
    count_b: int
    ratio_percent: float  # (b / a - 1) * 100; NaN when a is empty
    volume_a_mm3: float
    volume_b_mm3: float
    histogram_a: dict
    histogram_b: dict
    increment: float

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["ratio_percent"] = None if math.isnan(self.ratio_percent) else self.ratio_percent
        return out

    def format_text(self) -> str:
        ratio = "n/a" if math.isnan(self.ratio_percent) else f"{self.ratio_percent:+.2f}%"
        lines = [
            f"{'arch':<10}{'valid':>12}{'volume_cm3':>14}",
            f"{self.arch_a:<10}{self.count_a:>12d}{self.volume_a_mm3 / 1000:>14.3f}",
            f"{self.arch_b:<10}{self.count_b:>12d}{self.volume_b_mm3 / 1000:>14.3f}",
            f"difference ({self.arch_b} vs {self.arch_a}): {ratio}",
            "",
            f"{'reason':<18}{self.arch_a:>12}{self.arch_b:>12}",
        ]
        for r in REASONS:
            lines.append(f"{r.value:<18}{self.histogram_a.get(r.value, 0):>12d}{self.histogram_b.get(r.value, 0):>12d}")
        return "\n".join(lines)


def compare(a: WorkspaceResult, b: WorkspaceResult) -> ComparisonReport:
    if a.grid != b.grid:
        raise GridMismatchError(f"grids differ: {a.grid} vs {b.grid}")
    inc3 = a.grid.increment ** 3 if a.grid is not None else math.nan
    ratio = (b.valid_count / a.valid_count - 1.0) * 100.0 if a.valid_count else math.nan
    return ComparisonReport(
        arch_a=Arch(a.arch).value,
        arch_b=Arch(b.arch).value,
        count_a=a.valid_count,
        count_b=b.valid_count,
        ratio_percent=ratio,
        volume_a_mm3=a.valid_count * inc3,
        volume_b_mm3=b.valid_count * inc3,
        histogram_a=dict(a.reason_histogram),
        histogram_b=dict(b.reason_histogram),
        increment=a.grid.increment if a.grid is not None else math.nan,
    )


# --- export / import -------------------------------------------------------


def _f6(v: float) -> str:
    return "" if math.isnan(v) else f"{v:.6f}"


def _csv_text(result: WorkspaceResult) -> str:
    p = result.points
    arch = Arch(result.arch).value
    lines = [",".join(CSV_HEADER)]
    for i in range(len(p)):
        code = REASONS[int(p.reason[i])]
        ok = code is Reason.OK
        qs = [_f6(float(v)) for v in p.q[i]] if ok else ["", "", "", ""]
        lines.append(
            f"{p.x[i]:.6f},{p.y[i]:.6f},{p.z[i]:.6f},{arch},{int(ok)},{code.value}," + ",".join(qs)
        )
    return "\n".join(lines) + "\n"


def _ply_text(result: WorkspaceResult) -> str:
    p = result.points.subset(result.points.valid)
    head = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(p)}",
        "property float x",
        "property float y",
        "property float z",
        "end_header",
    ]
    rows = [f"{p.x[i]:.6f} {p.y[i]:.6f} {p.z[i]:.6f}" for i in range(len(p))]
    return "\n".join(head + rows) + "\n"


def result_to_dict(result: WorkspaceResult, include_points: bool = False) -> dict:
    doc = {
        "spec": result.grid.to_dict() if result.grid is not None else None,
        "arch": Arch(result.arch).value,
        "valid_count": result.valid_count,
        "total_candidates": result.total_candidates,
        "reason_histogram": dict(result.reason_histogram),
        "frame": result.frame,
    }
    if include_points:
        p = result.points.subset(result.points.valid)
        doc["points"] = [[float(p.x[i]), float(p.y[i]), float(p.z[i])] for i in range(len(p))]
    return doc


def export(result: WorkspaceResult, fmt: str, destination, include_points: bool = False) -> None:
    """Write ``result`` as CSV, PLY or JSON to a path or a text stream."""
    fmt = fmt.lower()
    if fmt == "csv":
        text = _csv_text(result)
    elif fmt == "ply":
        text = _ply_text(result)
    elif fmt == "json":
        text = json.dumps(result_to_dict(result, include_points), indent=2) + "\n"
    else:
        raise ExportFormatError(f"unsupported export format {fmt!r}; expected one of {EXPORT_FORMATS}")
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def read_csv(source, grid: GridSpec | None = None) -> WorkspaceResult:
    """Rebuild a result from an exported CSV (path or text stream).

    Counts cover the rows present; with a valid-only export that is the
    valid set, and ``total_candidates`` equals the row count.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = Path(source).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_HEADER:
        raise ValueError(f"unexpected CSV header: {header}")
    rows = list(reader)
    arch = Arch(rows[0][3]) if rows else Arch.ATHENA1
    n = len(rows)
    xyz = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows]).reshape(n, 3)
    reason = np.array([REASON_INDEX[Reason(r[5])] for r in rows], dtype=np.int8)
    q = np.array([[float(v) if v else math.nan for v in r[6:10]] for r in rows]).reshape(n, 4)
    hist = _empty_histogram()
    for code, count in zip(*np.unique(reason, return_counts=True)):
        hist[REASONS[int(code)].value] = int(count)
    points = PointTable(xyz[:, 0], xyz[:, 1], xyz[:, 2], reason, q)
    stored = "valid" if np.all(points.valid) else "all"
    return WorkspaceResult(arch, grid, n, hist[Reason.OK.value], hist, points, stored)


def load_result_json(source) -> WorkspaceResult:
    """Counts-only result from a JSON export (points, if present, are kept)."""
    if hasattr(source, "read"):
        doc = json.load(source)
    else:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    hist = _empty_histogram()
    hist.update({k: int(v) for k, v in doc["reason_histogram"].items()})
    grid = GridSpec.from_dict(doc["spec"]) if doc.get("spec") else None
    points = PointTable.empty()
    if doc.get("points"):
        xyz = np.asarray(doc["points"], dtype=float)
        n = xyz.shape[0]
        points = PointTable(
            xyz[:, 0], xyz[:, 1], xyz[:, 2], np.zeros(n, dtype=np.int8), np.full((n, 4), math.nan)
        )
    return WorkspaceResult(
        Arch(doc["arch"]),
        grid,
        int(doc["total_candidates"]),
        int(doc["valid_count"]),
        hist,
        points,
        stored="valid" if len(points) else "none",
        frame=doc.get("frame", "rcm"),
    )


def write_plot_data(result: WorkspaceResult, directory, axis: str = "y") -> list[Path]:
    """One CSV of valid x,y,z points per grid slice along ``axis``.

    Files are named ``<arch>_<axis><value>.csv``; slices without valid
    points are skipped. Returns the paths written.
    """
    if axis not in ("x", "y", "z"):
        raise ValueError("axis must be x, y or z")
    out_dir = Path(directory)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = result.points.subset(result.points.valid)
    values = getattr(p, axis)
    arch = Arch(result.arch).value
    written = []
    for v in np.unique(values):
        sel = values == v
        path = out_dir / f"{arch}_{axis}{v:+.3f}.csv"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x_mm,y_mm,z_mm\n")
            for x, y, z in zip(p.x[sel], p.y[sel], p.z[sel]):
                fh.write(f"{x:.6f},{y:.6f},{z:.6f}\n")
        written.append(path)
    return written
