"""Dataset ingestion and the full-grid benchmark runner.

A dataset subset is a directory of six images (img1..img6) plus five
ground-truth homography files (H1to2p..H1to6p) mapping image-1 coordinates
into image k.  The benchmark detects and describes each image once, then
sweeps the (metric x method x threshold) grid per image pair, recording one
result row per grid cell.  Failed cells become rows, never crashes.

results.csv is byte-identical across runs with the same config and seed;
wall-clock timings therefore go to a separate timings.csv.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import charts
from .descriptor import CnnBackend, DescriptorSet, RawPatchBackend, describe_keypoints, read_descriptors
from .detector import DetectorParams, detect_keypoints
from .distance import KINDS as METRIC_KINDS
from .distance import Metric, distance_matrix
from .errors import (
    ConfigError,
    FeatregError,
    IoError,
    MissingFile,
    ParseError,
)
from .evaluation import EvalReport, evaluate_pair
from .geometry import Homography, RansacParams, parse_homography_file
from .imaging import Image, load_image, to_grayscale
from .matcher import METHODS, MatchParams, match
from .network import parse_network_config

IMAGES_PER_SUBSET = 6
_DEFAULT_IMAGE_PATTERNS = ("img{k}.ppm", "img{k}.pgm")


@dataclass(frozen=True)
class DatasetSubset:
    name: str
    images: tuple[Image, ...]  # img1..img6
    homographies: tuple[Homography, ...]  # 1->2 .. 1->6

    def __post_init__(self):
        if len(self.images) != IMAGES_PER_SUBSET:
            raise ValueError(f"expected {IMAGES_PER_SUBSET} images, got {len(self.images)}")
        if len(self.homographies) != IMAGES_PER_SUBSET - 1:
            raise ValueError("expected 5 ground-truth homographies")


def load_subset(directory: str | Path, image_pattern: str | None = None) -> DatasetSubset:
    """Load img1..img6 and H1to2p..H1to6p from one subset directory."""
    directory = Path(directory)
    images = []
    for k in range(1, IMAGES_PER_SUBSET + 1):
        patterns = (image_pattern,) if image_pattern else _DEFAULT_IMAGE_PATTERNS
        path = next(
            (directory / p.format(k=k) for p in patterns if (directory / p.format(k=k)).exists()),
            None,
        )
        if path is None:
            raise MissingFile(f"{directory}: no image for index {k} "
                              f"(tried {', '.join(p.format(k=k) for p in patterns)})")
        try:
            images.append(load_image(path.read_bytes()))
        except FeatregError as exc:
            raise type(exc)(f"{path}: {exc}") from exc
    homographies = []
    for k in range(2, IMAGES_PER_SUBSET + 1):
        path = directory / f"H1to{k}p"
        if not path.exists():
            raise MissingFile(f"H1to{k}p")
        try:
            homographies.append(parse_homography_file(path.read_bytes()))
        except FeatregError as exc:
            raise type(exc)(f"{path}: {exc}") from exc
    return DatasetSubset(directory.name, tuple(images), tuple(homographies))


@dataclass(frozen=True)
class BackendSpec:
    kind: str = "raw"  # raw | cnn | import
    side: int = 32  # raw: patch resample side
    config_path: str = ""  # cnn: network config file
    weights_path: str = ""  # cnn: weights blob
    tap: str = "fc6"  # cnn: descriptor layer
    import_dir: str = ""  # import: directory of KPD1 files

    def __post_init__(self):
        if self.kind not in ("raw", "cnn", "import"):
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if self.kind == "raw" and self.side < 1:
            raise ConfigError("raw backend side must be >= 1")
        if self.kind == "cnn":
            if not self.config_path or not self.weights_path:
                raise ConfigError("cnn backend needs config_path and weights_path")
            if self.tap not in ("fc6", "fc7"):
                raise ConfigError("cnn tap must be fc6 or fc7")
        if self.kind == "import" and not self.import_dir:
            raise ConfigError("import backend needs import_dir")


@dataclass(frozen=True)
class RunConfig:
    dataset_root: str
    subsets: tuple[str, ...]
    output_dir: str
    detector: DetectorParams = DetectorParams()
    backend: BackendSpec = BackendSpec()
    window: int = 64
    normalize: bool = True
    metrics: tuple[str, ...] = METRIC_KINDS
    minkowski_r: float = 3.0
    methods: tuple[str, ...] = METHODS
    nn_thresholds: tuple[float, ...] = (0.3, 0.5, 0.7)
    nnr_thresholds: tuple[float, ...] = (1.1, 1.2, 1.3)
    ransac: RansacParams = RansacParams()
    image_pattern: str | None = None
    chart_method: str = "nnr1"
    chart_threshold: float = 1.1

    def thresholds_for(self, method: str) -> tuple[float, ...]:
        return self.nn_thresholds if method in ("nn1", "nn2") else self.nnr_thresholds

    def validate(self):
        if not self.subsets:
            raise ConfigError("subsets filter is empty")
        root = Path(self.dataset_root)
        if not root.is_dir():
            raise ConfigError(f"dataset_root {root} is not a directory")
        for name in self.subsets:
            if not (root / name).is_dir():
                raise ConfigError(f"subset directory missing: {root / name}")
        if not self.metrics or not self.methods:
            raise ConfigError("metric and method grids must be non-empty")
        for m in self.metrics:
            if m not in METRIC_KINDS:
                raise ConfigError(f"unknown metric {m!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        for method in self.methods:
            if not self.thresholds_for(method):
                raise ConfigError(f"no thresholds configured for {method}")
            for t in self.thresholds_for(method):
                try:
                    MatchParams(method, t)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.backend.kind == "cnn":
            for p in (self.backend.config_path, self.backend.weights_path):
                if not Path(p).is_file():
                    raise ConfigError(f"backend file missing: {p}")
        if self.backend.kind == "import" and not Path(self.backend.import_dir).is_dir():
            raise ConfigError(f"import_dir missing: {self.backend.import_dir}")


def _config_from_dict(data: dict, base: Path) -> RunConfig:
    def build(cls, payload: dict, what: str):
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")
        try:
            return cls(**payload)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {what}: {exc}") from exc

    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for required in ("dataset_root", "subsets", "output_dir"):
        if required not in data:
            raise ConfigError(f"missing required config key {required!r}")

    kwargs = dict(data)
    kwargs["dataset_root"] = str(base / data["dataset_root"])
    kwargs["output_dir"] = str(base / data["output_dir"])
    kwargs["subsets"] = tuple(data["subsets"])
    if "detector" in data:
        kwargs["detector"] = build(DetectorParams, data["detector"], "detector params")
    if "backend" in data:
        backend = dict(data["backend"])
        for key in ("config_path", "weights_path", "import_dir"):
            if backend.get(key):
                backend[key] = str(base / backend[key])
        kwargs["backend"] = build(BackendSpec, backend, "backend spec")
    if "ransac" in data:
        kwargs["ransac"] = build(RansacParams, data["ransac"], "ransac params")
    for key in ("metrics", "methods", "nn_thresholds", "nnr_thresholds"):
        if key in data:
            kwargs[key] = tuple(data[key])
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_run_config(text: str, base_dir: str | Path = ".") -> RunConfig:
    """Parse the JSON run-config schema; unknown keys are errors.

    Relative paths are resolved against base_dir (normally the config file's
    directory).
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return _config_from_dict(data, Path(base_dir))


# --- result rows and CSV -------------------------------------------------------

_NUMERIC = {"threshold": float, "pair": int, "n_keypoints_a": int, "n_keypoints_b": int,
            "n_matches": int, "tp": int}
_OPTIONAL_FLOAT = ("ke_gh", "ke_ch", "inlier_ratio")
RESULT_COLUMNS = (
    "subset", "pair", "backend", "tap", "metric", "method", "threshold",
    "n_keypoints_a", "n_keypoints_b", "n_matches", "tp",
    "ke_gh", "ke_ch", "inlier_ratio", "ransac_failed",
)
TIME_COLUMNS = ("detect_ms", "describe_ms", "distance_ms", "match_ms", "eval_ms")


@dataclass(frozen=True)
class StageTimes:
    detect_ms: float = 0.0
    describe_ms: float = 0.0
    distance_ms: float = 0.0
    match_ms: float = 0.0
    eval_ms: float = 0.0


@dataclass(frozen=True)
class ResultRow:
    subset: str
    pair: int
    backend: str
    tap: str
    metric: str
    method: str
    threshold: float
    n_keypoints_a: int
    n_keypoints_b: int
    n_matches: int
    tp: int
    ke_gh: float | None
    ke_ch: float | None
    inlier_ratio: float | None
    ransac_failed: bool
    times: StageTimes = field(default=StageTimes(), compare=False)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_results_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow([_cell(getattr(row, col)) for col in RESULT_COLUMNS])
    return buf.getvalue()


def read_results_csv(text: str) -> list[ResultRow]:
    """Inverse of format_results_csv (timings are not part of results.csv)."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty results csv") from None
    if tuple(header) != RESULT_COLUMNS:
        raise ParseError(f"unexpected results.csv header: {header}")
    rows = []
    for record in reader:
        if not record:
            continue
        if len(record) != len(RESULT_COLUMNS):
            raise ParseError(f"row has {len(record)} fields, expected {len(RESULT_COLUMNS)}")
        data = dict(zip(RESULT_COLUMNS, record))
        kwargs = {}
        for key, value in data.items():
            if key in _NUMERIC:
                kwargs[key] = _NUMERIC[key](value)
            elif key in _OPTIONAL_FLOAT:
                kwargs[key] = float(value) if value else None
            elif key == "ransac_failed":
                kwargs[key] = value == "true"
            else:
                kwargs[key] = value
        rows.append(ResultRow(**kwargs))
    return rows


# --- benchmark runner -----------------------------------------------------------

def _failed_report() -> EvalReport:
    return EvalReport(n_matches=0, ke_gh=None, tp=0, ke_ch=None,
                      inlier_ratio=None, ransac_failed=True)


class _PairDescriptors:
    """Per-image keypoints+descriptors with the time it took to get them."""

    def __init__(self, ds: DescriptorSet, detect_ms: float, describe_ms: float):
        self.ds = ds
        self.detect_ms = detect_ms
        self.describe_ms = describe_ms


def _make_backend(spec: BackendSpec):
    if spec.kind == "raw":
        return RawPatchBackend(spec.side)
    if spec.kind == "cnn":
        cfg = parse_network_config(Path(spec.config_path).read_text())
        if cfg.tap != spec.tap:
            cfg = replace(cfg, tap=spec.tap)
        return CnnBackend(cfg, Path(spec.weights_path).read_bytes())
    return None  # import backend reads files instead of computing


def _describe_image(config: RunConfig, backend, subset: str, index: int,
                    img: Image) -> _PairDescriptors:
    if config.backend.kind == "import":
        path = Path(config.backend.import_dir) / subset / f"img{index}.kpd"
        if not path.exists():
            raise MissingFile(str(path))
        t0 = time.perf_counter()
        ds = read_descriptors(path.read_bytes())
        return _PairDescriptors(ds, 0.0, (time.perf_counter() - t0) * 1e3)
    t0 = time.perf_counter()
    kps = detect_keypoints(to_grayscale(img), config.detector)
    t1 = time.perf_counter()
    ds = describe_keypoints(
        img, kps, backend, window=config.window, normalize=config.normalize,
        base_sigma=config.detector.base_sigma,
    )
    t2 = time.perf_counter()
    return _PairDescriptors(ds, (t1 - t0) * 1e3, (t2 - t1) * 1e3)


def run_benchmark(config: RunConfig) -> list[ResultRow]:
    """Execute the full grid; one row per (subset, pair, metric, method, threshold).

    Per-cell failures (degenerate descriptors, too few matches for RANSAC,
    single-column ratio matching) are recorded in their rows; only
    configuration problems abort the run.
    """
    config.validate()
    backend = _make_backend(config.backend)
    tap = config.backend.tap if config.backend.kind == "cnn" else ""
    rows: list[ResultRow] = []

    for subset_name in config.subsets:
        subset = load_subset(Path(config.dataset_root) / subset_name, config.image_pattern)
        ref = _describe_image(config, backend, subset_name, 1, subset.images[0])
        for k in range(2, IMAGES_PER_SUBSET + 1):
            other = _describe_image(config, backend, subset_name, k, subset.images[k - 1])
            h_gt = subset.homographies[k - 2]
            for metric_kind in config.metrics:
                metric = Metric(metric_kind, r=config.minkowski_r)
                t0 = time.perf_counter()
                try:
                    dm = distance_matrix(ref.ds, other.ds, metric)
                except FeatregError:
                    dm = None
                distance_ms = (time.perf_counter() - t0) * 1e3
                for method in config.methods:
                    for threshold in config.thresholds_for(method):
                        t1 = time.perf_counter()
                        matches = None
                        if dm is not None:
                            try:
                                matches = match(dm, MatchParams(method, threshold))
                            except FeatregError:
                                matches = None
                        t2 = time.perf_counter()
                        if matches is None:
                            report = _failed_report()
                        else:
                            report = evaluate_pair(
                                matches, ref.ds.keypoints, other.ds.keypoints,
                                h_gt, config.ransac,
                            )
                        t3 = time.perf_counter()
                        rows.append(ResultRow(
                            subset=subset_name,
                            pair=k,
                            backend=config.backend.kind,
                            tap=tap,
                            metric=metric_kind,
                            method=method,
                            threshold=threshold,
                            n_keypoints_a=len(ref.ds),
                            n_keypoints_b=len(other.ds),
                            n_matches=report.n_matches,
                            tp=report.tp,
                            ke_gh=report.ke_gh,
                            ke_ch=report.ke_ch,
                            inlier_ratio=report.inlier_ratio,
                            ransac_failed=report.ransac_failed,
                            times=StageTimes(
                                detect_ms=ref.detect_ms + other.detect_ms,
                                describe_ms=ref.describe_ms + other.describe_ms,
                                distance_ms=distance_ms,
                                match_ms=(t2 - t1) * 1e3,
                                eval_ms=(t3 - t2) * 1e3,
                            ),
                        ))
    return rows


# --- report emission -------------------------------------------------------------

MEASURES = ("ke_gh", "tp", "ke_ch", "inlier_ratio")


def _chart_slice(rows: list[ResultRow], method: str, threshold: float):
    slice_rows = [r for r in rows if r.method == method and r.threshold == threshold]
    if slice_rows:
        return slice_rows, method, threshold
    first = rows[0]
    return (
        [r for r in rows if r.method == first.method and r.threshold == first.threshold],
        first.method,
        first.threshold,
    )


def emit_report(
    rows: list[ResultRow],
    out_dir: str | Path,
    chart_method: str = "nnr1",
    chart_threshold: float = 1.1,
) -> list[Path]:
    """Write results.csv, timings.csv, and one grouped-bar SVG per
    (subset, measure); returns the written paths."""
    if not rows:
        raise ValueError("no rows to report")
    out_dir = Path(out_dir)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)

        results_path = out_dir / "results.csv"
        results_path.write_text(format_results_csv(rows), newline="")
        written.append(results_path)

        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(("subset", "pair", "metric", "method", "threshold") + TIME_COLUMNS)
        for row in rows:
            writer.writerow(
                [row.subset, row.pair, row.metric, row.method, repr(row.threshold)]
                + [f"{getattr(row.times, col):.3f}" for col in TIME_COLUMNS]
            )
        timings_path = out_dir / "timings.csv"
        timings_path.write_text(buf.getvalue(), newline="")
        written.append(timings_path)

        chart_rows, used_method, used_threshold = _chart_slice(rows, chart_method, chart_threshold)
        subsets = sorted({r.subset for r in chart_rows})
        for subset in subsets:
            subset_rows = [r for r in chart_rows if r.subset == subset]
            pairs = sorted({r.pair for r in subset_rows})
            metrics = list(dict.fromkeys(r.metric for r in subset_rows))
            for measure in MEASURES:
                series = []
                for metric in metrics:
                    vals: list[float | None] = []
                    for pair in pairs:
                        cell = [r for r in subset_rows if r.metric == metric and r.pair == pair]
                        value = getattr(cell[0], measure) if cell else None
                        vals.append(float(value) if value is not None else None)
                    series.append((metric, vals))
                svg = charts.grouped_bar_svg(
                    f"{subset}: {measure} ({used_method} @ {used_threshold:g})",
                    [f"1→{p}" for p in pairs],
                    series,
                )
                path = out_dir / f"{subset}_{measure}.svg"
                path.write_text(svg)
                written.append(path)
    except OSError as exc:
        raise IoError(f"cannot write report: {exc}") from exc
    return written
