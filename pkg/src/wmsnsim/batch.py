"""Single runs, seed/sweep batches with CSV summaries, and golden-file comparison."""

from __future__ import annotations

import math
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean
from typing import Iterable, Sequence

from scipy import stats

from .config import ConfigError, RunConfig, expand_sweeps, parse_config
from .metrics import RunReport
from .scenario import RunResult, simulate

RESULT_FILE = "M3WSN-result.txt"
DEBUG_FILE = "M3WSN-Debug.txt"
CSV_FILE = "summary.csv"
CSV_SCHEMA = "# wmsnsim batch summary, schema v1"
METRICS = ("pdr", "dfr", "mean_delay", "jitter", "modal_hops", "redundancy_bytes")
CSV_COLUMNS = ("row", "point", "sweep", "seed", "n") + METRICS + tuple(m + "_ci95" for m in METRICS)
EMIT_KINDS = frozenset({"result", "debug", "rtrace"})
NA = "NA"


def rtrace_name(video_id: int) -> str:
    return f"rtrace-{video_id}.txt"


@dataclass
class BatchSpec:
    config_path: Path
    seeds: list[int]
    out_dir: Path
    emit: frozenset = frozenset()
    csv: bool = True
    jobs: int = 1

    def __post_init__(self):
        self.config_path = Path(self.config_path)
        self.out_dir = Path(self.out_dir)
        if not self.seeds:
            raise ValueError("a batch needs at least one seed")
        bad = set(self.emit) - EMIT_KINDS
        if bad:
            raise ValueError(f"unknown emit kinds {sorted(bad)}")

    @staticmethod
    def replicate(base_seed: int, count: int = 20) -> list[int]:
        """Seeds ``base_seed + i`` for ``i < count``."""
        if count < 1:
            raise ValueError("replication count must be >= 1")
        return [base_seed + i for i in range(count)]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from None
    return parse_config(text, str(path))


def parse_emit(text: str | None) -> frozenset:
    if not text:
        return frozenset()
    kinds = frozenset(k.strip() for k in text.split(",") if k.strip())
    bad = kinds - EMIT_KINDS
    if bad:
        raise ValueError(f"unknown emit kinds {sorted(bad)}; choose from {sorted(EMIT_KINDS)}")
    return kinds


def output_files(result: RunResult, emit: Iterable[str]) -> dict[str, str]:
    """File name to content for the requested outputs of one run."""
    emit = frozenset(emit)
    files = {}
    if "result" in emit:
        files[RESULT_FILE] = result.result_text
    if "debug" in emit:
        files[DEBUG_FILE] = result.debug_text
    if "rtrace" in emit:
        for vid, text in sorted(result.receiver_traces.items()):
            files[rtrace_name(vid)] = text
    return files


def _write_atomically(out_dir: Path, files: dict[str, str]) -> list[Path]:
    """Write all files or none: stage in a scratch dir, then move into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=out_dir))
    moved: list[Path] = []
    try:
        for name, text in files.items():
            (stage / name).parent.mkdir(parents=True, exist_ok=True)
            with open(stage / name, "w", newline="\n") as fh:
                fh.write(text)
        for name in files:
            target = out_dir / name
            target.parent.mkdir(parents=True, exist_ok=True)
            (stage / name).replace(target)
            moved.append(target)
    except BaseException:
        for p in moved:
            p.unlink(missing_ok=True)
        raise
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return moved


def run_single(config_path: str | Path, seed: int | None, out_dir: str | Path,
               emit: Iterable[str] = ("result", "debug", "rtrace")) -> RunResult:
    """One replication of a sweep-free config; outputs appear only on success."""
    config = load_config(config_path)
    if config.sweeps():
        raise ConfigError("config declares parameter sweeps; use the batch command", None, str(config_path))
    result = simulate(config, seed, Path(config_path).parent)
    _write_atomically(Path(out_dir), output_files(result, emit))
    return result


def run_metrics(report: RunReport) -> dict[str, float | None]:
    """Per-run CSV metrics; None where a metric is undefined (no sessions, no packets)."""
    has_sessions = report.total_frames > 0
    has_delays = any(s.delays for s in report.sessions)
    return {
        "pdr": report.pdr if report.offered else None,
        "dfr": report.dfr if has_sessions else None,
        "mean_delay": report.mean_delay if has_delays else None,
        "jitter": report.jitter if has_delays else None,
        "modal_hops": float(report.modal_hops) if has_sessions else None,
        "redundancy_bytes": float(report.redundancy_bytes),
    }


def t_half_width(values: Sequence[float], confidence: float = 0.95) -> float | None:
    """Student-t confidence half-width of the mean; None with fewer than two values."""
    n = len(values)
    if n < 2:
        return None
    m = mean(values)
    var = sum((v - m) ** 2 for v in values) / (n - 1)
    if var == 0.0:
        return 0.0
    return float(stats.t.ppf(0.5 + confidence / 2.0, n - 1)) * math.sqrt(var / n)


def _fmt(value) -> str:
    if value is None:
        return NA
    if isinstance(value, float):
        return repr(value)
    return str(value)


def point_label(point: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in point.items()) if point else "-"


@dataclass
class BatchResult:
    rows: list[dict] = field(default_factory=list)
    reports: dict[tuple[int, int], RunReport] = field(default_factory=dict)

    def csv_text(self) -> str:
        lines = [CSV_SCHEMA, ",".join(CSV_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_fmt(row.get(c)) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"


def _replicate(args) -> tuple[RunReport, dict[str, str]]:
    config, seed, base_dir, emit = args
    result = simulate(config, seed, base_dir)
    return result.report, output_files(result, emit)


def aggregate_row(point_index: int, label: str, per_seed: list[dict]) -> dict:
    row = {"row": "aggregate", "point": point_index, "sweep": label, "seed": None, "n": len(per_seed)}
    for m in METRICS:
        vals = [r[m] for r in per_seed if r[m] is not None]
        row[m] = mean(vals) if vals else None
        row[m + "_ci95"] = t_half_width(vals)
    return row


def run_batch(spec: BatchSpec) -> BatchResult:
    """Every sweep point times every seed, in (point, seed) order.

    A failing replication aborts the batch and leaves no summary behind.
    """
    base = load_config(spec.config_path)
    points = expand_sweeps(base)
    base_dir = spec.config_path.parent
    tasks = [(cfg, seed, base_dir, spec.emit) for cfg in points for seed in spec.seeds]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            outcomes = list(pool.map(_replicate, tasks))
    else:
        outcomes = [_replicate(t) for t in tasks]

    result = BatchResult()
    files: dict[str, str] = {}
    it = iter(outcomes)
    for pi, cfg in enumerate(points):
        label = point_label(cfg.sweep_point)
        per_seed = []
        for seed in spec.seeds:
            report, out = next(it)
            result.reports[(pi, seed)] = report
            metrics = run_metrics(report)
            per_seed.append(metrics)
            result.rows.append({"row": "data", "point": pi, "sweep": label, "seed": seed, "n": 1, **metrics})
            for name, text in out.items():
                files[f"point-{pi}/seed-{seed}/{name}"] = text
        result.rows.append(aggregate_row(pi, label, per_seed))
    if spec.csv:
        files[CSV_FILE] = result.csv_text()
    _write_atomically(spec.out_dir, files)
    return result


def read_summary(path: str | Path) -> list[dict[str, str]]:
    """Rows of a summary CSV as string dicts, schema line checked."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_SCHEMA:
        raise ValueError("not a schema v1 summary file")
    header = lines[1].split(",")
    return [dict(zip(header, ln.split(","))) for ln in lines[2:] if ln]


def compare_golden(produced: str | Path, golden: str | Path) -> tuple[bool, list[str]]:
    """Byte comparison of two directory trees; one report line per file."""
    produced, golden = Path(produced), Path(golden)
    for d in (produced, golden):
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory: {d}")

    def listing(root: Path) -> set[str]:
        return {p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file()}

    got, want = listing(produced), listing(golden)
    ok = True
    report = []
    for name in sorted(got | want):
        if name not in got:
            ok = False
            report.append(f"MISSING {name}: absent from produced")
            continue
        if name not in want:
            ok = False
            report.append(f"EXTRA {name}: absent from golden")
            continue
        a = (produced / name).read_bytes()
        b = (golden / name).read_bytes()
        if a == b:
            report.append(f"OK {name}")
            continue
        ok = False
        offset = next((i for i, (x, y) in enumerate(zip(a, b)) if x != y), min(len(a), len(b)))
        report.append(f"DIFF {name}: first difference at byte {offset}")
    return ok, report
