"""Seeded multi-run experiments, CSV records, seed aggregation and SVG curves."""

from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from alap.agents import RunConfig, RunRecord, train_run

RUN_HEADER = ["episode", "return", "mean_beta", "mean_loss", "seed"]
AGG_HEADER = ["group", "episode", "mean", "q25", "q75",
              "mean_smooth", "q25_smooth", "q75_smooth", "runs", "window"]


@dataclass
class ExperimentConfig(RunConfig):
    seeds: list = field(default_factory=lambda: list(range(5)))
    out: str = "runs"
    jobs: int = 1

    def __post_init__(self) -> None:
        super().__post_init__()
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.jobs < 1:
            raise ValueError("jobs must be positive")

    def run_config(self) -> RunConfig:
        names = {f.name for f in fields(RunConfig)}
        return RunConfig(**{k: getattr(self, k) for k in names})

    @property
    def group(self) -> str:
        return f"{self.env}_{self.algo}_{self.scheme.value}_b{self.batch_size}"


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else repr(float(x))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def record_to_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_HEADER)
    for ep, (ret, beta, loss) in enumerate(zip(record.returns, record.mean_beta, record.mean_loss)):
        w.writerow([ep, _fmt(ret), _fmt(beta), _fmt(loss), record.seed])
    return buf.getvalue()


def read_run_csv(path) -> RunRecord:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != RUN_HEADER:
        raise ValueError(f"{path}: expected header {','.join(RUN_HEADER)}")
    rows = rows[1:]
    seeds = {r[4] for r in rows}
    if len(seeds) > 1:
        raise ValueError(f"{path}: mixed seeds in one run file")
    rec = RunRecord(int(rows[0][4]) if rows else 0)
    for i, r in enumerate(rows):
        if int(r[0]) != i:
            raise ValueError(f"{path}: episodes must be consecutive from 0")
        rec.returns.append(float(r[1]))
        rec.mean_beta.append(float(r[2]))
        rec.mean_loss.append(float(r[3]))
    return rec


def run_path(out_dir, group: str, seed: int) -> Path:
    return Path(out_dir) / f"{group}_seed{seed}.csv"


def _run_one(args) -> RunRecord:
    config, seed = args
    return train_run(config, seed)


def run_experiment(config: ExperimentConfig, write: bool = True) -> list[RunRecord]:
    """Train one run per seed and write each run's CSV into ``config.out``."""
    rc = config.run_config()
    tasks = [(rc, s) for s in config.seeds]
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            records = list(pool.map(_run_one, tasks))
    else:
        records = [_run_one(t) for t in tasks]
    if write:
        for rec in records:
            atomic_write_text(run_path(config.out, config.group, rec.seed), record_to_csv(rec))
    return records


# --- aggregation ---------------------------------------------------------------

@dataclass
class AggregateRecord:
    group: str
    mean: np.ndarray
    q25: np.ndarray
    q75: np.ndarray
    runs: int
    window: int
    mean_smooth: np.ndarray = None
    q25_smooth: np.ndarray = None
    q75_smooth: np.ndarray = None

    def __post_init__(self) -> None:
        if self.mean_smooth is None:
            self.mean_smooth = moving_average(self.mean, self.window)
            self.q25_smooth = moving_average(self.q25, self.window)
            self.q75_smooth = moving_average(self.q75, self.window)

    @property
    def band_width(self) -> np.ndarray:
        return self.q75 - self.q25

    def __len__(self) -> int:
        return len(self.mean)


def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` points (fewer at the start)."""
    x = np.asarray(x, dtype=np.float64)
    if window <= 1 or x.size == 0:
        return x.copy()
    c = np.concatenate([[0.0], np.cumsum(x)])
    hi = np.arange(1, x.size + 1)
    lo = np.maximum(hi - window, 0)
    return (c[hi] - c[lo]) / (hi - lo)


def aggregate(records, group: str = "run", window: int = 10) -> AggregateRecord:
    """Per-episode mean and interquartile band of returns across seeds."""
    records = list(records)
    if len(records) < 2:
        raise ValueError("aggregation needs at least two records")
    lengths = {len(r.returns) for r in records}
    if len(lengths) != 1:
        raise ValueError(f"records have different episode counts: {sorted(lengths)}")
    if window < 1:
        raise ValueError("smoothing window must be >= 1")
    returns = np.array([r.returns for r in records], dtype=np.float64)
    q25, q75 = np.percentile(returns, [25, 75], axis=0)
    return AggregateRecord(group, returns.mean(axis=0), q25, q75, len(records), window)


def aggregate_dir(in_dir, window: int = 10) -> list[AggregateRecord]:
    """Aggregate every ``<group>_seed<k>.csv`` under ``in_dir`` by group."""
    groups: dict[str, list[RunRecord]] = {}
    for path in sorted(Path(in_dir).glob("*_seed*.csv")):
        group = path.stem.rsplit("_seed", 1)[0]
        groups.setdefault(group, []).append(read_run_csv(path))
    if not groups:
        raise FileNotFoundError(f"no run CSVs found in {in_dir}")
    return [aggregate(recs, g, window) for g, recs in sorted(groups.items())]


def aggregates_to_csv(aggs) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGG_HEADER)
    for a in aggs:
        for ep in range(len(a)):
            w.writerow([a.group, ep] + [_fmt(v[ep]) for v in (
                a.mean, a.q25, a.q75, a.mean_smooth, a.q25_smooth, a.q75_smooth)]
                + [a.runs, a.window])
    return buf.getvalue()


def read_aggregate_csv(path) -> list[AggregateRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != AGG_HEADER:
        raise ValueError(f"{path}: expected header {','.join(AGG_HEADER)}")
    cols: dict[str, list] = {}
    meta: dict[str, tuple[int, int]] = {}
    for r in rows[1:]:
        cols.setdefault(r[0], []).append([float(v) for v in r[2:8]])
        meta[r[0]] = (int(r[8]), int(r[9]))
    out = []
    for g, vals in cols.items():
        v = np.array(vals)
        out.append(AggregateRecord(g, v[:, 0], v[:, 1], v[:, 2], meta[g][0], meta[g][1],
                                   v[:, 3], v[:, 4], v[:, 5]))
    return out


# --- SVG rendering ---------------------------------------------------------------

PALETTE = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"]


def render_curves(aggs, path, title: str = "Mean episode return", smoothed: bool = True) -> None:
    """One polyline per aggregate over a shaded interquartile polygon."""
    aggs = list(aggs)
    if not aggs:
        raise ValueError("nothing to plot")
    width, height = 720, 440
    left, right, top, bottom = 70, 170, 40, 60
    pw, ph = width - left - right, height - top - bottom

    series = []
    for a in aggs:
        if smoothed:
            series.append((a.group, a.mean_smooth, a.q25_smooth, a.q75_smooth))
        else:
            series.append((a.group, a.mean, a.q25, a.q75))
    n_max = max(len(s[1]) for s in series)
    lo = min(np.nanmin(s[2]) for s in series)
    hi = max(np.nanmax(s[3]) for s in series)
    if not hi > lo:
        lo, hi = lo - 1.0, hi + 1.0

    def sx(i):
        return left + (pw * i / (n_max - 1) if n_max > 1 else pw / 2)

    def sy(v):
        return top + ph * (hi - v) / (hi - lo)

    def pts(xs, ys):
        return " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2}" y="{top - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(f'<text x="{left - 6}" y="{sy(v) + 4:.2f}" text-anchor="end">{v:.4g}</text>')
        ep = round((n_max - 1) * k / 4)
        out.append(f'<text x="{sx(ep):.2f}" y="{top + ph + 18}" text-anchor="middle">{ep}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 15}" text-anchor="middle">episode</text>')
    out.append(f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2})">return</text>')

    for j, (name, mean, q25, q75) in enumerate(series):
        color = PALETTE[j % len(PALETTE)]
        xs = np.arange(len(mean))
        band = pts(xs, q75) + " " + pts(xs[::-1], q25[::-1])
        out.append(f'<polygon class="band" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline class="curve" points="{pts(xs, mean)}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 10 + 20 * j
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 37}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>\n")
    atomic_write_text(path, "\n".join(out))
