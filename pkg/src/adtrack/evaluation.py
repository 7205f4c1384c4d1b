"""One-pass evaluation: sequence loading, centre-error / overlap metrics,
precision and success curves, per-attribute breakdown and report files.

Boxes are (x, y, w, h) with a 0-based pixel origin in memory. Ground-truth and
results files use a 1-based origin, as in the OTB / UAV123 toolkits.
"""
from __future__ import annotations

import csv
import json
import re
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np

from .errors import ADTrackError, FormatError

PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)  # CLE, px
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 51)  # IoU
DP_THRESHOLD = 20.0
ATTRIBUTES = ("VC", "FM", "LR", "OCC", "IV")
IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff", ".ppm", ".pgm")
GT_NAMES = ("groundtruth_rect.txt", "groundtruth.txt")
_SPLIT = re.compile(r"[,\t ]+")


@dataclass
class Sequence:
    name: str
    frames: list[Path]
    gt: np.ndarray  # (n, 4), 0-based; NaN rows mark absent targets
    attributes: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.frames)

    def frame(self, k: int) -> np.ndarray:
        return read_frame(self.frames[k])


def read_frame(path) -> np.ndarray:
    """RGB uint8 frame; raises OSError if the file cannot be decoded."""
    img = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if img is None:
        raise OSError(f"cannot read image {path}")
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def parse_boxes(text: str, source: str = "<boxes>", allow_nan: bool = True) -> np.ndarray:
    """Parse 1-based "x,y,w,h" lines (comma, tab or space separated) to 0-based boxes."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = [p for p in _SPLIT.split(line) if p]
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"{source}:{lineno}: cannot parse {line!r}") from None
        if len(vals) != 4:
            raise FormatError(f"{source}:{lineno}: expected 4 values, got {len(vals)}")
        box = np.array(vals)
        if np.isnan(box).any():
            if not allow_nan:
                raise FormatError(f"{source}:{lineno}: NaN box")
            box[:] = np.nan
        elif not (np.isfinite(box).all() and box[2] > 0 and box[3] > 0):
            raise FormatError(f"{source}:{lineno}: box must be finite with positive size, got {line!r}")
        rows.append(box)
    boxes = np.array(rows, dtype=np.float64).reshape(-1, 4)
    boxes[:, :2] -= 1.0
    return boxes


def format_boxes(boxes: np.ndarray) -> str:
    """Inverse of parse_boxes: one 1-based "x,y,w,h" line per box."""
    out = np.asarray(boxes, dtype=np.float64).copy()
    out[:, :2] += 1.0
    return "".join(",".join(f"{v:.4f}" for v in row) + "\n" for row in out)


def write_results(path, boxes: np.ndarray) -> None:
    Path(path).write_text(format_boxes(boxes))


def read_results(path) -> np.ndarray:
    return parse_boxes(Path(path).read_text(), str(path), allow_nan=False)


def _frame_paths(seq_dir: Path) -> list[Path]:
    img_dir = seq_dir / "img" if (seq_dir / "img").is_dir() else seq_dir
    return sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_sequence(seq_dir) -> Sequence:
    """Load an OTB-style directory: img/NNNN.jpg frames, groundtruth_rect.txt, optional attributes.txt."""
    seq_dir = Path(seq_dir)
    if not seq_dir.is_dir():
        raise FileNotFoundError(f"sequence directory {seq_dir} does not exist")
    gt_path = next((seq_dir / n for n in GT_NAMES if (seq_dir / n).is_file()), None)
    if gt_path is None:
        raise FormatError(f"{seq_dir}: no ground-truth file ({' or '.join(GT_NAMES)})")
    gt = parse_boxes(gt_path.read_text(), str(gt_path))
    frames = _frame_paths(seq_dir)
    if len(frames) != len(gt):
        raise FormatError(f"{seq_dir}: {len(frames)} frames but {len(gt)} ground-truth boxes")
    if len(frames) == 0:
        raise FormatError(f"{seq_dir}: empty sequence")
    if np.isnan(gt[0]).any():
        raise FormatError(f"{gt_path}:1: the first frame needs a ground-truth box")
    attrs = ()
    attr_path = seq_dir / "attributes.txt"
    if attr_path.is_file():
        tags = [t.upper() for t in _SPLIT.split(attr_path.read_text().strip()) if t]
        unknown = sorted(set(tags) - set(ATTRIBUTES))
        if unknown:
            raise FormatError(f"{attr_path}: unknown attribute tags {unknown}")
        attrs = tuple(t for t in ATTRIBUTES if t in tags)
    return Sequence(seq_dir.name, frames, gt, attrs)


def find_sequences(root) -> list[Path]:
    """Sequence directories under `root` (or `root` itself if it is one), sorted by name."""
    root = Path(root)
    if any((root / n).is_file() for n in GT_NAMES):
        return [root]
    return sorted(p for p in root.iterdir() if p.is_dir() and any((p / n).is_file() for n in GT_NAMES))


# -- metrics -------------------------------------------------------------------


def center_error(pred, gt) -> np.ndarray:
    """Euclidean distance between box centres; works on single boxes or (n, 4) arrays."""
    p, g = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    dx = (p[..., 0] + p[..., 2] / 2.0) - (g[..., 0] + g[..., 2] / 2.0)
    dy = (p[..., 1] + p[..., 3] / 2.0) - (g[..., 1] + g[..., 3] / 2.0)
    return np.hypot(dx, dy)


def iou(pred, gt) -> np.ndarray:
    """Intersection over union of (x, y, w, h) boxes; 0 for disjoint boxes."""
    p, g = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    iw = np.minimum(p[..., 0] + p[..., 2], g[..., 0] + g[..., 2]) - np.maximum(p[..., 0], g[..., 0])
    ih = np.minimum(p[..., 1] + p[..., 3], g[..., 1] + g[..., 3]) - np.maximum(p[..., 1], g[..., 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = p[..., 2] * p[..., 3] + g[..., 2] * g[..., 3] - inter
    return inter / union


def precision_curve(cle: np.ndarray, thresholds=PRECISION_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with centre error <= each threshold."""
    cle = np.asarray(cle, dtype=np.float64)
    if cle.size == 0:
        return np.zeros(len(thresholds))
    return (cle[None, :] <= np.asarray(thresholds)[:, None]).mean(axis=1)


def success_curve(overlap: np.ndarray, thresholds=SUCCESS_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with IoU >= each threshold (so a perfect trajectory scores 1 everywhere)."""
    overlap = np.asarray(overlap, dtype=np.float64)
    if overlap.size == 0:
        return np.zeros(len(thresholds))
    return (overlap[None, :] >= np.asarray(thresholds)[:, None]).mean(axis=1)


@dataclass
class SequenceResult:
    name: str
    precision: np.ndarray
    success: np.ndarray
    n_frames: int
    n_valid: int
    attributes: tuple[str, ...] = ()
    fps: float = float("nan")  # tracker compute only
    fps_total: float = float("nan")  # including frame decoding
    mode: str = ""
    failed: str | None = None

    @property
    def dp(self) -> float:
        return float(self.precision[int(np.searchsorted(PRECISION_THRESHOLDS, DP_THRESHOLD))])

    @property
    def auc(self) -> float:
        return float(self.success.mean())


def score_trajectory(name: str, pred: np.ndarray, gt: np.ndarray, attributes=(), **kw) -> SequenceResult:
    """Curves for one sequence; frames whose ground truth is NaN are excluded."""
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise FormatError(f"{name}: {len(pred)} predicted boxes for {len(gt)} ground-truth boxes")
    valid = ~np.isnan(gt).any(axis=1)
    cle, ov = center_error(pred[valid], gt[valid]), iou(pred[valid], gt[valid])
    return SequenceResult(name, precision_curve(cle), success_curve(ov), len(gt), int(valid.sum()),
                          tuple(attributes), **kw)


@dataclass
class EvalReport:
    sequences: list[SequenceResult]
    by_attribute: dict[str, "EvalReport"] = field(default_factory=dict)

    @property
    def scored(self) -> list[SequenceResult]:
        return [s for s in self.sequences if s.failed is None]

    @property
    def failed(self) -> list[SequenceResult]:
        return [s for s in self.sequences if s.failed is not None]

    def _mean(self, attr) -> np.ndarray:
        vals = [getattr(s, attr) for s in self.scored]
        return np.mean(vals, axis=0) if vals else np.full(51, np.nan)

    @property
    def precision(self) -> np.ndarray:
        return self._mean("precision")

    @property
    def success(self) -> np.ndarray:
        return self._mean("success")

    @property
    def dp(self) -> float:
        return float(self.precision[int(np.searchsorted(PRECISION_THRESHOLDS, DP_THRESHOLD))])

    @property
    def auc(self) -> float:
        return float(self.success.mean())

    @property
    def fps(self) -> float:
        vals = [s.fps for s in self.scored if np.isfinite(s.fps)]
        return float(np.mean(vals)) if vals else float("nan")

    @property
    def fps_total(self) -> float:
        vals = [s.fps_total for s in self.scored if np.isfinite(s.fps_total)]
        return float(np.mean(vals)) if vals else float("nan")

    def to_dict(self) -> dict:
        def seq(s: SequenceResult) -> dict:
            return {"name": s.name, "dp": s.dp, "auc": s.auc, "frames": s.n_frames, "valid_frames": s.n_valid,
                    "attributes": list(s.attributes), "fps": _num(s.fps), "fps_total": _num(s.fps_total),
                    "mode": s.mode, "failed": s.failed,
                    "precision": s.precision.tolist(), "success": s.success.tolist()}

        out = {
            "dp": _num(self.dp), "auc": _num(self.auc), "fps": _num(self.fps), "fps_total": _num(self.fps_total),
            "num_sequences": len(self.scored),
            "precision_thresholds": PRECISION_THRESHOLDS.tolist(),
            "success_thresholds": SUCCESS_THRESHOLDS.tolist(),
            "precision": [_num(v) for v in self.precision], "success": [_num(v) for v in self.success],
            "failed": [s.name for s in self.failed],
            "sequences": [seq(s) for s in self.sequences],
        }
        if self.by_attribute:
            out["attributes"] = {k: {"dp": _num(r.dp), "auc": _num(r.auc), "num_sequences": len(r.scored)}
                                 for k, r in self.by_attribute.items()}
        return out

    def write(self, out_dir, curves: bool = True) -> list[Path]:
        """Write report.json, summary.csv and (optionally) gnuplot-ready curve files."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = [out_dir / "report.json", out_dir / "summary.csv"]
        written[0].write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        with open(written[1], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sequence", "dp", "auc", "fps", "fps_total", "frames", "mode", "status"])
            for s in self.sequences:
                w.writerow([s.name, f"{s.dp:.6f}", f"{s.auc:.6f}", f"{s.fps:.2f}", f"{s.fps_total:.2f}",
                            s.n_frames, s.mode, "failed" if s.failed else "ok"])
            for tag, r in self.by_attribute.items():
                w.writerow([f"[{tag}]", f"{r.dp:.6f}", f"{r.auc:.6f}", "", "", "", "", len(r.scored)])
            w.writerow(["[all]", f"{self.dp:.6f}", f"{self.auc:.6f}", f"{self.fps:.2f}", f"{self.fps_total:.2f}",
                        "", "", len(self.scored)])
        if curves:
            for fname, th, curve in (("precision.dat", PRECISION_THRESHOLDS, self.precision),
                                     ("success.dat", SUCCESS_THRESHOLDS, self.success)):
                path = out_dir / fname
                path.write_text("".join(f"{t:.2f} {v:.6f}\n" for t, v in zip(th, curve)))
                written.append(path)
        return written


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


def build_report(results: list[SequenceResult]) -> EvalReport:
    """Unweighted per-sequence average, independent of input order; attribute sub-reports when tagged."""
    results = sorted(results, key=lambda s: s.name)
    for s in results:
        if s.failed is not None:
            warnings.warn(f"sequence {s.name} failed ({s.failed}); excluded from the averages", stacklevel=2)
    by_attr = {}
    for tag in ATTRIBUTES:
        tagged = [s for s in results if tag in s.attributes]
        if tagged:
            by_attr[tag] = EvalReport(tagged)
    return EvalReport(results, by_attr)


# -- one-pass evaluation ---------------------------------------------------------


def track_sequence(seq: Sequence, cfg=None, on_frame=None):
    """Run a tracker over `seq` from the first ground-truth box.

    Returns (boxes (n, 4), compute-only fps, end-to-end fps, mode). `on_frame(k, tracker)`
    is called after every frame when given.
    """
    from .tracker import ADTracker, TrackerConfig

    trk = ADTracker(cfg if cfg is not None else TrackerConfig())
    boxes = np.empty((len(seq), 4))
    compute = 0.0
    start = time.perf_counter()
    for k in range(len(seq)):
        frame = seq.frame(k)
        t0 = time.perf_counter()
        state = trk.init(frame, seq.gt[0]) if k == 0 else trk.track(frame)
        compute += time.perf_counter() - t0
        boxes[k] = state.bbox
        if on_frame is not None:
            on_frame(k, trk)
    total = time.perf_counter() - start
    return boxes, len(seq) / max(compute, 1e-12), len(seq) / max(total, 1e-12), trk.mode.value


def _ope_one(args) -> tuple[SequenceResult, np.ndarray | None]:
    seq, cfg = args
    try:
        boxes, fps, fps_total, mode = track_sequence(seq, cfg)
    except (ADTrackError, OSError, FloatingPointError) as exc:
        nan = np.full(51, np.nan)
        return SequenceResult(seq.name, nan, nan, len(seq), 0, seq.attributes,
                              failed=f"{type(exc).__name__}: {exc}"), None
    res = score_trajectory(seq.name, boxes, seq.gt, seq.attributes, fps=fps, fps_total=fps_total, mode=mode)
    return res, boxes


def run_ope(cfg, sequences: list[Sequence], results_dir=None, workers: int = 1) -> EvalReport:
    """One-pass evaluation: initialise from frame-1 ground truth and track to the end, never resetting.

    Sequences run in parallel when workers > 1; the report does not depend on the schedule.
    Per-sequence results files (1-based "x,y,w,h" lines) go to `results_dir` when given.
    """
    jobs = [(s, cfg) for s in sequences]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_ope_one, jobs))
    else:
        outcomes = [_ope_one(j) for j in jobs]
    if results_dir is not None:
        results_dir = Path(results_dir)
        results_dir.mkdir(parents=True, exist_ok=True)
        for res, boxes in outcomes:
            if boxes is not None:
                write_results(results_dir / f"{res.name}.txt", boxes)
    return build_report([res for res, _ in outcomes])


def evaluate_results(results_dir, sequences: list[Sequence]) -> EvalReport:
    """Score existing results files `<name>.txt` against the matching sequences.

    Sequences without a results file (and results without a sequence) are listed in a
    warning and skipped. Raises FormatError when nothing matches.
    """
    results_dir = Path(results_dir)
    files = {p.stem: p for p in results_dir.glob("*.txt")} if results_dir.is_dir() else {}
    by_name = {s.name: s for s in sequences}
    missing = sorted(set(by_name) - set(files))
    extra = sorted(set(files) - set(by_name))
    if missing or extra:
        warnings.warn(f"skipping unmatched names: no results for {missing}, no sequence for {extra}", stacklevel=2)
    matched = sorted(set(files) & set(by_name))
    if not matched:
        raise FormatError(f"no results in {results_dir} match the given sequences")
    scored = []
    for name in matched:
        seq = by_name[name]
        scored.append(score_trajectory(name, read_results(files[name]), seq.gt, seq.attributes))
    return build_report(scored)
