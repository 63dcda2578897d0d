"""Finite discrete probability measures on R^d.

The measure is the package's lingua franca: a support matrix with one point
per row plus a nonnegative mass vector that sums to one. Loading, saving,
image conversion, pruning, duplicate merging, and PGM (P2/P5) handling all
live here; the solvers consume the validated arrays directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "MeasureError",
    "MeasureMeta",
    "DiscreteMeasure",
    "load_measure",
    "save_measure",
    "image_to_measure",
    "measure_to_image",
    "prune",
    "merge_duplicates",
    "read_pgm",
    "write_pgm",
    "pooled_diameter",
    "WEIGHT_SUM_TOL",
    "DEFAULT_PRUNE_THRESHOLD",
]

WEIGHT_SUM_TOL = 1e-8
DEFAULT_PRUNE_THRESHOLD = 1e-12
_SOURCES = ("file", "generated", "derived")


class MeasureError(ValueError):
    """Measure data violates a representation invariant."""


@dataclass(frozen=True)
class MeasureMeta:
    """Provenance tag: a human-readable label and where the data came from."""

    label: str
    source: str = "derived"

    def __post_init__(self):
        if not self.label:
            raise MeasureError("meta label must be nonempty")
        if self.source not in _SOURCES:
            raise MeasureError(f"unknown source {self.source!r}; expected one of {_SOURCES}")


def _as_points(arr) -> np.ndarray:
    """Coerce to a (S, d) float64 stack; a 1-D array is read as S scalars."""
    pts = np.asarray(arr, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise MeasureError(f"expected a (S, d) point stack, got shape {pts.shape}")
    return pts


class DiscreteMeasure:
    """Weighted point cloud sum_s w_s * delta(x_s) on R^d.

    Points are stored as a (S, d) float64 array and weights as a length-S
    vector. The constructor divides the weights by their computed sum when
    that sum is off by more than machine-level error; unless ``normalize``
    is set, sums farther than 1e-8 from one are rejected. Duplicate support
    points are allowed (see merge_duplicates). The arrays are marked
    read-only, so instances are safe to share.
    """

    __slots__ = ("points", "weights", "meta")

    def __init__(self, points, weights, normalize: bool = False, meta: MeasureMeta | None = None):
        pts = _as_points(points).copy()
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise MeasureError("measure needs at least one point in at least one dimension")
        if not np.all(np.isfinite(pts)):
            raise MeasureError("points contain NaN or Inf")
        w = np.array(weights, dtype=np.float64, copy=True).reshape(-1)
        if w.shape[0] != pts.shape[0]:
            raise MeasureError(f"{w.shape[0]} weights for {pts.shape[0]} points")
        if not np.all(np.isfinite(w)):
            raise MeasureError("weights contain NaN or Inf")
        if np.any(w < 0):
            raise MeasureError("negative weight")
        total = float(w.sum())
        if total <= 0:
            raise MeasureError("nonpositive total mass")
        if not normalize and abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MeasureError(
                f"weights sum to {total!r}, outside 1 +- {WEIGHT_SUM_TOL}; pass normalize=True to rescale"
            )
        # Rescaling when the sum is already 1 at machine precision would
        # shuffle low bits, breaking the bit-exact save/load round trip.
        if abs(total - 1.0) > 1e-12:
            w /= total
        pts.setflags(write=False)
        w.setflags(write=False)
        self.points = pts
        self.weights = w
        self.meta = meta

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def size(self) -> int:
        return int(self.points.shape[0])

    def translated(self, shift) -> "DiscreteMeasure":
        """Same masses on points shifted by a constant vector."""
        shift = np.asarray(shift, dtype=np.float64).reshape(-1)
        if shift.shape[0] != self.dim:
            raise MeasureError(f"shift has dim {shift.shape[0]}, measure has dim {self.dim}")
        return DiscreteMeasure(self.points + shift, self.weights, normalize=True, meta=self.meta)

    def __repr__(self) -> str:
        label = f", label={self.meta.label!r}" if self.meta is not None else ""
        return f"DiscreteMeasure(S={self.size}, d={self.dim}{label})"


def load_measure(path, renormalize: bool = False, label: str | None = None) -> DiscreteMeasure:
    """Read a measure CSV with header ``weight,x0,...,x{d-1}``.

    Each data row holds one support point: its mass followed by d
    coordinates, all plain decimal text. With ``renormalize`` any positive
    total mass is accepted and rescaled; otherwise sums outside 1 +- 1e-8
    are rejected.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise MeasureError(f"cannot read {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MeasureError(f"{path}: empty file")
    header = [h.strip() for h in lines[0].split(",")]
    expected = ["weight"] + [f"x{i}" for i in range(max(len(header) - 1, 0))]
    if len(header) < 2 or header != expected:
        raise MeasureError(f"{path}: bad header {lines[0]!r}; expected 'weight,x0,...'")
    d = len(header) - 1
    weights: list[float] = []
    pts: list[list[float]] = []
    for lineno, ln in enumerate(lines[1:], start=2):
        fields = ln.split(",")
        if len(fields) != d + 1:
            raise MeasureError(
                f"{path}:{lineno}: dimension mismatch, expected {d + 1} fields, got {len(fields)}"
            )
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise MeasureError(f"{path}:{lineno}: {exc}") from exc
        weights.append(vals[0])
        pts.append(vals[1:])
    if not pts:
        raise MeasureError(f"{path}: no data rows")
    meta = MeasureMeta(label=label or path.name, source="file")
    return DiscreteMeasure(pts, weights, normalize=renormalize, meta=meta)


def save_measure(measure: DiscreteMeasure, path) -> None:
    """Write the CSV form of a measure with 17-significant-digit decimals.

    17 significant digits round-trip float64 exactly, so save followed by
    load reproduces the arrays bit for bit.
    """
    path = Path(path)
    cols = ",".join(f"x{i}" for i in range(measure.dim))
    rows = [f"weight,{cols}"]
    for w, pt in zip(measure.weights, measure.points):
        coords = ",".join(f"{c:.17g}" for c in pt)
        rows.append(f"{w:.17g},{coords}")
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")


def image_to_measure(pixels, label: str = "image") -> DiscreteMeasure:
    """Grayscale image to a measure on integer grid coordinates.

    Support points are the (row, col) positions of strictly positive
    pixels, in row-major order; weights are the intensities divided by the
    total intensity.
    """
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim != 2:
        raise MeasureError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise MeasureError("image contains NaN or Inf")
    if np.any(img < 0):
        raise MeasureError("image contains negative intensities")
    rows, cols = np.nonzero(img > 0)
    if rows.size == 0:
        raise MeasureError("all-zero image has no mass")
    pts = np.column_stack([rows, cols]).astype(np.float64)
    w = img[rows, cols]
    return DiscreteMeasure(pts, w, normalize=True, meta=MeasureMeta(label, "derived"))


def measure_to_image(measure: DiscreteMeasure, shape) -> np.ndarray:
    """Render a 2-D measure onto a pixel grid.

    Each atom's mass is split bilinearly over the four grid pixels nearest
    its (row, col) position; coordinates outside the grid are clamped to the
    border. The output sums to one.
    """
    if measure.dim != 2:
        raise MeasureError(f"can only render 2-D measures, got dim {measure.dim}")
    j, l = int(shape[0]), int(shape[1])
    if j < 1 or l < 1:
        raise MeasureError("image shape must be positive")
    img = np.zeros((j, l))
    x = np.clip(measure.points[:, 0], 0.0, j - 1.0)
    y = np.clip(measure.points[:, 1], 0.0, l - 1.0)
    r0 = np.floor(x).astype(int)
    c0 = np.floor(y).astype(int)
    r1 = np.minimum(r0 + 1, j - 1)
    c1 = np.minimum(c0 + 1, l - 1)
    fr = x - r0
    fc = y - c0
    w = measure.weights
    np.add.at(img, (r0, c0), w * (1 - fr) * (1 - fc))
    np.add.at(img, (r0, c1), w * (1 - fr) * fc)
    np.add.at(img, (r1, c0), w * fr * (1 - fc))
    np.add.at(img, (r1, c1), w * fr * fc)
    return img


def prune(measure: DiscreteMeasure, threshold: float = DEFAULT_PRUNE_THRESHOLD) -> DiscreteMeasure:
    """Drop atoms with weight < threshold and renormalize.

    Never returns an empty measure: if everything falls below the
    threshold, the single heaviest atom (first on ties) is kept. Pruning at
    a fixed threshold is idempotent because renormalization only grows the
    surviving weights.
    """
    if not (0.0 <= threshold < 1.0):
        raise MeasureError(f"prune threshold must be in [0, 1), got {threshold!r}")
    keep = measure.weights >= threshold
    if not keep.any():
        keep = np.zeros(measure.size, dtype=bool)
        keep[int(np.argmax(measure.weights))] = True
    return DiscreteMeasure(measure.points[keep], measure.weights[keep], normalize=True, meta=measure.meta)


def merge_duplicates(measure: DiscreteMeasure) -> DiscreteMeasure:
    """Sum the weights of bitwise-identical support points.

    Keeps first-occurrence order. Points differing in any bit stay separate;
    this is an opt-in cleanup pass, not part of construction.
    """
    order: dict[bytes, int] = {}
    pts: list[np.ndarray] = []
    sums: list[float] = []
    for pt, w in zip(measure.points, measure.weights):
        key = pt.tobytes()
        idx = order.get(key)
        if idx is None:
            order[key] = len(pts)
            pts.append(pt)
            sums.append(float(w))
        else:
            sums[idx] += float(w)
    return DiscreteMeasure(np.array(pts), sums, normalize=True, meta=measure.meta)


def pooled_diameter(measures) -> float:
    """Largest pairwise Euclidean distance over the pooled supports."""
    from scipy.spatial.distance import pdist

    pts = np.vstack([m.points for m in measures])
    if pts.shape[0] < 2:
        return 0.0
    return float(pdist(pts).max())


def _pgm_tokens(data: bytes, count: int):
    """First `count` whitespace-separated header tokens, skipping # comments."""
    tokens = []
    i = 0
    while len(tokens) < count:
        while i < len(data) and data[i : i + 1].isspace():
            i += 1
        if i >= len(data):
            raise MeasureError("truncated PGM header")
        if data[i : i + 1] == b"#":
            while i < len(data) and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j : j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def read_pgm(path) -> np.ndarray:
    """Read a P2 (ASCII) or P5 (binary) PGM file into a float array.

    Only single-byte images (max value <= 255) are supported. Returns the
    raw intensities as float64, shape (height, width).
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise MeasureError(f"cannot read {path}: {exc}") from exc
    (magic, w_tok, h_tok, max_tok), pos = _pgm_tokens(data, 4)
    magic = magic.decode("ascii", errors="replace")
    if magic not in ("P2", "P5"):
        raise MeasureError(f"{path}: not a PGM file (magic {magic!r})")
    try:
        width, height, maxval = int(w_tok), int(h_tok), int(max_tok)
    except ValueError as exc:
        raise MeasureError(f"{path}: bad PGM header") from exc
    if width < 1 or height < 1:
        raise MeasureError(f"{path}: bad PGM dimensions {width}x{height}")
    if not (1 <= maxval <= 255):
        raise MeasureError(f"{path}: max value {maxval} outside the supported 1..255 range")
    n = width * height
    if magic == "P2":
        fields = data[pos:].split()
        if len(fields) != n:
            raise MeasureError(f"{path}: expected {n} pixels, found {len(fields)}")
        vals = np.array([int(f) for f in fields], dtype=np.float64)
    else:
        raw = data[pos + 1 : pos + 1 + n]
        if len(raw) != n:
            raise MeasureError(f"{path}: expected {n} pixel bytes, found {len(raw)}")
        vals = np.frombuffer(raw, dtype=np.uint8).astype(np.float64)
    if vals.max(initial=0) > maxval:
        raise MeasureError(f"{path}: pixel exceeds declared max value {maxval}")
    return vals.reshape(height, width)


def write_pgm(path, image, binary: bool = True, maxval: int = 255) -> None:
    """Write a nonnegative float or integer image as PGM.

    Intensities are rescaled so the image maximum maps to ``maxval``
    (an all-zero image stays zero). ``binary`` selects P5; otherwise P2.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise MeasureError(f"expected a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or np.any(img < 0):
        raise MeasureError("image must be finite and nonnegative")
    if not (1 <= maxval <= 255):
        raise MeasureError("max value must be in 1..255")
    top = img.max()
    scaled = np.zeros(img.shape, dtype=np.uint8)
    if top > 0:
        scaled = np.rint(img / top * maxval).astype(np.uint8)
    h, w = img.shape
    path = Path(path)
    if binary:
        header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
        path.write_bytes(header + scaled.tobytes())
    else:
        lines = [f"P2\n{w} {h}\n{maxval}"]
        for row in scaled:
            lines.append(" ".join(str(int(v)) for v in row))
        path.write_text("\n".join(lines) + "\n", encoding="ascii")
