"""Synthetic 3D classification data and the binary file formats.

Every file starts with one line of UTF-8 JSON (the header, terminated by
``\\n``) followed by a raw little-endian payload. Headers carry
``"format": "conesta/v1"`` and a ``"kind"`` field.

=========  ===========================================  ==========================
kind       header fields                                payload
=========  ===========================================  ==========================
mask       dims, order ("x-fastest"), count              uint8 mask, nx*ny*nz bytes
dataset    n, p, label_name                             float64 X (row-major), uint8 y
truth      p                                            uint8 support, float64 beta_true
model      p, weights, target_eps, seed, constants,     float64 beta (then mean and
           runs, standardize                            scale if standardize is true)
=========  ===========================================  ==========================
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .continuation import FitResult, RunRecord
from .grid import MaskedVolume
from .model import Dataset
from .penalties import PenaltyWeights

__all__ = [
    "SyntheticSpec",
    "GroundTruth",
    "FormatError",
    "CorruptHeaderError",
    "UnsupportedVersionError",
    "TruncatedPayloadError",
    "DimensionMismatchError",
    "generate",
    "split",
    "write_mask",
    "read_mask",
    "write_dataset",
    "read_dataset",
    "write_truth",
    "read_truth",
    "write_model",
    "read_model",
    "ModelFile",
]

MAGIC = "conesta"
VERSION = 1
FORMAT = f"{MAGIC}/v{VERSION}"


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the planted-region generator.

    ``regions`` is a sequence of ``(center, radius, effect)`` with ``center``
    an ``(x, y, z)`` voxel. ``smoothness`` is the half-width of a box blur
    applied to every image (0 disables it).
    """

    dims: tuple[int, int, int]
    n_per_class: int
    regions: tuple = ()
    noise_sigma: float = 1.0
    smoothness: int = 0
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        if int(self.n_per_class) < 1:
            raise ValueError("n_per_class must be >= 1")
        if not self.noise_sigma > 0:
            raise ValueError("noise_sigma must be > 0")
        if self.smoothness < 0:
            raise ValueError("smoothness must be >= 0")
        regions = []
        for center, radius, effect in self.regions:
            center = tuple(int(c) for c in center)
            if len(center) != 3 or any(not 0 <= c < d for c, d in zip(center, dims)):
                raise ValueError(f"region center {center} lies outside the grid {dims}")
            if radius < 0:
                raise ValueError("region radius must be >= 0")
            regions.append((center, float(radius), float(effect)))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "regions", tuple(regions))

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["regions"] = tuple(
            (r["center"], r["radius"], r["effect"]) if isinstance(r, dict) else tuple(r)
            for r in d.get("regions", ())
        )
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    beta_true: np.ndarray
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta_true, dtype=np.float64)
        object.__setattr__(self, "beta_true", beta)
        object.__setattr__(self, "support", beta != 0)


def region_map(spec: SyntheticSpec) -> np.ndarray:
    """Planted effect image: sum of constant-valued balls."""
    grid = np.indices(spec.dims).astype(float)
    out = np.zeros(spec.dims)
    for center, radius, effect in spec.regions:
        d2 = sum((grid[a] - center[a]) ** 2 for a in range(3))
        out[d2 <= radius ** 2] += effect
    return out


def generate(spec: SyntheticSpec, mask: MaskedVolume | None = None):
    """Draw a balanced dataset with the planted regions.

    Class-1 images get the region effects added, every image gets i.i.d.
    Gaussian noise, then the optional box blur. Columns are finally centred
    (the model has no intercept, so the classes must straddle the origin).
    Samples appear in a seeded random order.

    Returns ``(Dataset, MaskedVolume, GroundTruth)``.
    """
    if mask is None:
        mask = MaskedVolume.full(spec.dims)
    elif mask.dims != spec.dims:
        raise ValueError(f"mask dims {mask.dims} differ from spec dims {spec.dims}")
    rng = np.random.default_rng(spec.seed)
    n = 2 * int(spec.n_per_class)
    y = np.repeat(np.array([0, 1], dtype=np.uint8), spec.n_per_class)
    y = y[rng.permutation(n)]
    effect = region_map(spec)
    images = rng.standard_normal((n,) + spec.dims) * spec.noise_sigma
    images[y == 1] += effect
    if spec.smoothness > 0:
        size = 2 * int(spec.smoothness) + 1
        images = ndimage.uniform_filter(images, size=(1, size, size, size), mode="nearest")
    X = mask.from_volume(images)
    X = X - X.mean(axis=0)
    truth = GroundTruth(mask.from_volume(effect))
    return Dataset(X, y), mask, truth


def split(data: Dataset, train_fraction, seed=0):
    """Stratified train/test split; each class is shuffled and cut separately."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in (0, 1):
        idx = np.flatnonzero(data.y == label)
        if idx.size < 2:
            raise ValueError(f"class {label} has fewer than 2 samples")
        idx = idx[rng.permutation(idx.size)]
        k = int(round(train_fraction * idx.size))
        k = min(max(k, 1), idx.size - 1)
        train.append(idx[:k])
        test.append(idx[k:])
    train = np.sort(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    return data.subset(train), data.subset(test)


# --- file formats -------------------------------------------------------------------


class FormatError(ValueError):
    code = "format_error"


class CorruptHeaderError(FormatError):
    code = "corrupt_header"


class UnsupportedVersionError(FormatError):
    code = "unsupported_version"


class TruncatedPayloadError(FormatError):
    code = "truncated_payload"


class DimensionMismatchError(FormatError):
    code = "dimension_mismatch"


def _write(path, header, *arrays):
    header = {"format": FORMAT, **header}
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(blob)
        for a in arrays:
            fh.write(np.ascontiguousarray(a).tobytes())


def _read(path, kind):
    raw = Path(path).read_bytes()
    end = raw.find(b"\n")
    if end < 0:
        raise CorruptHeaderError(f"{path}: corrupt header (no header line)")
    try:
        header = json.loads(raw[:end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptHeaderError(f"{path}: corrupt header ({exc})") from None
    if not isinstance(header, dict):
        raise CorruptHeaderError(f"{path}: corrupt header")
    fmt = header.get("format", "")
    if not isinstance(fmt, str) or not fmt.startswith(MAGIC + "/v"):
        raise CorruptHeaderError(f"{path}: corrupt header (bad magic {fmt!r})")
    if fmt != FORMAT:
        raise UnsupportedVersionError(f"{path}: unsupported version {fmt!r}")
    if header.get("kind") != kind:
        raise CorruptHeaderError(f"{path}: expected a {kind} file, got {header.get('kind')!r}")
    return header, raw[end + 1:]


class _Payload:
    def __init__(self, path, buf):
        self.path = path
        self.buf = buf
        self.pos = 0

    def take(self, dtype, count):
        dtype = np.dtype(dtype).newbyteorder("<")
        nbytes = dtype.itemsize * count
        if self.pos + nbytes > len(self.buf):
            raise TruncatedPayloadError(f"{self.path}: truncated payload")
        out = np.frombuffer(self.buf, dtype=dtype, count=count, offset=self.pos)
        self.pos += nbytes
        return out.astype(dtype.newbyteorder("="))

    def finish(self):
        if self.pos != len(self.buf):
            raise DimensionMismatchError(
                f"{self.path}: {len(self.buf) - self.pos} unexpected trailing bytes"
            )


def _int_field(header, name, path, minimum=1):
    value = header.get(name)
    if not isinstance(value, int) or value < minimum:
        raise CorruptHeaderError(f"{path}: corrupt header (field {name!r})")
    return value


def write_mask(path, vol: MaskedVolume):
    _write(
        path,
        {"kind": "mask", "dims": list(vol.dims), "order": "x-fastest", "count": vol.p},
        vol.flat_mask().astype("<u1"),
    )


def read_mask(path) -> MaskedVolume:
    header, buf = _read(path, "mask")
    dims = header.get("dims")
    if (not isinstance(dims, list) or len(dims) != 3
            or not all(isinstance(d, int) and d >= 1 for d in dims)):
        raise CorruptHeaderError(f"{path}: corrupt header (field 'dims')")
    if header.get("order") != "x-fastest":
        raise CorruptHeaderError(f"{path}: corrupt header (order must be x-fastest)")
    count = _int_field(header, "count", path)
    payload = _Payload(path, buf)
    flat = payload.take("u1", int(np.prod(dims)))
    payload.finish()
    if not np.all(flat <= 1):
        raise CorruptHeaderError(f"{path}: mask bytes must be 0 or 1")
    if int(flat.sum()) != count:
        raise DimensionMismatchError(f"{path}: header count {count} != {int(flat.sum())} voxels")
    return MaskedVolume(tuple(dims), flat.astype(bool).reshape(dims, order="F"))


def write_dataset(path, data: Dataset):
    _write(
        path,
        {"kind": "dataset", "n": data.n, "p": data.p, "label_name": data.label_name},
        data.X.astype("<f8"),
        data.y.astype("<u1"),
    )


def read_dataset(path) -> Dataset:
    header, buf = _read(path, "dataset")
    n = _int_field(header, "n", path)
    p = _int_field(header, "p", path)
    payload = _Payload(path, buf)
    X = payload.take("f8", n * p).reshape(n, p)
    y = payload.take("u1", n)
    payload.finish()
    return Dataset(X, y, str(header.get("label_name", "y")))


def write_truth(path, truth: GroundTruth):
    p = truth.beta_true.size
    _write(path, {"kind": "truth", "p": p}, truth.support.astype("<u1"),
           truth.beta_true.astype("<f8"))


def read_truth(path) -> GroundTruth:
    header, buf = _read(path, "truth")
    p = _int_field(header, "p", path)
    payload = _Payload(path, buf)
    support = payload.take("u1", p).astype(bool)
    beta = payload.take("f8", p)
    payload.finish()
    truth = GroundTruth(beta)
    if not np.array_equal(truth.support, support):
        raise DimensionMismatchError(f"{path}: support does not match beta_true")
    return truth


@dataclass(frozen=True)
class ModelFile:
    """A fitted model as stored on disk, plus optional column standardisation."""

    fit: FitResult
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def beta(self):
        return self.fit.beta

    def transform(self, X):
        if self.mean is None:
            return np.asarray(X, dtype=float)
        return (np.asarray(X, dtype=float) - self.mean) / self.scale


def write_model(path, fit: FitResult, mean=None, scale=None):
    standardize = mean is not None
    header = {
        "kind": "model",
        "p": int(fit.beta.size),
        "weights": fit.weights.as_dict(),
        "target_eps": fit.target_eps,
        "seed": fit.seed,
        "constants": {k: float(v) for k, v in fit.constants.items()},
        "runs": [r.__dict__ for r in fit.runs],
        "total_inner_iterations": fit.total_inner_iterations,
        "standardize": standardize,
    }
    arrays = [fit.beta.astype("<f8")]
    if standardize:
        arrays += [np.asarray(mean, dtype="<f8"), np.asarray(scale, dtype="<f8")]
    _write(path, header, *arrays)


def read_model(path) -> ModelFile:
    header, buf = _read(path, "model")
    p = _int_field(header, "p", path)
    try:
        weights = PenaltyWeights(**header["weights"])
        runs = tuple(RunRecord(**r) for r in header["runs"])
        fit_fields = dict(target_eps=float(header["target_eps"]), seed=int(header["seed"]),
                          constants=dict(header["constants"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptHeaderError(f"{path}: corrupt header ({exc})") from None
    payload = _Payload(path, buf)
    beta = payload.take("f8", p)
    mean = scale = None
    if header.get("standardize"):
        mean = payload.take("f8", p)
        scale = payload.take("f8", p)
    payload.finish()
    fit = FitResult(beta=beta, runs=runs, weights=weights, **fit_fields)
    return ModelFile(fit, mean, scale)
