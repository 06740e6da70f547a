# stacks.py
# -----------------------------------------------------------------------------
# Image stack data model, synthetic dataset generation, and bit-exact I/O.
#
# Backgrounds are Gaussian noise shaped in the frequency domain with an
# isotropic 1/f^(beta/2) amplitude (beta = 3 by default, a mammography-like
# texture; beta = 0 is white noise), normalized to unit theoretical variance
# and affine-mapped so +-4 sigma spans the central half of the code range.
# Lesions are additive smoothed discs (disc convolved with a Gaussian of
# sigma = diameter/8, peak-normalized) with a Gaussian through-slice depth
# profile, inserted at the spatio-temporal stack center.
#
# On disk a stack is a raw little-endian unsigned 16-bit payload (row-major
# within slice, slices consecutive) plus a "<name>.hdr" sidecar of
# key = value lines; a dataset is a directory of those plus a manifest CSV
# listing id, path, label and the healthy source of every lesion stack.
# -----------------------------------------------------------------------------

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import FormatError, LesionClippingWarning

__all__ = [
    "StackGeometry",
    "GEOMETRY_PRESETS",
    "ImageStack",
    "LesionSpec",
    "Dataset",
    "generate_background",
    "lesion_profile",
    "insert_lesion",
    "generate_dataset",
    "write_stack",
    "read_stack",
    "write_dataset",
    "read_dataset",
]

LABELS = ("healthy", "lesion")
TEXTURES = ("power_law", "white")

# fraction of the peak above which a slice counts as lesion-affected
AFFECTED_THRESHOLD = 0.01


@dataclass(frozen=True)
class StackGeometry:
    """Stack dimensions and code width."""

    width: int
    height: int
    n_slices: int
    bit_depth: int
    slice_sep_mm: float

    def __post_init__(self) -> None:
        if min(self.width, self.height, self.n_slices) < 1:
            raise ValueError("dimensions must be positive")
        if not (isinstance(self.bit_depth, int) and 1 <= self.bit_depth <= 16):
            raise ValueError("bit_depth must be an integer in 1..16")
        if not self.slice_sep_mm > 0:
            raise ValueError("slice separation must be positive")

    @property
    def max_code(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def shape(self) -> tuple:
        return (self.width, self.height, self.n_slices)


GEOMETRY_PRESETS = {
    "dataset_a": StackGeometry(64, 64, 41, 10, 1.0),
    "dataset_b": StackGeometry(64, 64, 32, 10, 0.2),
}


@dataclass(frozen=True, eq=False)
class ImageStack:
    """One browsed stack of integer code values.

    lesion_slices is the tuple of slice indices the insertion affected
    (empty for healthy stacks); source_id names the healthy origin of a
    lesion stack; provenance is free-form generator bookkeeping.
    """

    width: int
    height: int
    n_slices: int
    bit_depth: int
    slice_sep_mm: float
    data: np.ndarray
    stack_id: str
    label: str
    lesion_slices: tuple = ()
    source_id: str = ""
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}")
        data = np.asarray(self.data)
        if data.shape != (self.width, self.height, self.n_slices):
            raise ValueError(
                f"data shape {data.shape} does not match declared "
                f"{(self.width, self.height, self.n_slices)}")
        if data.dtype != np.uint16:
            raise ValueError("codes must be uint16")
        if data.size and int(data.max()) > self.max_code:
            raise ValueError(
                f"code {int(data.max())} exceeds {self.bit_depth}-bit range")
        if self.label == "healthy" and self.lesion_slices:
            raise ValueError("healthy stacks cannot have affected slices")
        if self.label == "lesion" and not self.source_id:
            raise ValueError("lesion stacks must name their healthy source")
        object.__setattr__(self, "lesion_slices",
                           tuple(int(s) for s in self.lesion_slices))

    @property
    def max_code(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def geometry(self) -> StackGeometry:
        return StackGeometry(self.width, self.height, self.n_slices,
                             self.bit_depth, self.slice_sep_mm)


@dataclass(frozen=True)
class LesionSpec:
    """Additive lesion description.

    kind picks the defaults: microcalc is an 8-pixel disc with a
    one-slice depth spread, mass a 40-pixel disc spread over sigma_z = 3
    slices.  amplitude is the peak height in code units; zero is allowed
    (a no-op insertion that still records the affected slices).
    """

    kind: str
    amplitude: float
    diameter_px: float = 0.0
    sigma_z: float = 0.0

    _DEFAULTS = {"microcalc": (8.0, 1.0), "mass": (40.0, 3.0)}

    def __post_init__(self) -> None:
        if self.kind not in self._DEFAULTS:
            raise ValueError(f"kind must be one of {tuple(self._DEFAULTS)}")
        if not self.amplitude >= 0:
            raise ValueError("amplitude must be nonnegative")
        d, sz = self._DEFAULTS[self.kind]
        if self.diameter_px == 0.0:
            object.__setattr__(self, "diameter_px", d)
        if self.sigma_z == 0.0:
            object.__setattr__(self, "sigma_z", sz)
        if not self.diameter_px > 0 or not self.sigma_z > 0:
            raise ValueError("diameter and sigma_z must be positive")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Generated stacks plus the healthy-to-lesion pairing."""

    stacks: tuple
    seed: int | None = None
    lesion: LesionSpec | None = None

    @property
    def pairing(self) -> tuple:
        pairs = tuple((s.source_id, s.stack_id) for s in self.stacks
                      if s.label == "lesion")
        known = {s.stack_id for s in self.stacks}
        for healthy_id, lesion_id in pairs:
            if healthy_id not in known:
                raise FormatError(
                    f"lesion stack {lesion_id!r} names unknown source "
                    f"{healthy_id!r}")
        return pairs


def generate_background(geometry: StackGeometry, seed,
                        texture: str = "power_law", beta: float = 3.0,
                        stack_id: str = "stack") -> ImageStack:
    """Generate one healthy background stack, deterministic per seed.

    seed may be anything np.random.default_rng accepts.  White Gaussian
    noise is shaped with the isotropic amplitude f^(-beta/2) (DC removed),
    scaled to unit theoretical standard deviation, and mapped to codes as
    center + field * quarter_range / 4, rounded and clipped: +-4 sigma of
    the field spans the central half of the code range.
    """
    if texture not in TEXTURES:
        raise ValueError(f"texture must be one of {TEXTURES}")
    if texture == "white":
        beta = 0.0
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(geometry.shape)

    fx = np.fft.fftfreq(geometry.width)[:, None, None]
    fy = np.fft.fftfreq(geometry.height)[None, :, None]
    fz = np.fft.fftfreq(geometry.n_slices)[None, None, :]
    radial = np.sqrt(fx * fx + fy * fy + fz * fz)
    with np.errstate(divide="ignore"):
        amplitude = radial ** (-beta / 2.0)
    amplitude[0, 0, 0] = 0.0
    sigma = float(np.sqrt(np.mean(amplitude * amplitude)))

    shaped = np.fft.ifftn(np.fft.fftn(white) * amplitude).real / sigma

    # +-4 sigma of the unit-variance field maps to +-(range/4) around the
    # midpoint, i.e. the central half of the code range
    center = 1 << (geometry.bit_depth - 1)
    scale = (1 << geometry.bit_depth) / 16.0
    codes = np.rint(center + shaped * scale)
    codes = np.clip(codes, 0, geometry.max_code).astype(np.uint16)
    if isinstance(seed, np.random.SeedSequence):
        seed_text = f"entropy={seed.entropy}"
    else:
        seed_text = repr(seed)
    provenance = f"texture={texture} beta={beta!r} seed={seed_text}"
    return ImageStack(width=geometry.width, height=geometry.height,
                      n_slices=geometry.n_slices, bit_depth=geometry.bit_depth,
                      slice_sep_mm=geometry.slice_sep_mm, data=codes,
                      stack_id=stack_id, label="healthy", provenance=provenance)


def lesion_profile(spec: LesionSpec, geometry: StackGeometry):
    """The separable lesion shape on the given grid.

    Returns (inplane, depth): a W x H smoothed-disc profile peaking at 1
    at the center pixel, and a length-K Gaussian slice profile
    exp(-((s - center)/sigma_z)^2) peaking at 1 at the central slice.
    The inserted lesion is amplitude * outer(inplane, depth).
    """
    if spec.diameter_px > min(geometry.width, geometry.height):
        raise ValueError("lesion diameter exceeds the image")
    rows = np.arange(geometry.width, dtype=np.float64) - geometry.width // 2
    cols = np.arange(geometry.height, dtype=np.float64) - geometry.height // 2
    r = np.hypot(rows[:, None], cols[None, :])
    disc = (r <= spec.diameter_px / 2.0).astype(np.float64)
    inplane = gaussian_filter(disc, sigma=spec.diameter_px / 8.0,
                              mode="constant", cval=0.0)
    inplane /= inplane[geometry.width // 2, geometry.height // 2]

    s = np.arange(geometry.n_slices, dtype=np.float64) - geometry.n_slices // 2
    depth = np.exp(-((s / spec.sigma_z) ** 2))
    return inplane, depth


def affected_slices(depth_profile) -> tuple:
    """Slice indices whose depth weight is at least 1% of the peak."""
    depth = np.asarray(depth_profile, dtype=np.float64)
    return tuple(int(i) for i in
                 np.nonzero(depth >= AFFECTED_THRESHOLD * depth.max())[0])


def insert_lesion(healthy: ImageStack, spec: LesionSpec,
                  stack_id: str = "") -> ImageStack:
    """Add the lesion profile to a healthy stack at its center.

    The result is rounded back to integer codes and clamped to the code
    range; if clamping discards more than 1% of the inserted energy a
    LesionClippingWarning is emitted (the amplitude leaves no headroom).
    """
    if healthy.label != "healthy":
        raise ValueError("can only insert into a healthy stack")
    inplane, depth = lesion_profile(spec, healthy.geometry)
    profile = spec.amplitude * inplane[:, :, None] * depth[None, None, :]
    ideal = healthy.data.astype(np.float64) + profile
    codes = np.clip(np.rint(ideal), 0, healthy.max_code)

    energy = float(profile.sum())
    lost = float(np.maximum(ideal - healthy.max_code, 0.0).sum()
                 + np.maximum(-ideal, 0.0).sum())
    if energy > 0 and lost > 0.01 * energy:
        warnings.warn(
            f"clipping removed {lost:.3g} of {energy:.3g} inserted energy "
            f"(amplitude {spec.amplitude} too high for the code headroom)",
            LesionClippingWarning)

    return ImageStack(width=healthy.width, height=healthy.height,
                      n_slices=healthy.n_slices, bit_depth=healthy.bit_depth,
                      slice_sep_mm=healthy.slice_sep_mm,
                      data=codes.astype(np.uint16),
                      stack_id=stack_id or f"{healthy.stack_id}-lesion",
                      label="lesion",
                      lesion_slices=affected_slices(depth),
                      source_id=healthy.stack_id,
                      provenance=healthy.provenance
                      + f" lesion={spec.kind} amp={spec.amplitude!r}")


def generate_dataset(geometry, n_pairs: int, lesion: LesionSpec, seed: int,
                     texture: str = "power_law", beta: float = 3.0) -> Dataset:
    """Generate n_pairs healthy stacks and their lesion twins.

    geometry may be a StackGeometry or a preset name.  Stack i draws from
    an independent stream seeded by (seed, i), so generation order cannot
    change the output.
    """
    if isinstance(geometry, str):
        geometry = GEOMETRY_PRESETS[geometry]
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    width = len(str(max(n_pairs - 1, 1)))
    stacks = []
    for i in range(n_pairs):
        child_seed = np.random.SeedSequence([int(seed), i])
        healthy = generate_background(geometry, child_seed, texture, beta,
                                      stack_id=f"h{i:0{width}d}")
        stacks.append(healthy)
        stacks.append(insert_lesion(healthy, lesion,
                                    stack_id=f"l{i:0{width}d}"))
    return Dataset(stacks=tuple(stacks), seed=int(seed), lesion=lesion)


# ---------------------------------------------------------------------------
# on-disk format


_HEADER_KEYS = ("width", "height", "n_slices", "bit_depth", "slice_sep_mm",
                "label", "lesion_slices", "stack_id", "source_id", "provenance")


def write_stack(stack: ImageStack, path) -> None:
    """Write the payload to path and the header to path + '.hdr'."""
    path = Path(path)
    payload = np.ascontiguousarray(
        stack.data.transpose(2, 0, 1)).astype("<u2").tobytes()
    path.write_bytes(payload)
    lines = [
        f"width = {stack.width}",
        f"height = {stack.height}",
        f"n_slices = {stack.n_slices}",
        f"bit_depth = {stack.bit_depth}",
        f"slice_sep_mm = {stack.slice_sep_mm!r}",
        f"label = {stack.label}",
        "lesion_slices = " + ",".join(str(s) for s in stack.lesion_slices),
        f"stack_id = {stack.stack_id}",
        f"source_id = {stack.source_id}",
        # free-form text must stay on one line to keep the format parseable
        "provenance = " + " ".join(stack.provenance.split()),
    ]
    Path(str(path) + ".hdr").write_text("\n".join(lines) + "\n",
                                        encoding="utf-8")


def _parse_header(text: str, header_path: str) -> dict:
    fields = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{header_path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    missing = [k for k in _HEADER_KEYS[:8] if k not in fields]
    if missing:
        raise FormatError(f"{header_path}: missing header keys {missing}")
    return fields


def read_stack(path) -> ImageStack:
    """Read a stack written by write_stack, verifying the format.

    Raises FormatError naming the byte offset for truncated payloads and
    out-of-range codes.
    """
    path = Path(path)
    header_path = str(path) + ".hdr"
    fields = _parse_header(Path(header_path).read_text(encoding="utf-8"),
                           header_path)
    try:
        width = int(fields["width"])
        height = int(fields["height"])
        n_slices = int(fields["n_slices"])
        bit_depth = int(fields["bit_depth"])
        slice_sep = float(fields["slice_sep_mm"])
    except ValueError as exc:
        raise FormatError(f"{header_path}: non-numeric geometry field: {exc}")
    label = fields["label"]
    if label not in LABELS:
        raise FormatError(f"{header_path}: unknown label {label!r}")
    lesion_slices = tuple(int(tok) for tok in fields["lesion_slices"].split(",")
                          if tok.strip() != "")

    payload = path.read_bytes()
    expected = width * height * n_slices * 2
    if len(payload) != expected:
        raise FormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"(truncated at byte {min(len(payload), expected)})")
    codes = np.frombuffer(payload, dtype="<u2").reshape(n_slices, width, height)
    limit = 1 << bit_depth
    flat = codes.reshape(-1)
    bad = np.nonzero(flat >= limit)[0]
    if bad.size:
        offset = int(bad[0]) * 2
        raise FormatError(
            f"{path}: code {int(flat[bad[0]])} at byte offset {offset} "
            f"exceeds the {bit_depth}-bit range")
    data = np.ascontiguousarray(codes.transpose(1, 2, 0)).astype(np.uint16)
    return ImageStack(width=width, height=height, n_slices=n_slices,
                      bit_depth=bit_depth, slice_sep_mm=slice_sep, data=data,
                      stack_id=fields["stack_id"], label=label,
                      lesion_slices=lesion_slices,
                      source_id=fields.get("source_id", ""),
                      provenance=fields.get("provenance", ""))


def write_dataset(dataset: Dataset, directory) -> Path:
    """Write every stack plus a manifest.csv; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for stack in dataset.stacks:
        name = f"{stack.stack_id}.u16"
        write_stack(stack, directory / name)
        rows.append((stack.stack_id, name, stack.label, stack.source_id))
    manifest = directory / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("stack_id", "path", "label", "source_id"))
        writer.writerows(rows)
    return manifest


def read_dataset(manifest_path) -> Dataset:
    """Read a dataset back from its manifest.csv (or its directory)."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.csv"
    with open(manifest_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["stack_id", "path", "label", "source_id"]:
            raise FormatError(f"{manifest_path}: unexpected manifest header "
                              f"{header}")
        rows = list(reader)
    stacks = []
    for row in rows:
        if len(row) != 4:
            raise FormatError(f"{manifest_path}: malformed row {row}")
        stack = read_stack(manifest_path.parent / row[1])
        if stack.stack_id != row[0] or stack.label != row[2] \
                or stack.source_id != row[3]:
            raise FormatError(
                f"{manifest_path}: row for {row[0]!r} disagrees with the "
                f"stack header")
        stacks.append(stack)
    dataset = Dataset(stacks=tuple(stacks))
    dataset.pairing  # validates source references
    return dataset
