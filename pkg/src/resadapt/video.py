"""Luminance-plane video input and SI/TI complexity indices.

SI (spatial information) is the per-frame standard deviation of Sobel
gradient magnitudes; TI (temporal information) is the standard deviation of
signed pixel differences between consecutive frames. Both are aggregated
over time by max and by mean. The max aggregate is the classical ITU-style
definition; the mean aggregate is what downstream classification and
modeling use by default.

Input formats: YUV4MPEG2 (Y4M) streams and headerless planar YUV with
explicit geometry. Only the luminance plane is retained; chroma planes are
skipped byte-exactly. Compressed codecs are out of scope.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ValidationError


class Y4mError(ParseError):
    """Malformed Y4M input; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


# --------------------------------------------------------------------------
# Domain types


@dataclass(eq=False)
class LumaFrame:
    """One 8-bit luminance plane, stored as a (height, width) uint8 array."""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("frame dimensions must be positive")
        arr = np.asarray(self.samples, dtype=np.uint8)
        if arr.ndim == 1:
            if arr.size != self.width * self.height:
                raise ValidationError(
                    f"expected {self.width * self.height} samples, got {arr.size}"
                )
            arr = arr.reshape(self.height, self.width)
        elif arr.shape != (self.height, self.width):
            raise ValidationError(
                f"sample array shape {arr.shape} does not match "
                f"{self.height}x{self.width}"
            )
        self.samples = arr


@dataclass(eq=False)
class VideoSequence:
    """Ordered luminance frames plus the stream frame rate."""

    frames: list
    frame_rate: float

    def __post_init__(self):
        if not self.frames:
            raise ValidationError("a video sequence needs at least one frame")
        if self.frame_rate <= 0:
            raise ValidationError("frame rate must be positive")
        w, h = self.frames[0].width, self.frames[0].height
        for i, frame in enumerate(self.frames):
            if frame.width != w or frame.height != h:
                raise ValidationError(
                    f"frame {i} is {frame.width}x{frame.height}, expected {w}x{h}"
                )

    @property
    def width(self):
        return self.frames[0].width

    @property
    def height(self):
        return self.frames[0].height


@dataclass
class SiTiProfile:
    """Per-frame SI/TI series and their max/mean aggregates.

    ``ti_*`` fields are None for single-frame sequences: TI needs a frame
    pair and an explicit undefined marker avoids misreading stills as
    zero-motion video.
    """

    si_series: list
    ti_series: list
    si_max: float
    si_mean: float
    ti_max: float | None
    ti_mean: float | None

    @property
    def ti_defined(self) -> bool:
        return self.ti_max is not None

    def aggregate(self, agg: str = "mean"):
        """Return the (si, ti) pair for the requested aggregation."""
        if agg == "mean":
            return self.si_mean, self.ti_mean
        if agg == "max":
            return self.si_max, self.ti_max
        raise ValidationError(f"unknown aggregation {agg!r} (use 'mean' or 'max')")


@dataclass(frozen=True)
class SiTiThresholds:
    """Category boundaries: low means <= *_low, high means >= *_high."""

    si_low: float = 40.0
    si_high: float = 110.0
    ti_low: float = 10.0
    ti_high: float = 25.0

    def __post_init__(self):
        if not (self.si_low < self.si_high):
            raise ValidationError("si_low must be < si_high")
        if not (self.ti_low < self.ti_high):
            raise ValidationError("ti_low must be < ti_high")


DEFAULT_THRESHOLDS = SiTiThresholds()

CATEGORY_LABELS = ("LowSiLowTi", "LowSiHighTi", "HighSiLowTi", "HighSiHighTi", "Mid")


@dataclass
class SiTiCategory:
    label: str
    thresholds: SiTiThresholds = field(default_factory=SiTiThresholds)


# --------------------------------------------------------------------------
# Y4M / raw planar parsing

_COLORSPACES = {
    "420": (2, 2),
    "420jpeg": (2, 2),
    "420mpeg2": (2, 2),
    "420paldv": (2, 2),
    "422": (2, 1),
    "444": (1, 1),
}


def _plane_sizes(width, height, colorspace, offset):
    try:
        sub_w, sub_h = _COLORSPACES[colorspace]
    except KeyError:
        raise Y4mError(f"unsupported colorspace C{colorspace}", offset) from None
    if width % sub_w or height % sub_h:
        raise Y4mError(
            f"dimensions {width}x{height} not divisible by C{colorspace} subsampling",
            offset,
        )
    luma = width * height
    chroma = (width // sub_w) * (height // sub_h)
    return luma, chroma


def parse_y4m(source) -> VideoSequence:
    """Decode a YUV4MPEG2 stream into the Y planes of its frames.

    *source* is a bytes object or a binary file object. Chroma planes are
    skipped. Raises :class:`Y4mError` with a byte offset on malformed
    signature, unsupported colorspace, zero dimensions, or truncation.
    """
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    data = bytes(data)

    nl = data.find(b"\n")
    if nl < 0 or not data.startswith(b"YUV4MPEG2"):
        raise Y4mError("missing YUV4MPEG2 signature line", 0)
    tokens = data[:nl].split(b" ")

    width = height = None
    rate_num = rate_den = None
    colorspace = "420"
    cs_offset = 0
    pos = len(tokens[0]) + 1
    for token in tokens[1:]:
        if token:
            key, value = token[:1], token[1:]
            try:
                if key == b"W":
                    width = int(value)
                elif key == b"H":
                    height = int(value)
                elif key == b"F":
                    num, den = value.split(b":")
                    rate_num, rate_den = int(num), int(den)
                elif key == b"C":
                    colorspace = value.decode("ascii")
                    cs_offset = pos
                # I (interlace), A (aspect), X (comment) are irrelevant here.
            except (ValueError, UnicodeDecodeError):
                raise Y4mError(f"malformed signature parameter {token!r}", pos) from None
        pos += len(token) + 1

    if width is None or height is None:
        raise Y4mError("signature missing W or H parameter", 0)
    if width == 0 or height == 0:
        raise Y4mError("zero frame dimensions", 0)
    if rate_num is None:
        raise Y4mError("signature missing F parameter", 0)
    if rate_num <= 0 or rate_den <= 0:
        raise Y4mError("non-positive frame rate", 0)

    luma_size, chroma_size = _plane_sizes(width, height, colorspace, cs_offset)
    frame_size = luma_size + 2 * chroma_size

    frames = []
    pos = nl + 1
    while pos < len(data):
        if not data.startswith(b"FRAME", pos):
            raise Y4mError("expected FRAME marker", pos)
        marker_end = data.find(b"\n", pos)
        if marker_end < 0:
            raise Y4mError("truncated FRAME header", len(data))
        payload_start = marker_end + 1
        payload_end = payload_start + frame_size
        if payload_end > len(data):
            raise Y4mError(
                f"truncated frame payload (frame {len(frames)}, "
                f"need {payload_end - len(data)} more bytes)",
                len(data),
            )
        y = np.frombuffer(data, np.uint8, count=luma_size, offset=payload_start)
        frames.append(LumaFrame(width, height, y.reshape(height, width).copy()))
        pos = payload_end

    if not frames:
        raise Y4mError("stream carries no frames", len(data))
    return VideoSequence(frames, rate_num / rate_den)


def parse_raw(source, width: int, height: int, colorspace: str = "420",
              frame_rate: float = 25.0) -> VideoSequence:
    """Decode headerless planar YUV with explicit geometry."""
    if width <= 0 or height <= 0:
        raise Y4mError("zero frame dimensions", 0)
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    data = bytes(data)
    luma_size, chroma_size = _plane_sizes(width, height, colorspace, 0)
    frame_size = luma_size + 2 * chroma_size

    frames = []
    pos = 0
    while pos < len(data):
        if pos + frame_size > len(data):
            raise Y4mError(
                f"truncated frame payload (frame {len(frames)})", len(data)
            )
        y = np.frombuffer(data, np.uint8, count=luma_size, offset=pos)
        frames.append(LumaFrame(width, height, y.reshape(height, width).copy()))
        pos += frame_size
    if not frames:
        raise Y4mError("stream carries no frames", 0)
    return VideoSequence(frames, frame_rate)


# --------------------------------------------------------------------------
# SI / TI computation


def sobel_magnitude(frame: LumaFrame) -> np.ndarray:
    """Gradient-magnitude field of the standard 3x3 Sobel kernels.

    The one-pixel border is excluded (valid convolution, no zero padding),
    so the result has shape (height-2, width-2). Gradients are computed in
    exact integer arithmetic; only the magnitude is floating point.
    """
    if frame.width < 3 or frame.height < 3:
        raise ValidationError("Sobel needs a frame of at least 3x3 pixels")
    a = frame.samples.astype(np.int64)
    gx = (
        (a[:-2, 2:] + 2 * a[1:-1, 2:] + a[2:, 2:])
        - (a[:-2, :-2] + 2 * a[1:-1, :-2] + a[2:, :-2])
    )
    gy = (
        (a[2:, :-2] + 2 * a[2:, 1:-1] + a[2:, 2:])
        - (a[:-2, :-2] + 2 * a[:-2, 1:-1] + a[:-2, 2:])
    )
    return np.hypot(gx.astype(np.float64), gy.astype(np.float64))


def frame_si(frame: LumaFrame) -> float:
    """SI of one frame: population std of the interior Sobel magnitudes."""
    return float(np.std(sobel_magnitude(frame)))


def frame_ti(prev: LumaFrame, curr: LumaFrame) -> float:
    """TI of a frame pair: population std of signed pixel differences."""
    if prev.width != curr.width or prev.height != curr.height:
        raise ValidationError(
            f"frame dimensions differ: {prev.width}x{prev.height} vs "
            f"{curr.width}x{curr.height}"
        )
    diff = curr.samples.astype(np.int64) - prev.samples.astype(np.int64)
    return float(np.std(diff))


def compute_siti(seq: VideoSequence, threads: int | None = None) -> SiTiProfile:
    """Per-frame SI and per-pair TI with max/mean aggregates.

    Per-frame computations are pure, so they may run on a thread pool;
    collection order is fixed and the mean uses numpy's pairwise summation,
    keeping the result independent of the worker count.
    """
    frames = seq.frames
    pairs = list(zip(frames[:-1], frames[1:]))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            si_series = list(pool.map(frame_si, frames))
            ti_series = list(pool.map(lambda p: frame_ti(*p), pairs))
    else:
        si_series = [frame_si(f) for f in frames]
        ti_series = [frame_ti(p, c) for p, c in pairs]

    si_max = float(max(si_series))
    si_mean = float(np.mean(si_series))
    if ti_series:
        ti_max = float(max(ti_series))
        ti_mean = float(np.mean(ti_series))
    else:
        ti_max = ti_mean = None
    return SiTiProfile(si_series, ti_series, si_max, si_mean, ti_max, ti_mean)


def _band(value, low, high):
    if value <= low:
        return "Low"
    if value >= high:
        return "High"
    return "Mid"


def classify_values(si: float, ti: float,
                    thresholds: SiTiThresholds = DEFAULT_THRESHOLDS) -> SiTiCategory:
    """Categorize an (SI, TI) pair against the thresholds.

    Mid is returned whenever either index falls strictly between its low
    and high boundary.
    """
    si_band = _band(si, thresholds.si_low, thresholds.si_high)
    ti_band = _band(ti, thresholds.ti_low, thresholds.ti_high)
    if si_band == "Mid" or ti_band == "Mid":
        return SiTiCategory("Mid", thresholds)
    return SiTiCategory(f"{si_band}Si{ti_band}Ti", thresholds)


def classify_siti(profile: SiTiProfile,
                  thresholds: SiTiThresholds = DEFAULT_THRESHOLDS,
                  agg: str = "mean") -> SiTiCategory:
    """Categorize a profile using its mean aggregates (or max with agg="max")."""
    si, ti = profile.aggregate(agg)
    if ti is None:
        raise ValidationError("TI is undefined for a single-frame sequence")
    return classify_values(si, ti, thresholds)
