"""Transfer functions, accumulation film, 8-bit tonemap, PSNR and PPM I/O."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class DimMismatchError(ValueError):
    pass


class IoFailureError(OSError):
    pass


@dataclass(frozen=True)
class TransferFunction:
    """Piecewise-linear map from visibility in [0, 1] to RGB.

    Control point positions must be strictly increasing, starting at 0
    and ending at 1. When blend_background is set, renderers mix the
    mapped color with the background as lerp(bg, color, visibility).
    """

    name: str
    control_points: tuple
    blend_background: bool = False

    def __post_init__(self):
        pts = tuple((float(v), tuple(float(c) for c in rgb))
                    for v, rgb in self.control_points)
        object.__setattr__(self, "control_points", pts)
        vs = [v for v, _ in pts]
        if len(vs) < 2 or vs[0] != 0.0 or vs[-1] != 1.0:
            raise ValueError("control points must start at v=0 and end at v=1")
        if any(b <= a for a, b in zip(vs, vs[1:])):
            raise ValueError("control point positions must be strictly increasing")
        for _, rgb in pts:
            if len(rgb) != 3 or any(not 0.0 <= c <= 1.0 for c in rgb):
                raise ValueError("control colors must be RGB triples in [0, 1]")

    def _tables(self) -> tuple[np.ndarray, np.ndarray]:
        vs = np.array([v for v, _ in self.control_points], np.float64)
        cs = np.array([rgb for _, rgb in self.control_points], np.float64)
        return vs, cs

    def __call__(self, v: float) -> tuple[float, float, float]:
        rgb = self.eval_batch(np.array([v], np.float64))[0]
        return float(rgb[0]), float(rgb[1]), float(rgb[2])

    def eval_batch(self, v: np.ndarray) -> np.ndarray:
        """Vectorized evaluation; inputs are clamped to [0, 1]."""
        vs, cs = self._tables()
        v = np.clip(np.asarray(v, np.float64), 0.0, 1.0)
        return np.stack([np.interp(v, vs, cs[:, c]) for c in range(3)], axis=-1)


def tf_eval(tf: TransferFunction, v: float) -> tuple[float, float, float]:
    return tf(v)


def tf_grayscale(blend_background: bool = False) -> TransferFunction:
    return TransferFunction("gray", ((0.0, (0.0, 0.0, 0.0)), (1.0, (1.0, 1.0, 1.0))),
                            blend_background)


def tf_jet(blend_background: bool = False) -> TransferFunction:
    # classic blue->cyan->yellow->red ramp; stand-in stops, documented here
    return TransferFunction("jet", (
        (0.0, (0.0, 0.0, 0.5)),
        (0.125, (0.0, 0.0, 1.0)),
        (0.375, (0.0, 1.0, 1.0)),
        (0.625, (1.0, 1.0, 0.0)),
        (0.875, (1.0, 0.0, 0.0)),
        (1.0, (0.5, 0.0, 0.0)),
    ), blend_background)


def tf_bluewhite(blend_background: bool = False) -> TransferFunction:
    # emission-ramp style: deep blue through azure to white
    return TransferFunction("bluewhite", (
        (0.0, (0.02, 0.05, 0.25)),
        (0.5, (0.25, 0.5, 0.9)),
        (1.0, (1.0, 1.0, 1.0)),
    ), blend_background)


BUILTIN_TFS = {
    "gray": tf_grayscale,
    "jet": tf_jet,
    "bluewhite": tf_bluewhite,
}


def builtin_tf(name: str, blend_background: bool = False) -> TransferFunction:
    try:
        return BUILTIN_TFS[name](blend_background)
    except KeyError:
        raise ValueError(f"unknown transfer function {name!r}; "
                         f"choose from {sorted(BUILTIN_TFS)}") from None


@dataclass
class Film:
    """HDR accumulation buffer; the displayed value is accum / subframes."""

    width: int
    height: int
    accum: np.ndarray = field(init=False)
    subframes: int = field(init=False, default=0)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("film dimensions must be positive")
        self.accum = np.zeros((self.height, self.width, 3), np.float32)

    def accumulate(self, subframe: np.ndarray) -> None:
        subframe = np.asarray(subframe, np.float32)
        if subframe.shape != self.accum.shape:
            raise DimMismatchError(
                f"subframe shape {subframe.shape} != film {self.accum.shape}"
            )
        self.accum += subframe
        self.subframes += 1

    def mean(self) -> np.ndarray:
        return self.accum / np.float32(max(self.subframes, 1))


def tonemap_8bit(film: Film) -> np.ndarray:
    """Average the accumulated subframes and quantize; no gamma, rounding
    half away from zero."""
    mean = np.clip(film.mean(), 0.0, 1.0).astype(np.float64)
    return np.floor(mean * 255.0 + 0.5).astype(np.uint8)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """8-bit peak signal-to-noise ratio in dB; +inf for identical images."""
    a = np.asarray(a, np.uint8)
    b = np.asarray(b, np.uint8)
    if a.shape != b.shape:
        raise DimMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def write_ppm(image: np.ndarray, sink) -> None:
    """Binary P6, maxval 255, rows top to bottom."""
    image = np.asarray(image, np.uint8)
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise ValueError(f"expected a (H, W, 3) uint8 image, got shape {image.shape}")
    height, width = image.shape[:2]
    try:
        sink.write(b"P6\n%d %d\n255\n" % (width, height))
        sink.write(image.tobytes())
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def read_ppm(source) -> np.ndarray:
    data = source.read() if hasattr(source, "read") else bytes(source)
    if not data.startswith(b"P6"):
        raise ValueError("not a binary P6 stream")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    pixels = np.frombuffer(data, np.uint8, count=width * height * 3, offset=pos)
    return pixels.reshape(height, width, 3).copy()
