"""Image handles and the few pixel operations the visual tools need."""

from __future__ import annotations

import base64
import io
import mimetypes
from dataclasses import dataclass
from pathlib import Path

from PIL import Image


class ImageDecodeError(ValueError):
    pass


@dataclass(frozen=True)
class ImageData:
    """Opaque image handle: raw bytes plus declared media type."""

    data: bytes
    media_type: str = "image/png"


def load_image(path: str | Path) -> ImageData:
    path = Path(path)
    media_type = mimetypes.guess_type(path.name)[0] or "image/png"
    return ImageData(data=path.read_bytes(), media_type=media_type)


def decode_size(image: ImageData) -> tuple[int, int]:
    try:
        with Image.open(io.BytesIO(image.data)) as im:
            return im.size
    except Exception as exc:
        raise ImageDecodeError(f"cannot decode image: {exc}") from exc


def crop_png(image: ImageData, rect: tuple[int, int, int, int]) -> bytes:
    """Copy the half-open pixel rect out of the image as PNG bytes."""
    with Image.open(io.BytesIO(image.data)) as im:
        patch = im.crop(rect).copy()
    buf = io.BytesIO()
    patch.save(buf, format="PNG")
    return buf.getvalue()


def thumbnail_png(image: ImageData, max_side: int = 512) -> bytes:
    with Image.open(io.BytesIO(image.data)) as im:
        copy = im.copy()
    copy.thumbnail((max_side, max_side))
    buf = io.BytesIO()
    copy.save(buf, format="PNG")
    return buf.getvalue()


def to_data_url(data: bytes, media_type: str) -> str:
    return f"data:{media_type};base64,{base64.b64encode(data).decode('ascii')}"


def solid_png(width: int, height: int, color=(200, 200, 200)) -> bytes:
    """Tiny synthetic image, used by tests and dataset fixtures."""
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="PNG")
    return buf.getvalue()
