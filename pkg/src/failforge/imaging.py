"""Image payload handling: encoding, view selection, grid composition.

The grid layout puts camera views on rows and timesteps on columns, so a
start/end pair of K views composes to a 2-column, K-row picture. Cells are
pasted losslessly; round-tripping a cell out of an uncompressed grid gives
back the input pixels exactly.
"""

from __future__ import annotations

import base64
import io
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from PIL import Image

from .episode import FrameRef
from .errors import ShapeError
from .samples import ExecutionSample, PlanningSample, Sample
from .seeding import hash64

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".webp": "image/webp",
}


@dataclass(frozen=True)
class ImagePart:
    """One image payload for a chat request; label is prompt-side only."""

    media_type: str
    b64: str | None
    label: str = ""

    def to_wire(self) -> dict:
        if self.b64 is None:
            raise ShapeError(f"image part {self.label!r} has no pixel data")
        return {
            "type": "image_url",
            "image_url": {"url": f"data:{self.media_type};base64,{self.b64}"},
        }

    def decode(self) -> Image.Image:
        if self.b64 is None:
            raise ShapeError(f"image part {self.label!r} has no pixel data")
        return Image.open(io.BytesIO(base64.b64decode(self.b64)))


def media_type_for(path: str | Path) -> str:
    return _MEDIA_TYPES.get(Path(path).suffix.lower(), "image/png")


def load_image_part(path: str | Path, label: str = "") -> ImagePart:
    data = Path(path).read_bytes()
    return ImagePart(
        media_type=media_type_for(path),
        b64=base64.b64encode(data).decode("ascii"),
        label=label,
    )


def encode_image(img: Image.Image, label: str = "") -> ImagePart:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return ImagePart(
        media_type="image/png",
        b64=base64.b64encode(buf.getvalue()).decode("ascii"),
        label=label,
    )


def compose_grid(
    images: Sequence[tuple[str, int, Image.Image]],
    views: int,
    timesteps: int,
) -> Image.Image:
    """Compose (view_id, timestep, image) cells into one canvas.

    Rows are views in sorted view_id order, columns are timesteps in
    ascending order; output is (timesteps*W) x (views*H).
    """
    if len(images) != views * timesteps:
        raise ShapeError(f"need {views * timesteps} images for {views}x{timesteps}, got {len(images)}")
    view_ids = sorted({v for v, _, _ in images})
    steps = sorted({t for _, t, _ in images})
    if len(view_ids) != views or len(steps) != timesteps:
        raise ShapeError(
            f"images cover {len(view_ids)} views x {len(steps)} timesteps, "
            f"expected {views}x{timesteps}"
        )
    cells = {(v, t): img for v, t, img in images}
    if len(cells) != views * timesteps:
        raise ShapeError("duplicate (view, timestep) cell")
    sizes = {img.size for _, _, img in images}
    if len(sizes) != 1:
        raise ShapeError(f"mismatched cell sizes: {sorted(sizes)}")
    w, h = sizes.pop()

    canvas = Image.new("RGB", (timesteps * w, views * h))
    for k, view in enumerate(view_ids):
        for m, step in enumerate(steps):
            canvas.paste(cells[(view, step)].convert("RGB"), (m * w, k * h))
    return canvas


def grid_cell(grid: Image.Image, views: int, timesteps: int, row: int, col: int) -> Image.Image:
    """Cut cell (row, col) back out of a composed grid."""
    w = grid.width // timesteps
    h = grid.height // views
    return grid.crop((col * w, row * h, (col + 1) * w, (row + 1) * h))


def select_views(camera_ids: Sequence[str], view_limit: int, seed: int) -> list[str]:
    """Seeded view subset: all views for 0, else view_limit of them.

    Asking for more views than exist falls back to all of them, so 4-view
    policies still work on 3-camera recordings.
    """
    if view_limit not in (0, 1, 4):
        raise ShapeError(f"view_limit must be 0, 1 or 4, got {view_limit}")
    cams = sorted(set(camera_ids))
    if view_limit == 0 or view_limit >= len(cams):
        return cams
    rng = random.Random(seed)
    return sorted(rng.sample(cams, view_limit))


def _resolve(frame: FrameRef, corpus_root: str | Path | None, label: str) -> ImagePart:
    if corpus_root is None:
        return ImagePart(media_type=media_type_for(frame.path), b64=None, label=label)
    return load_image_part(Path(corpus_root) / frame.path, label=label)


def prepare_image_parts(
    sample: Sample,
    mode: str = "separated",
    view_limit: int = 0,
    corpus_root: str | Path | None = None,
    seed: int | None = None,
) -> list[ImagePart]:
    """Image payloads for a detection query over this sample.

    Separated mode emits one payload per (view, timestep); grid mode one
    composed payload (which needs pixel data, hence corpus_root). The view
    subset is drawn from a seed derived from the sample id unless given.
    """
    if mode not in ("separated", "grid"):
        raise ShapeError(f"unknown image mode {mode!r}")
    if seed is None:
        seed = hash64("views", sample.sample_id, view_limit)

    if isinstance(sample, PlanningSample):
        part = _resolve(sample.initial_image, corpus_root, "initial image")
        return [part]

    assert isinstance(sample, ExecutionSample)
    by_cam_start = {f.camera_id: f for f in sample.start_images}
    by_cam_end = {f.camera_id: f for f in sample.end_images}
    chosen = select_views(list(by_cam_start), view_limit, seed)

    if mode == "separated":
        parts = [
            _resolve(by_cam_start[cam], corpus_root, f"start view {i} ({cam})")
            for i, cam in enumerate(chosen, 1)
        ]
        parts += [
            _resolve(by_cam_end[cam], corpus_root, f"end view {i} ({cam})")
            for i, cam in enumerate(chosen, 1)
        ]
        return parts

    if corpus_root is None:
        raise ShapeError("grid composition needs pixel data; pass corpus_root")
    cells = []
    for cam in chosen:
        cells.append((cam, 0, load_image_part(Path(corpus_root) / by_cam_start[cam].path).decode()))
        cells.append((cam, 1, load_image_part(Path(corpus_root) / by_cam_end[cam].path).decode()))
    grid = compose_grid(cells, views=len(chosen), timesteps=2)
    label = f"grid of {len(chosen)} views (rows) x start/end (columns)"
    return [encode_image(grid, label=label)]
