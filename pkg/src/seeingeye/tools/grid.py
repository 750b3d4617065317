"""4x4 grid partitioning and the targeted region-captioning tool."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..media import ImageData, crop_png, decode_size, thumbnail_png

GRID_SIZE = 4
MAX_SELECTED_REGIONS = 3


class TooSmall(ValueError):
    pass


@dataclass(frozen=True)
class GridRegion:
    row: int
    col: int
    pixel_rect: tuple[int, int, int, int]
    caption: str | None = None


def _axis_cuts(dim: int) -> list[int]:
    # Integer remainder goes to the last band, so the first three are dim//4
    # wide and the last absorbs dim - 3*(dim//4).
    base = dim // GRID_SIZE
    return [0, base, 2 * base, 3 * base, dim]


def grid_partition(width: int, height: int) -> list[GridRegion]:
    """Row-major 4x4 tiling of a width x height raster (row 0 on top)."""
    if width < GRID_SIZE or height < GRID_SIZE:
        raise TooSmall(f"image {width}x{height} too small for a {GRID_SIZE}x{GRID_SIZE} grid")
    xs = _axis_cuts(width)
    ys = _axis_cuts(height)
    regions = []
    for row in range(GRID_SIZE):
        for col in range(GRID_SIZE):
            regions.append(
                GridRegion(
                    row=row,
                    col=col,
                    pixel_rect=(xs[col], ys[row], xs[col + 1], ys[row + 1]),
                )
            )
    return regions


def center_block_rect(width: int, height: int) -> tuple[int, int, int, int]:
    """The middle 2x2 block, used as the fallback crop."""
    xs = _axis_cuts(width)
    ys = _axis_cuts(height)
    return (xs[1], ys[1], xs[3], ys[3])


_PAIR_PATTERN = re.compile(r"[\(\[]?\s*(\d+)\s*,\s*(\d+)\s*[\)\]]?")
_INT_PATTERN = re.compile(r"\d+")


def parse_region_selection(reply: str, limit: int = MAX_SELECTED_REGIONS) -> list[tuple[int, int]]:
    """Extract up to ``limit`` valid (row, col) addresses from a model reply.

    Accepts "(r,c)" pairs (brackets or bare) and lone integers read as
    row-major flat indices 0..15. Out-of-range values are dropped.
    """
    selected: list[tuple[int, int]] = []
    covered: list[tuple[int, int]] = []
    for match in _PAIR_PATTERN.finditer(reply):
        covered.append(match.span())
        row, col = int(match.group(1)), int(match.group(2))
        if 0 <= row < GRID_SIZE and 0 <= col < GRID_SIZE:
            selected.append((row, col))
    for match in _INT_PATTERN.finditer(reply):
        if any(start <= match.start() < end for start, end in covered):
            continue
        flat = int(match.group(0))
        if 0 <= flat < GRID_SIZE * GRID_SIZE:
            selected.append(divmod(flat, GRID_SIZE))
    deduped: list[tuple[int, int]] = []
    for address in selected:
        if address not in deduped:
            deduped.append(address)
    return deduped[:limit]


def region_catalog_text(regions: list[GridRegion]) -> str:
    lines = ["The image is divided into a 4x4 grid of regions, addressed (row,col):"]
    for region in regions:
        x0, y0, x1, y1 = region.pixel_rect
        lines.append(f"({region.row},{region.col}): pixels x {x0}..{x1}, y {y0}..{y1}")
    return "\n".join(lines)


def smart_grid_caption(image: ImageData, query: str, context) -> "ToolResult":
    """Select the most informative grid regions for the query and caption them.

    One vision call picks 1-3 addresses from a thumbnail; each selected region
    is then cropped and captioned. If no valid address comes back, the center
    2x2 block is captioned instead and the result is flagged as fallback.
    """
    from ..backend import BackendError, ChatRequest, ImagePart, Message, TextPart
    from .registry import ToolResult, error_result

    if image is None:
        return error_result("smart_grid_caption needs an image in context")
    if context.backend is None or context.vision_model is None:
        return error_result("smart_grid_caption needs a vision backend in context")
    width, height = decode_size(image)
    regions = grid_partition(width, height)

    selection_prompt = (
        region_catalog_text(regions)
        + "\n\nWhich regions are most informative for this query?\n"
        + f"Query: {query}\n"
        + "Reply with 1 to 3 region addresses in (row,col) form, nothing else."
    )
    try:
        selection_reply = context.backend.complete(
            ChatRequest(
                model=context.vision_model,
                agent_role="translator",
                messages=(
                    Message(
                        role="user",
                        parts=(
                            TextPart(selection_prompt),
                            ImagePart(thumbnail_png(image), "image/png"),
                        ),
                    ),
                ),
                max_output_tokens=context.max_output_tokens,
                temperature=context.temperature,
                tag="grid_selection",
            )
        )
    except BackendError as exc:
        return error_result(f"smart_grid_caption backend failure: {exc}")

    addresses = parse_region_selection(selection_reply.text or "")
    fallback = not addresses
    if fallback:
        crops = [("fallback center 2x2 block", center_block_rect(width, height))]
        header = "selected regions: fallback center 2x2 block; "
    else:
        by_address = {(r.row, r.col): r for r in regions}
        crops = [(f"({row},{col})", by_address[(row, col)].pixel_rect) for row, col in addresses]
        header = "selected regions: " + ", ".join(label for label, _ in crops) + "; "

    captions = []
    artifacts = []
    for label, rect in crops:
        patch = crop_png(image, rect)
        artifacts.append(("crop_png", patch))
        caption_prompt = (
            f"Describe this image region in detail. Region {label} was selected for the "
            f"query: {query}\nReport only what is visible; do not infer or answer."
        )
        try:
            caption_reply = context.backend.complete(
                ChatRequest(
                    model=context.vision_model,
                    agent_role="translator",
                    messages=(
                        Message(
                            role="user",
                            parts=(TextPart(caption_prompt), ImagePart(patch, "image/png")),
                        ),
                    ),
                    max_output_tokens=context.max_output_tokens,
                    temperature=context.temperature,
                    tag="region_caption",
                )
            )
        except BackendError as exc:
            return error_result(f"smart_grid_caption backend failure: {exc}")
        captions.append(f"{label}: {(caption_reply.text or '').strip()}")

    return ToolResult(ok=True, content=header + " ".join(captions), artifacts=tuple(artifacts))
