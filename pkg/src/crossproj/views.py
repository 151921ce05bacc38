"""View bundles and the two view-selection policies.

Training draws n views uniformly at random (seeded, without replacement);
testing splits the frame sequence into n contiguous temporal groups and
takes the central frame of each, which spreads the selected viewpoints
across the trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import ValidationError
from .geometry import Camera
from .linker import DepthMap

__all__ = ["View", "ViewBundle", "select_views_train", "select_views_test", "DEFAULT_VIEW_COUNT"]

# Default number of views per scene.
DEFAULT_VIEW_COUNT = 3


@dataclass
class View:
    """One RGB-D view: color image path, depth map, camera, frame index."""

    frame_index: int
    color_path: str
    depth: Optional[DepthMap]
    camera: Optional[Camera]


@dataclass
class ViewBundle:
    """Ordered sequence of views of one scene."""

    views: List[View]

    def __post_init__(self):
        frames = [v.frame_index for v in self.views]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValidationError("frame indices must be strictly increasing")
        dims = {(v.depth.width, v.depth.height) for v in self.views if v.depth is not None}
        if len(dims) > 1:
            raise ValidationError(f"views disagree on image dimensions: {sorted(dims)}")

    def __len__(self):
        return len(self.views)


def _check_n(bundle: ViewBundle, n: int):
    if n < 1:
        raise ValidationError(f"view count must be >= 1, got {n}")
    if n > len(bundle):
        raise ValidationError(f"cannot select {n} views from a bundle of {len(bundle)}")


def select_views_train(bundle: ViewBundle, n: int, rng_seed: int) -> List[View]:
    """Sample n distinct views uniformly without replacement (seeded)."""
    _check_n(bundle, n)
    rng = np.random.default_rng(rng_seed)
    picks = rng.choice(len(bundle), size=n, replace=False)
    return [bundle.views[i] for i in picks]


def select_views_test(bundle: ViewBundle, n: int) -> List[View]:
    """Pick the central frame of each of n contiguous temporal groups.

    Group sizes differ by at most one, earlier groups taking the extra
    frame; within a group of length L the frame at offset floor(L / 2) is
    selected.  Deterministic; selected frames come out in increasing order.
    """
    _check_n(bundle, n)
    total = len(bundle)
    base, extra = divmod(total, n)
    out = []
    offset = 0
    for g in range(n):
        size = base + (1 if g < extra else 0)
        out.append(bundle.views[offset + size // 2])
        offset += size
    return out
