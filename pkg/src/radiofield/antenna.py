"""Transmitter antenna radiation patterns.

Four built-in patterns, selected by id.  Gains are dBi as a pure function of
direction in the antenna frame, floored at -40 dBi; `orientation` rotates the
antenna frame within the world frame (identity by default).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

GAIN_FLOOR_DBI = -40.0
PATTERN_COUNT = 4

PATTERN_NAMES = {0: "isotropic", 1: "patch", 2: "dipole", 3: "sector"}


def _patch_gain(dirs: np.ndarray) -> np.ndarray:
    # Boresight +x, cosine-squared power falloff, 6 dBi peak, dead behind.
    c = np.clip(dirs[:, 0], 0.0, 1.0)
    with np.errstate(divide="ignore"):
        g = 6.0 + 20.0 * np.log10(c)
    return g


def _dipole_gain(dirs: np.ndarray) -> np.ndarray:
    # Vertical half-wave dipole: 2.15 dBi peak at the horizon, nulls at the poles.
    ct = np.clip(dirs[:, 2], -1.0, 1.0)
    st = np.sqrt(np.maximum(1e-12, 1.0 - ct * ct))
    e = np.cos(0.5 * np.pi * ct) / st
    with np.errstate(divide="ignore"):
        g = 2.15 + 20.0 * np.log10(np.abs(e))
    return g


def _sector_gain(dirs: np.ndarray) -> np.ndarray:
    # 8 dBi sector aimed at +x: parabolic rolloff, 30 deg half-power widths.
    phi = np.arctan2(dirs[:, 1], dirs[:, 0])
    theta = np.arccos(np.clip(dirs[:, 2], -1.0, 1.0))
    w = np.pi / 6.0
    return 8.0 - 12.0 * (phi / w) ** 2 - 12.0 * ((theta - np.pi / 2.0) / w) ** 2


_PATTERN_FUNCS = {
    0: lambda dirs: np.zeros(len(dirs)),
    1: _patch_gain,
    2: _dipole_gain,
    3: _sector_gain,
}


@dataclass(frozen=True)
class AntennaPattern:
    pattern_id: int
    orientation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        if self.pattern_id not in _PATTERN_FUNCS:
            raise ValidationError(
                f"pattern_id must be in [0, {PATTERN_COUNT - 1}], got {self.pattern_id}"
            )

    def gain_dbi(self, directions: np.ndarray) -> np.ndarray:
        """Gain toward world-frame unit directions; shape-preserving over (N, 3)."""
        d = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        local = d @ self.orientation  # world -> antenna frame (R^T d, rows)
        g = _PATTERN_FUNCS[self.pattern_id](local)
        g = np.where(np.isfinite(g), g, GAIN_FLOOR_DBI)
        return np.maximum(g, GAIN_FLOOR_DBI)

    def gain_linear(self, directions: np.ndarray) -> np.ndarray:
        return 10.0 ** (self.gain_dbi(directions) / 10.0)
