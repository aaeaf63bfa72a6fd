"""Synthetic scene builders for demos and tests."""

from __future__ import annotations


def courtyard_scene(size: float = 60.0, wall_height: float = 20.0,
                    building=(12.0, 12.0, 8.0), wall_thickness: float = 0.5,
                    ground_reflectivity: float = 0.6, wall_reflectivity: float = 0.3,
                    building_reflectivity: float = 0.5) -> dict:
    """Walled court with a centered building: a ground plane (two triangles at
    z=0), four perimeter wall boxes, and one solid building box."""
    h = size / 2.0
    t = wall_thickness
    bx, by, bz = building
    ground_mat = {"reflection_amplitude": ground_reflectivity}
    wall_mat = {"reflection_amplitude": wall_reflectivity}
    bld_mat = {"reflection_amplitude": building_reflectivity}
    prims = [
        {"type": "triangle", "v": [[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0]],
         "material": ground_mat},
        {"type": "triangle", "v": [[-h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]],
         "material": ground_mat},
        {"type": "box", "min": [-h, -h, 0.0], "max": [-h + t, h, wall_height],
         "material": wall_mat},
        {"type": "box", "min": [h - t, -h, 0.0], "max": [h, h, wall_height],
         "material": wall_mat},
        {"type": "box", "min": [-h + t, -h, 0.0], "max": [h - t, -h + t, wall_height],
         "material": wall_mat},
        {"type": "box", "min": [-h + t, h - t, 0.0], "max": [h - t, h, wall_height],
         "material": wall_mat},
        {"type": "box", "min": [-bx / 2, -by / 2, 0.0], "max": [bx / 2, by / 2, bz],
         "material": bld_mat},
    ]
    return {"units": "m", "primitives": prims}


def single_building_scene(size: float = 60.0, building=(12.0, 12.0, 8.0)) -> dict:
    """Open ground plane with one centered building box (no walls)."""
    h = size / 2.0
    bx, by, bz = building
    return {
        "units": "m",
        "primitives": [
            {"type": "triangle", "v": [[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0]],
             "material": {"reflection_amplitude": 0.6}},
            {"type": "triangle", "v": [[-h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]],
             "material": {"reflection_amplitude": 0.6}},
            {"type": "box", "min": [-bx / 2, -by / 2, 0.0], "max": [bx / 2, by / 2, bz],
             "material": {"reflection_amplitude": 0.5}},
        ],
    }
