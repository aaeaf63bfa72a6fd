import json

import pytest

from radiofield.dataset import generate_dataset, load_dataset, receiver_grid, sample_transmitters
from radiofield.geometry import normalize_scene, sample_point_cloud, scene_from_dict
from radiofield.oracle import TraceConfig
from radiofield.scenes import courtyard_scene


def ground_plane_dict(half=1e4, reflectivity=0.5):
    """Large ground plane at z=0 built from two triangles."""
    return [
        {"type": "triangle", "v": [[-half, -half, 0], [half, -half, 0], [half, half, 0]],
         "material": {"reflection_amplitude": reflectivity}},
        {"type": "triangle", "v": [[-half, -half, 0], [half, half, 0], [-half, half, 0]],
         "material": {"reflection_amplitude": reflectivity}},
    ]


@pytest.fixture()
def ground_scene():
    return scene_from_dict({"units": "m", "primitives": ground_plane_dict()})


@pytest.fixture()
def empty_scene():
    # A far-away sliver so the primitive list is non-empty but nothing occludes.
    prim = {"type": "triangle",
            "v": [[9e5, 9e5, 9e5], [9e5 + 1, 9e5, 9e5], [9e5, 9e5 + 1, 9e5]],
            "material": {"reflection_amplitude": 0.0}}
    return scene_from_dict({"units": "m", "primitives": [prim]})


@pytest.fixture(scope="session")
def small_experiment(tmp_path_factory):
    """A tiny but complete experiment: scene file, dataset, trained checkpoint."""
    from radiofield.model import ModelConfig
    from radiofield.training import TrainConfig, prepare_pipeline, save_trained, train

    root = tmp_path_factory.mktemp("small")
    scene_dict = courtyard_scene(size=40.0, wall_height=12.0, building=(8.0, 8.0, 6.0))
    scene_path = root / "scene.json"
    scene_path.write_text(json.dumps(scene_dict))

    scene = scene_from_dict(scene_dict)
    sample_point_cloud(scene, 0.04, 1)
    normalize_scene(scene)
    cfg = TraceConfig()
    tx = sample_transmitters(scene, 6, seed=5, z_min=3.0, z_max=10.0)
    rx, dims = receiver_grid(scene, 8, 8, [1.5])
    data_path = root / "small.rpnd"
    generate_dataset(scene, tx, [0, 1], rx, cfg, data_path,
                     prep={"density": 0.04, "sample_seed": 1}, rx_dims=dims)
    ds = load_dataset(data_path)

    mcfg = ModelConfig()
    tcfg = TrainConfig(batch_size=64, epochs=3, seed=3, patience=0)
    pipeline = prepare_pipeline(ds, mcfg)
    result = train(ds, mcfg, tcfg, pipeline=pipeline)
    ckpt_path = root / "small.rpnc"
    save_trained(ckpt_path, result, ds)
    return {
        "root": root,
        "scene_path": scene_path,
        "scene_dict": scene_dict,
        "data_path": data_path,
        "ckpt_path": ckpt_path,
        "dataset": ds,
        "model_cfg": mcfg,
        "train_cfg": tcfg,
        "pipeline": pipeline,
        "result": result,
    }
