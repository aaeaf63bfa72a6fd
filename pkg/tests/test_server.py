import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from radiofield import server as server_mod
from radiofield.cli import main
from radiofield.coverage import load_map
from radiofield.server import build_state, create_app


@pytest.fixture(scope="module")
def served(small_experiment):
    state = build_state(small_experiment["ckpt_path"])
    app = create_app(state)
    with TestClient(app) as client:
        yield {"client": client, "state": state, "exp": small_experiment}


def predict_body(**overrides):
    body = {"tx": [0.0, 0.0, 8.0], "pattern_id": 0, "height": 1.5,
            "resolution": 16}
    body.update(overrides)
    return body


class TestHealth:
    def test_ok_with_hashes(self, served):
        r = served["client"].get("/health")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "ok"
        assert len(body["model_hash"]) == 64
        assert len(body["scene_hash"]) == 64
        assert body["p_min_db"] == -160.0

    def test_hashes_stable_across_requests(self, served):
        a = served["client"].get("/health").json()
        b = served["client"].get("/health").json()
        assert a["model_hash"] == b["model_hash"]
        assert a["scene_hash"] == b["scene_hash"]

    def test_model_hash_tracks_checkpoint(self, served, tmp_path):
        # a different checkpoint file must produce a different hash
        import shutil
        other = tmp_path / "other.rpnc"
        shutil.copyfile(served["exp"]["ckpt_path"], other)
        with open(other, "r+b") as fh:
            fh.seek(-4, 2)
            fh.write(b"\x01\x02\x03\x04")
        from radiofield.checkpoint import file_hash
        assert file_hash(other) != file_hash(served["exp"]["ckpt_path"])


class TestScene:
    def test_outline_matches_scene_json(self, served):
        r = served["client"].get("/scene")
        assert r.status_code == 200
        body = r.json()
        scene_dict = served["exp"]["scene_dict"]
        boxes = [p for p in scene_dict["primitives"] if p["type"] == "box"]
        got_boxes = [f for f in body["footprints"] if f["type"] == "box"]
        assert len(got_boxes) == len(boxes)
        for prim, got in zip(boxes, got_boxes):
            np.testing.assert_allclose(got["xy"][0], prim["min"][:2], atol=1e-9)
            np.testing.assert_allclose(got["xy"][2], prim["max"][:2], atol=1e-9)
        assert len(body["probes"]) > 0
        lo = body["bounds"]["min"]
        hi = body["bounds"]["max"]
        for p in body["probes"]:
            assert all(lo[i] - 1e-9 <= p[i] <= hi[i] + 1e-9 for i in range(3))


class TestPredict:
    def test_shape_and_range(self, served):
        r = served["client"].post("/predict", json=predict_body(resolution=32))
        assert r.status_code == 200
        body = r.json()
        assert body["resolution"] == 32
        assert len(body["values_norm"]) == 1024
        assert all(0 < v < 1 for v in body["values_norm"])
        assert body["elapsed_ms"] > 0

    def test_bad_pattern_names_field(self, served):
        r = served["client"].post("/predict", json=predict_body(pattern_id=9))
        assert r.status_code == 400
        assert r.json()["field"] == "pattern_id"

    def test_bad_resolution_names_field(self, served):
        for res in (4, 1000, "x"):
            r = served["client"].post("/predict", json=predict_body(resolution=res))
            assert r.status_code == 400
            assert r.json()["field"] == "resolution"

    def test_tx_outside_bounds_names_field(self, served):
        r = served["client"].post("/predict", json=predict_body(tx=[900, 0, 8]))
        assert r.status_code == 400
        assert r.json()["field"] == "tx"

    def test_height_out_of_bounds_names_field(self, served):
        r = served["client"].post("/predict", json=predict_body(height=1e4))
        assert r.status_code == 400
        assert r.json()["field"] == "height"

    def test_identical_requests_identical_values(self, served):
        a = served["client"].post("/predict", json=predict_body()).json()
        b = served["client"].post("/predict", json=predict_body()).json()
        assert a["values_norm"] == b["values_norm"]

    def test_point_queries(self, served):
        r = served["client"].post("/predict", json=predict_body(
            point_queries=[[1.0, 2.0, 1.5], [3.0, -4.0, 1.5]]))
        assert r.status_code == 200
        results = r.json()["point_results"]
        assert len(results) == 2
        for pr in results:
            assert 0 < pr["p_norm"] < 1
            expected_db = -160.0 + pr["p_norm"] * 110.0
            assert pr["p_db"] == pytest.approx(expected_db, abs=1e-9)

    def test_matches_cli_predict_bit_for_bit(self, served, tmp_path):
        out = tmp_path / "srv.rpnm"
        assert main(["predict", "--model", str(served["exp"]["ckpt_path"]),
                     "--tx", "0,0,8", "--pattern", "0", "--height", "1.5",
                     "--res", "16", "--out", str(out)]) == 0
        _, file_values = load_map(out)
        r = served["client"].post("/predict", json=predict_body()).json()
        server_values = np.array(r["values_norm"]).reshape(16, 16)
        assert np.array_equal(file_values.astype(np.float32),
                              server_values.astype(np.float32))

    def test_concurrent_identical_requests_agree(self, served):
        results = [None] * 4
        def hit(i):
            results[i] = served["client"].post(
                "/predict", json=predict_body()).json()["values_norm"]
        threads = [threading.Thread(target=hit, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert all(r == results[0] for r in results)


class TestReload:
    def test_swap_returns_503_then_serves_new_model(self, small_experiment,
                                                    monkeypatch):
        state = build_state(small_experiment["ckpt_path"])
        app = create_app(state)
        old_hash = state.snapshot().model_hash

        slow_load = server_mod._load_snapshot
        def delayed(path):
            time.sleep(0.4)
            return slow_load(path)
        monkeypatch.setattr(server_mod, "_load_snapshot", delayed)

        with TestClient(app) as client:
            saw_503 = []
            def reloader():
                state.reload(small_experiment["ckpt_path"])
            t = threading.Thread(target=reloader)
            t.start()
            deadline = time.time() + 2.0
            while t.is_alive() and time.time() < deadline:
                r = client.post("/predict", json=predict_body(resolution=8))
                if r.status_code == 503:
                    saw_503.append(True)
                    break
            t.join()
            assert saw_503, "a request during the swap should see 503"
            r = client.post("/predict", json=predict_body(resolution=8))
            assert r.status_code == 200
        assert state.snapshot().model_hash == old_hash  # same file reloaded

    def test_no_mixed_model_responses(self, small_experiment, tmp_path):
        # swap to a checkpoint with different weights; every response must
        # equal one model's full output, never a mixture
        import shutil
        from radiofield.checkpoint import load_checkpoint, save_checkpoint
        from radiofield.model import ModelConfig

        other = tmp_path / "variant.rpnc"
        arrays, header = load_checkpoint(small_experiment["ckpt_path"])
        arrays = {k: v * 1.1 for k, v in arrays.items()}
        save_checkpoint(other, arrays, ModelConfig.from_dict(header["model_config"]),
                        train_config={}, p_min_db=header["P_min_db"],
                        p_max_db=header["P_max_db"], scene_hash=header["scene_hash"],
                        scene=header["scene"], prep=header["prep"])

        state = build_state(small_experiment["ckpt_path"])
        app = create_app(state)
        with TestClient(app) as client:
            ref_a = client.post("/predict", json=predict_body(resolution=8)
                                ).json()["values_norm"]
            state.reload(other)
            ref_b = client.post("/predict", json=predict_body(resolution=8)
                                ).json()["values_norm"]
            assert ref_a != ref_b

            outputs = []
            stop = threading.Event()
            def hammer():
                while not stop.is_set():
                    r = client.post("/predict", json=predict_body(resolution=8))
                    if r.status_code == 200:
                        outputs.append(r.json()["values_norm"])
            threads = [threading.Thread(target=hammer) for _ in range(2)]
            for t in threads:
                t.start()
            for path in (small_experiment["ckpt_path"], other,
                         small_experiment["ckpt_path"], other):
                state.reload(path)
            stop.set()
            for t in threads:
                t.join()
        assert outputs
        for values in outputs:
            assert values == ref_a or values == ref_b
