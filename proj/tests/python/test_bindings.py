import json

import numpy as np
import pytest

import gyolo


def test_counts_for_nano_variants():
    assert gyolo.count_params("yolov11", "n") == 2591579
    assert gyolo.count_params("g-yolov11", "n") == 675995
    assert gyolo.count_layers("g-yolov11", "n") == 397
    assert abs(gyolo.count_flops("g-yolov11", "n") / 1e9 - 2.3) < 0.05


def test_summary_and_comparison_json():
    s = json.loads(gyolo.summary_json("g-yolov11", "s"))
    assert s["variant"] == "G-YOLOv11s"
    assert len(s["nodes"]) == 24
    c = json.loads(gyolo.comparison_json("m"))
    assert c["base"]["params"] > c["ghost"]["params"]


def test_export_arch_round_trips_through_json():
    g = json.loads(gyolo.export_arch("g-yolov11", "l", nc=4))
    assert len(g["nodes"]) == 24
    assert g["nc"] == 4


def test_bad_names_raise_value_error():
    with pytest.raises(ValueError):
        gyolo.count_params("yolov8", "n")
    with pytest.raises(gyolo.ArchError):
        gyolo.variant_name("g-yolov11", "q")


def test_forward_shapes_and_determinism():
    m = gyolo.Model("g-yolov11", "n", seed=3)
    assert m.variant == "G-YOLOv11n"
    x = np.full((3, 64, 96), 0.5, dtype=np.float32)
    a = m.forward(x)
    b = m.forward(x)
    assert [t.shape for t in a] == [(1, 73, 8, 12), (1, 73, 4, 6), (1, 73, 2, 3)]
    for p, q in zip(a, b):
        assert np.array_equal(p, q)


def test_detect_returns_clipped_boxes():
    m = gyolo.Model("g-yolov11", "n", nc=2, seed=7)
    rng = np.random.default_rng(0)
    img = rng.random((3, 100, 140), dtype=np.float32)
    dets = m.detect(img, imgsz=128, conf=0.01)
    for d in dets:
        x1, y1, x2, y2 = d["box"]
        assert 0 <= x1 <= x2 <= 140 and 0 <= y1 <= y2 <= 100
        assert d["confidence"] >= 0.01
        assert d["class_id"] in (0, 1)


def test_weights_file_round_trip(tmp_path):
    path = tmp_path / "g_n.gwtc"
    learnable = gyolo.init_weights("g-yolov11", "n", path, seed=5)
    assert learnable == 675995
    names = dict(gyolo.weight_names(path))
    assert names["node0.cv1.weight"] == [4, 3, 3, 3]
    assert names["node0.cv2.weight"] == [4, 1, 5, 5]
    x = np.full((1, 3, 32, 32), 0.25, dtype=np.float32)
    a = gyolo.Model("g-yolov11", "n", weights=path).forward(x)
    b = gyolo.Model("g-yolov11", "n", seed=5).forward(x)
    for p, q in zip(a, b):
        assert np.array_equal(p, q)
    with pytest.raises(gyolo.BindError):
        gyolo.Model("yolov11", "n", weights=path)


def test_nms_and_iou():
    box = [0, 0, 10, 10]
    assert gyolo.iou(box, box) == 1.0
    kept = gyolo.nms(
        [
            {"class_id": 0, "confidence": 0.8, "box": box},
            {"class_id": 0, "confidence": 0.9, "box": box},
            {"class_id": 1, "confidence": 0.7, "box": box},
        ],
        0.7,
    )
    assert [(d["class_id"], d["confidence"]) for d in kept] == [(0, 0.9), (1, 0.7)]


def test_evaluate_perfect_and_missed():
    truths = [{"class_id": 0, "box": [0, 0, 10, 10]}, {"class_id": 1, "box": [50, 50, 60, 60]}]
    perfect = [{"class_id": t["class_id"], "confidence": 0.9, "box": t["box"]} for t in truths]
    r = gyolo.evaluate([{"image": "a", "detections": perfect, "truths": truths}], 2)
    assert r["valid"] and r["map50"] == 1.0 and r["map50_95"] == 1.0
    r = gyolo.evaluate([{"detections": perfect[:1], "truths": truths}], 2)
    assert r["map50"] == 0.5
    assert not gyolo.evaluate([{"detections": perfect, "truths": []}], 2)["valid"]


def test_gradcheck_targets_pass_and_control_fails():
    targets = gyolo.gradcheck_targets()
    assert "ghost_conv" in targets and len(targets) == 9
    assert gyolo.gradcheck("ghost_conv", 1)["pass"]
    assert not gyolo.gradcheck("conv2d", 1, flip_sign=True)["pass"]


def test_images_and_labels(fixture_dir):
    img = gyolo.load_image(fixture_dir / "images" / "img_a.ppm")
    assert img.shape == (1, 3, 48, 64)
    assert img.dtype == np.float32 and 0.0 <= img.min() and img.max() <= 1.0
    assert gyolo.parse_labels("3 0.5 0.5 0.2 0.1") == [(3, 0.5, 0.5, 0.2, 0.1)]
    with pytest.raises(gyolo.LabelParseError):
        gyolo.parse_labels("3 0.5 0.5")
    assert gyolo.default_class_names()[3] == "fracture"
