import math

import pytest

import mvgeo

# from tests/oracles/geo_oracle.py
PIXEL_Y = 584.0649708325839369
HAVERSINE_1E4 = 11.12263425710946406
ANTIPODAL = 20020741.66279703435


def cam(lat=0.0, lng=0.0, yaw=0.0, h=2.5):
    return mvgeo.CameraPose(mvgeo.GeoCoordinate(lat, lng), yaw, h)


def test_version():
    assert mvgeo.__version__


def test_projection_matches_oracle():
    p = mvgeo.pixel_from_geo(cam(), mvgeo.GeoCoordinate(0.0001, 0.0))
    assert p.x == pytest.approx(1024.0, rel=1e-14)
    assert p.y == pytest.approx(PIXEL_Y, rel=1e-13)
    g = mvgeo.geo_from_pixel(cam(), p)
    assert g.lat == pytest.approx(0.0001, abs=1e-12)
    assert g.lng == pytest.approx(0.0, abs=1e-12)


def test_haversine():
    a, b = mvgeo.GeoCoordinate(0, 0), mvgeo.GeoCoordinate(0.0001, 0)
    assert mvgeo.haversine_distance(a, b) == pytest.approx(HAVERSINE_1E4, rel=1e-12)
    assert mvgeo.haversine_distance(a, mvgeo.GeoCoordinate(0, 180)) == pytest.approx(ANTIPODAL, rel=1e-15)


def test_errors_carry_codes():
    with pytest.raises(mvgeo.MvgeoError) as info:
        mvgeo.GeoCoordinate(91.0, 0.0)
    assert info.value.code == "InvalidCoordinate"
    with pytest.raises(mvgeo.MvgeoError):
        mvgeo.geo_from_pixel(cam(), mvgeo.PixelPoint(10.0, 100.0))


def test_assign():
    inf = math.inf
    assert mvgeo.assign([[1, 2], [2, 4]]) == [(0, 1), (1, 0)]
    assert mvgeo.assign([[1, 2], [2, 4]], greedy=True) == [(0, 0), (1, 1)]
    assert mvgeo.assign([[0.0, inf], [0.0, inf]]) == [(0, 0)]


def test_boxes_and_matching():
    a = mvgeo.BoundingBox(0, 0, 10, 10)
    assert mvgeo.iou(a, a) == 1.0
    assert mvgeo.iou(a, mvgeo.BoundingBox(20, 20, 30, 30)) == 0.0
    c = cam(34.1478, -118.1445)
    box, z_src, z_dst = mvgeo.project_box(mvgeo.BoundingBox(1000, 540, 1040, 600), c, c)
    assert box.as_tuple() == pytest.approx((1000, 540, 1040, 600), abs=1e-6)
    assert z_src == pytest.approx(z_dst)

    dets = [mvgeo.Detection(mvgeo.BoundingBox(1000, 540, 1040, 600), 0.9, 0, 0, [1.0, 0.0])]
    result = mvgeo.cross_view_match(dets, c, dets, c)
    assert [(p["x"], p["y"]) for p in result["pairs"]] == [(0, 0)]
    assert result["unmatched_x"] == [] and result["unmatched_y"] == []


def test_triangulation_closed_form():
    base = mvgeo.GeoCoordinate(34.0, -118.0)
    target = mvgeo.geo_from_enu(base, 10.0, 10.0)
    obs = []
    for east in (0.0, 20.0):
        c = mvgeo.CameraPose(mvgeo.geo_from_enu(base, east, 0.0), 0.0, 2.5)
        obs.append(mvgeo.Observation(c, mvgeo.pixel_from_geo(c, target)))
    geo, residual = mvgeo.triangulate(obs)
    assert mvgeo.haversine_distance(geo, target) < 1e-6
    assert residual < 1e-6


def test_losses():
    assert mvgeo.softmax_log_loss([0.0, 0.0], 0) == pytest.approx(math.log(2))
    assert mvgeo.smooth_l1([0.5], [0.0]) == 0.125
    assert mvgeo.smooth_l1([2.0], [0.0]) == 1.5
    assert mvgeo.contrastive_loss([0.2, 0.4], [0.2, 0.4], False, 1.0) == 0.5
    o = mvgeo.GeoCoordinate(0, 0)
    assert mvgeo.rmse_loss([o], [mvgeo.GeoCoordinate(0.0001, 0)]) == pytest.approx(HAVERSINE_1E4, rel=1e-12)


def test_simulate_and_pipeline(tmp_path):
    cfg = mvgeo.SimConfig()
    cfg.n_objects = 10
    cfg.street_length_m = 60.0
    truth = mvgeo.simulate(cfg, tmp_path / "scene")
    assert len(truth) == 10
    assert mvgeo.validate_dataset(tmp_path / "scene") == []

    matches, objects = mvgeo.run_pipeline(tmp_path / "scene", tmp_path / "scene" / "detections.json", jobs=2)
    assert matches and len(objects) == 10
    ev = mvgeo.evaluate_simulation(cfg)
    assert ev["reid_accuracy"] == 1.0
    assert ev["triangulated"]["mae_m"] < 1e-6


def test_sweep_rows():
    base = mvgeo.SimConfig()
    base.n_objects = 10
    base.street_length_m = 60.0
    rows = mvgeo.sweep(base, "yaw_noise_deg", [0.0, 2.0], seeds=3)
    assert [r["value"] for r in rows] == [0.0, 2.0]
    assert rows[0]["seeds"] == 3
    assert rows[1]["mae_m"] > rows[0]["mae_m"]
