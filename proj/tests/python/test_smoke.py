import json
import math
import os
import random
import subprocess

import pytest

import beamline


def test_solve_satisfies_both_constraints():
    cfg = beamline.MonoConfig()
    rng = random.Random(7)
    for _ in range(200):
        e = rng.uniform(cfg.energy_min, cfg.energy_max)
        s = beamline.solve(cfg, e)
        a, b = math.radians(s["alpha_deg"]), math.radians(s["beta_deg"])
        lam_mm = cfg.hc / e * 1e-6
        assert abs(cfg.line_density * cfg.order * lam_mm - (math.sin(a) + math.sin(b))) < 1e-12
        assert abs(math.cos(b) / math.cos(a) - cfg.fixed_focus_ratio) < 1e-9
        assert abs(beamline.energy_from_beta(cfg, s["beta_deg"]) - e) < 1e-8 * e


def test_solve_400ev_motor_targets():
    s = beamline.solve(beamline.MonoConfig(), 400.0)
    assert round(s["mirror_deg"] * 3600) == 14340
    assert s["beta_deg"] == pytest.approx(-84.4825850604553, abs=1e-9)


def test_out_of_range_energy_raises():
    with pytest.raises(ValueError, match="OutOfRange"):
        beamline.solve(beamline.MonoConfig(), 10.0)


def test_fit_table_is_within_a_hundredth_of_a_degree():
    fits = beamline.fit_table(beamline.MonoConfig(), 250.0, 450.0, 21)
    assert fits["mirror_max_dev_deg"] < 0.01
    assert fits["grating_max_dev_deg"] < 0.01
    assert len(fits["mirror"]["coefficients"]) == 4


def test_request_encoding_is_byte_exact():
    line = beamline.encode_request(7, "move_abs", {"unit": "grating_pitch", "steps": 12000})
    assert line == '{"id":7,"op":"move_abs","args":{"unit":"grating_pitch","steps":12000}}\n'
    assert beamline.decode_request(line) == (7, "move_abs", {"unit": "grating_pitch", "steps": 12000})


def test_server_round_trip_and_session_kinds():
    with beamline.Server(clock_factor=1000.0) as srv:
        assert beamline.call("ping", port=srv.port)["connections"] >= 1
        with beamline.Client(port=srv.port) as c:
            r = c.call("set_energy", {"e_ev": 400.0, "wait": True})
            assert r["mirror_steps"] == 14340
            assert c.call("unit_state", {"unit": "mirror_pitch"})["position"] == 14340
            with pytest.raises(beamline.BeamlineError) as err:
                c.call("unit_state", {"unit": "ghost"})
            assert err.value.args[0] == "E_NO_UNIT"
        before = srv.accept_count
        for _ in range(5):
            beamline.call("get_energy", port=srv.port)
        assert srv.accept_count - before == 5


def test_scan_over_the_wire(tmp_path):
    out = tmp_path / "scan.csv"
    with beamline.Server(clock_factor=1000.0) as srv, beamline.Client(port=srv.port) as c:
        c.call("start_scan", {"e_start": 398.0, "e_end": 402.0, "step": 0.5, "dwell_s": 0.1, "output": str(out)})
        import time

        deadline = time.time() + 10
        while c.call("scan_status")["state"] == "running" and time.time() < deadline:
            time.sleep(0.01)
        pts = c.call("scan_points", {"since": 0})["points"]
    assert len(pts) == 9
    assert max(pts, key=lambda p: p["counts"])["e_set_ev"] == pytest.approx(400.0, abs=0.5)
    rows = out.read_text().strip().splitlines()
    assert len(rows) == 10


def test_connection_refused_is_e_conn():
    with beamline.Server() as srv:
        port = srv.port
    with pytest.raises(beamline.BeamlineError) as err:
        beamline.call("ping", port=port)
    assert err.value.args[0] == "E_CONN"
