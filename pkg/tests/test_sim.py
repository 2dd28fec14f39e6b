import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_allclose

from fovsafe.hil import HilParams
from fovsafe.robust import ErrorBounds
from fovsafe.se3 import RigidTransform, rotation_from_vector, rotation_to_vector
from fovsafe.sim import (
    ConfigError,
    Controller,
    HilScriptSegment,
    ScenarioConfig,
    TRACE_COLUMNS,
    WorldState,
    adversarial_scenario,
    config_from_dict,
    config_to_dict,
    default_scenario,
    load_scenario,
    observe,
    observe_estimated,
    randomized_scenario,
    run_scenario,
    save_scenario,
    step,
    validate_config,
    write_trace_csv,
    write_trace_jsonl,
)

from dataclasses import replace

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"
FLIP_X = rotation_from_vector(np.array([np.pi, 0.0, 0.0]))


def _overhead_config(**overrides):
    """Camera == end-effector frame, 1 m straight above the marker."""
    base = default_scenario()
    cfg = replace(
        base,
        extrinsics_true=RigidTransform.identity(),
        extrinsics_estimated=RigidTransform.identity(),
        initial_pose=RigidTransform(FLIP_X, np.array([0.0, 0.0, 1.0])),
        **overrides,
    )
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _assert_trees_close(a, b, path="$"):
    """Dict equality up to float round-off (rotvec <-> matrix conversions)."""
    assert type(a) is type(b), path
    if isinstance(a, dict):
        assert a.keys() == b.keys(), path
        for k in a:
            _assert_trees_close(a[k], b[k], f"{path}.{k}")
    elif isinstance(a, list):
        assert len(a) == len(b), path
        for i, (x, y) in enumerate(zip(a, b)):
            _assert_trees_close(x, y, f"{path}[{i}]")
    elif isinstance(a, float):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12), path
    else:
        assert a == b, path


def test_config_dict_round_trip():
    for cfg in (default_scenario(), adversarial_scenario(-1.0), randomized_scenario(4)):
        data = config_to_dict(cfg)
        again = config_to_dict(config_from_dict(data))
        _assert_trees_close(again, data)


def test_config_file_round_trip(tmp_path):
    cfg = randomized_scenario(11)
    path = tmp_path / "scenario.json"
    save_scenario(cfg, str(path))
    loaded = load_scenario(str(path))
    _assert_trees_close(config_to_dict(loaded), config_to_dict(cfg))


def test_shipped_scenarios_load():
    files = sorted(SCENARIO_DIR.glob("*.json"))
    assert len(files) >= 4
    for f in files:
        cfg = load_scenario(str(f))
        assert cfg.dt > 0.0


def test_validation_names_offending_keys():
    base = config_to_dict(default_scenario())

    def expect(mutate, fragment):
        data = json.loads(json.dumps(base))
        mutate(data)
        with pytest.raises(ConfigError, match=fragment):
            config_from_dict(data)

    expect(lambda d: d["camera"].update(fx=-1.0), "camera")
    expect(lambda d: d.update(robust_mode="sometimes"), "robust_mode")
    expect(lambda d: d["sim"].update(dt=0.0), "sim.dt")
    expect(lambda d: d["marker"].update(side=-0.1), "marker.side")
    expect(lambda d: d["error_bounds"].update(delta=-0.5), "error_bounds")
    expect(lambda d: d["gains"].update(sigma=-2.0), "gains.sigma")
    expect(lambda d: d["limits"].update(v_max=0.0), "limits")
    expect(lambda d: d.pop("initial_pose"), "initial_pose")
    expect(
        lambda d: d["hil"].update(script=[{"t0": 0.0, "t1": 1.0, "twist": [1, 2, 3]}]),
        r"hil.script\[0\]",
    )
    # injected error exceeding the assumed bounds is rejected up front
    expect(
        lambda d: d["extrinsics_true"].update(translation=[0.2, 0.0, 0.08]),
        "extrinsics_true",
    )


def test_validate_rejects_bad_script_order():
    cfg = replace(
        default_scenario(), hil_script=(HilScriptSegment(1.0, 0.5, np.zeros(6)),)
    )
    with pytest.raises(ConfigError, match=r"hil.script\[0\]"):
        validate_config(cfg)


def test_invalid_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="broken.json"):
        load_scenario(str(path))


def test_marker_corners_layout():
    cfg = replace(default_scenario(), marker_side=0.2)
    expected = np.array(
        [[-0.1, 0.1, 0.0], [0.1, 0.1, 0.0], [0.1, -0.1, 0.0], [-0.1, -0.1, 0.0]]
    )
    assert_allclose(cfg.marker_corners(), expected)


def test_injected_error_identity_for_matching_extrinsics():
    err = default_scenario().injected_error()
    assert_allclose(err.rotation, np.eye(3), atol=1e-15)
    assert_allclose(err.translation, np.zeros(3), atol=1e-15)


# ---------------------------------------------------------------------------
# World stepping and observation
# ---------------------------------------------------------------------------


def test_step_zero_twist_is_identity():
    state = WorldState(0.0, RigidTransform(FLIP_X, np.array([0.1, 0.2, 0.3])))
    out = step(state, np.zeros(6), 0.01)
    assert out.t == pytest.approx(0.01)
    assert_allclose(out.ee_pose.rotation, state.ee_pose.rotation)
    assert_allclose(out.ee_pose.translation, state.ee_pose.translation)


def test_step_translates_in_the_body_frame():
    pose = RigidTransform(FLIP_X, np.array([0.0, 0.0, 1.0]))
    u = np.array([0.1, 0.0, 0.0, 0.0, 0.0, 0.0])
    out = step(WorldState(0.0, pose), u, 0.5)
    assert_allclose(out.ee_pose.translation, pose.translation + pose.rotation @ [0.05, 0, 0],
                    atol=1e-15)
    assert_allclose(out.ee_pose.rotation, pose.rotation)


def test_step_accumulates_pure_rotation_exactly():
    pose = RigidTransform(np.eye(3), np.array([0.4, -0.1, 0.9]))
    state = WorldState(0.0, pose)
    u = np.array([0.0, 0.0, 0.0, 0.0, 0.0, np.pi])
    for _ in range(1000):
        state = step(state, u, 0.001)
    assert_allclose(state.ee_pose.rotation, rotation_from_vector([0, 0, np.pi]), atol=1e-9)
    assert_allclose(state.ee_pose.translation, pose.translation, atol=1e-12)
    assert state.t == pytest.approx(1.0)


def test_step_forward_then_back_returns(rng):
    pose = RigidTransform(FLIP_X, np.array([0.1, -0.2, 0.8]))
    u = rng.normal(size=6)
    state = WorldState(0.0, pose)
    state = step(state, u, 0.01)
    state = step(state, -u, 0.01)
    assert_allclose(state.ee_pose.translation, pose.translation, atol=1e-12)
    assert_allclose(state.ee_pose.rotation, pose.rotation, atol=1e-12)


def test_observation_from_overhead_pose():
    cfg = _overhead_config()
    state = WorldState(0.0, cfg.initial_pose)
    obs = observe(state, cfg)
    assert obs is not None
    got = {tuple(np.round(c, 9)) for c in obs.corners}
    assert got == {(x, y, 1.0) for x in (-0.05, 0.05) for y in (-0.05, 0.05)}
    # marker seen 1 m ahead, facing the camera
    assert_allclose(obs.pose.translation, [0.0, 0.0, 1.0], atol=1e-12)
    cam_in_marker = obs.pose.inverse()
    assert cam_in_marker.translation[2] == pytest.approx(1.0)


def test_observation_lost_outside_fov():
    cfg = _overhead_config()
    far = WorldState(0.0, RigidTransform(FLIP_X, np.array([5.0, 0.0, 1.0])))
    assert observe(far, cfg) is None
    behind = WorldState(0.0, RigidTransform(FLIP_X, np.array([0.0, 0.0, -0.5])))
    assert observe(behind, cfg) is None


def test_observation_matches_pixel_rectangle(rng):
    cfg = _overhead_config()
    cam = cfg.camera
    for _ in range(200):
        pose = RigidTransform(
            FLIP_X @ rotation_from_vector(rng.normal(size=3) * 0.15),
            np.array([rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(0.3, 1.5)]),
        )
        state = WorldState(0.0, pose)
        obs = observe(state, cfg)
        raw = observe_estimated(state, cfg)  # same extrinsics, never None
        if np.any(raw.corners[:, 2] <= 0.0):
            assert obs is None
            continue
        margins = (cam.normals @ raw.corners.T).min()
        if abs(margins) < 1e-9:
            continue  # razor edge: either answer is defensible
        pix = cam.project(raw.corners)
        inside = bool(
            np.all((pix[:, 0] >= 0) & (pix[:, 0] <= cam.width)
                   & (pix[:, 1] >= 0) & (pix[:, 1] <= cam.length))
        )
        assert (obs is not None) == inside


def test_estimated_observation_sees_through_believed_extrinsics():
    cfg = default_scenario()
    state = WorldState(0.0, cfg.initial_pose)
    est = observe_estimated(state, cfg)
    true = observe(state, cfg)
    # identical extrinsics: the two views coincide
    assert_allclose(est.corners, true.corners, atol=1e-12)
    cfg2 = randomized_scenario(2)
    state2 = WorldState(0.0, cfg2.initial_pose)
    est2 = observe_estimated(state2, cfg2)
    true2 = observe(state2, cfg2)
    assert np.abs(est2.corners - true2.corners).max() > 1e-4  # the error is visible


# ---------------------------------------------------------------------------
# Closed loop
# ---------------------------------------------------------------------------


def test_unfiltered_controller_applies_blended_twist():
    cfg = replace(_overhead_config(), cbf_enabled=False)
    controller = Controller(cfg)
    obs = observe_estimated(WorldState(0.0, cfg.initial_pose), cfg)
    u, info = controller.compute(obs, np.zeros(6))
    assert info["solution"].status == "unfiltered"
    expected = (1.0 - info["beta"]) * info["u_servo"]
    assert_allclose(info["u_nom"], expected, atol=1e-12)
    assert np.max(np.abs(u[:3])) <= cfg.v_max + 1e-12
    assert np.max(np.abs(u[3:])) <= cfg.w_max + 1e-12


def test_run_scenario_bitwise_deterministic():
    cfg = replace(randomized_scenario(3), duration=1.0)
    a = run_scenario(cfg)
    b = run_scenario(cfg)
    assert a.status == b.status
    assert len(a.records) == len(b.records)
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.u, rb.u)
        assert np.array_equal(ra.h, rb.h)
        assert ra.status == rb.status
    assert np.array_equal(a.estimated_h, b.estimated_h)


def test_servo_error_converges_without_operator():
    cfg = replace(
        default_scenario(),
        hil=HilParams(beta_max=0.0, h_safe=0.1),
        duration=12.5,  # ten time constants at sigma = 0.8
    )
    result = run_scenario(cfg)
    assert result.status == "completed"
    norms = [np.linalg.norm(r.e) for r in result.records]
    assert norms[-1] < 1e-3
    sampled = norms[::50]
    assert all(b <= a + 1e-12 for a, b in zip(sampled, sampled[1:]))
    # the marker stayed visible throughout
    assert result.true_h.min() > 0.0
    assert min(r.h_z for r in result.records) > 0.0


def test_result_exposes_true_barriers_matrix():
    cfg = replace(default_scenario(), duration=0.3)
    result = run_scenario(cfg)
    n = len(result.records)
    assert result.true_h.shape == (n, 16)
    assert result.estimated_h.shape == (n, 16)
    assert result.estimated_hz.shape == (n,)
    assert_allclose(result.true_h[0], result.records[0].h.reshape(-1))
    assert_allclose(result.final_error, result.records[-1].e)


def test_detection_loss_recorded_with_final_diagnostic():
    cfg = adversarial_scenario(cbf_enabled=False)
    result = run_scenario(cfg)
    assert result.status == "detection_lost"
    n_steps = int(round(cfg.duration / cfg.dt))
    assert 0 < len(result.records) < n_steps
    last = result.records[-1]
    assert last.h_min < 0.0  # the diagnostic sample shows the crossing
    assert result.detection_lost_time == pytest.approx(last.t)
    assert result.estimated_h.shape[0] == len(result.records)


def test_hil_script_is_windowed():
    push = np.array([0.2, 0, 0, 0, 0, 0])
    cfg = replace(
        _overhead_config(),
        hil_script=(HilScriptSegment(t0=0.1, t1=0.2, twist=push),),
        duration=0.3,
        cbf_enabled=False,
    )
    result = run_scenario(cfg)
    t = np.array([r.t for r in result.records])
    u_nom = np.array([r.u_nom for r in result.records])
    servo_only = (t < 0.1) | (t >= 0.2)
    # inside the window the blended twist is pulled toward the push
    inside = ~servo_only
    assert inside.any() and servo_only.any()
    beta = np.array([r.beta for r in result.records])
    assert np.all(beta[inside] > 0.0)
    gap = u_nom[inside, 0] - (1 - beta[inside]) * u_nom[servo_only][0, 0]
    assert np.all(u_nom[inside, 0] > u_nom[servo_only, 0].max() - 1e-12) or np.all(gap > 0)


# ---------------------------------------------------------------------------
# Trace output
# ---------------------------------------------------------------------------


def test_trace_columns_exact():
    assert TRACE_COLUMNS[:3] == ["t", "h00", "h01"]
    assert TRACE_COLUMNS[16] == "h33"
    assert TRACE_COLUMNS[17:20] == ["hz", "hmin", "beta"]
    assert TRACE_COLUMNS[20:26] == ["u0", "u1", "u2", "u3", "u4", "u5"]
    assert TRACE_COLUMNS[26:32] == ["unom0", "unom1", "unom2", "unom3", "unom4", "unom5"]
    assert TRACE_COLUMNS[32:38] == ["e0", "e1", "e2", "e3", "e4", "e5"]
    assert TRACE_COLUMNS[38:] == ["status", "fallback"]
    assert len(TRACE_COLUMNS) == 40


def test_trace_csv_layout(tmp_path):
    cfg = replace(default_scenario(), duration=0.25)
    result = run_scenario(cfg)
    path = tmp_path / "trace.csv"
    write_trace_csv(result.records, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(TRACE_COLUMNS)
    assert len(lines) == len(result.records) + 1
    first = lines[1].split(",")
    assert float(first[0]) == pytest.approx(0.0)
    assert first[38] in {"optimal", "unfiltered"}
    assert first[39] in {"0", "1"}
    assert float(first[19]) == pytest.approx(result.records[0].beta)


def test_trace_jsonl_layout(tmp_path):
    cfg = replace(default_scenario(), duration=0.25)
    result = run_scenario(cfg)
    path = tmp_path / "trace.jsonl"
    write_trace_jsonl(result.records, str(path))
    lines = path.read_text().strip().splitlines()
    assert len(lines) == len(result.records)
    for line in lines:
        row = json.loads(line)
        assert list(row.keys()) == TRACE_COLUMNS
    assert json.loads(lines[0])["hmin"] == pytest.approx(result.records[0].h_min)


# ---------------------------------------------------------------------------
# Scenario builders
# ---------------------------------------------------------------------------


def test_randomized_scenario_deterministic_and_on_the_bound():
    a = randomized_scenario(5)
    b = randomized_scenario(5)
    assert config_to_dict(a) == config_to_dict(b)
    err = a.injected_error()
    angle = np.linalg.norm(rotation_to_vector(err.rotation))
    assert angle == pytest.approx(a.error_bounds.epsilon, abs=1e-9)
    assert np.linalg.norm(err.translation) == pytest.approx(a.error_bounds.delta, abs=1e-12)
    assert a.robust_mode == "full_theta"
    assert a.seed == 5
    # different seeds explore different poses
    c = randomized_scenario(6)
    assert config_to_dict(c) != config_to_dict(a)


def test_randomized_scenario_starts_safely_visible():
    for seed in (0, 1, 2):
        cfg = randomized_scenario(seed)
        state = WorldState(0.0, cfg.initial_pose)
        obs = observe(state, cfg)
        assert obs is not None
        assert (cfg.camera.normals @ obs.corners.T).min() > 0.02


def test_adversarial_scenario_shape():
    for sign in (1.0, -1.0):
        cfg = adversarial_scenario(pan_sign=sign, cbf_enabled=False, robust_mode="off")
        assert not cfg.cbf_enabled
        err = cfg.injected_error()
        rv = rotation_to_vector(err.rotation)
        assert_allclose(rv, [0.0, sign * cfg.error_bounds.epsilon, 0.0], atol=1e-12)
        assert_allclose(err.translation, [sign * cfg.error_bounds.delta, 0.0, 0.0], atol=1e-12)
        assert len(cfg.hil_script) == 1
        seg = cfg.hil_script[0]
        assert (seg.t0, seg.t1) == (0.0, cfg.duration)
        assert seg.twist[0] == pytest.approx(0.35 * sign)
