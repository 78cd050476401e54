import math

import numpy as np
import pytest

from jointmpc.config import (ConfigError, ScenarioConfig, calibrate_snr0, config_hash, default_config, dump_config,
                             load_config, parse_config)


def test_defaults_file_matches_dataclass_defaults():
    assert dump_config(load_config()) == dump_config(ScenarioConfig())


def test_round_trip():
    cfg = parse_config("[cost]\nq_pos = 1, 2, 3\nw_comm = 2.5\n[link]\nfov_deg = 45\n", default_config())
    again = parse_config(dump_config(cfg))
    assert dump_config(again) == dump_config(cfg)
    np.testing.assert_array_equal(again.weights.q_pos, np.diag([1, 2, 3]))
    assert again.link.fov_rad == pytest.approx(math.pi / 4)
    assert config_hash(again) == config_hash(cfg)
    assert config_hash(cfg) != config_hash(default_config())


def test_overlay_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[scenario]\nduration = 25\n[smoothing]\nepsilon = 0.1\n")
    cfg = load_config(p)
    assert cfg.duration == 25.0 and cfg.smoothing.epsilon == 0.1
    assert cfg.n_steps == 250
    assert cfg.link.snr0 == default_config().link.snr0


@pytest.mark.parametrize("text, path", [
    ("[scenario]\nbogus = 1\n", "scenario.bogus"),
    ("[nosuch]\nx = 1\n", "nosuch.x"),
    ("[dynamics]\na_max = -1\n", "dynamics.a_max"),
    ("[dynamics]\nts = fast\n", "dynamics.ts"),
    ("[cost]\nq_pos = 1, 2\n", "cost.q_pos"),
    ("[swarm]\nmode = async\n", "swarm.mode"),
    ("[scenario]\nduration = 5\n", "scenario.duration"),
    ("[meta]\nschema_version = 9\n", "meta.schema_version"),
    ("[link]\nsnr0 = inf\n", "link.snr0"),
])
def test_errors_name_the_field(text, path):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.field_path == path
    assert path in str(exc.value)


def test_error_carries_line_number():
    with pytest.raises(ConfigError) as exc:
        parse_config("[scenario]\nseed = 1\n\nhorizon = x\n")
    assert exc.value.line == 4


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_snr0_calibration():
    snr0 = calibrate_snr0()
    # 16 * snr0 / 400 = 2^(4.8/2.16) - 1
    assert snr0 == pytest.approx(400 / 16 * (2 ** (4.8 / 2.16) - 1))
    assert default_config().link.snr0 == pytest.approx(snr0, rel=1e-5)
    assert 2.16e9 * math.log2(1 + snr0 * 16 / 400) == pytest.approx(4.8e9)


def test_scenario_config_validation():
    with pytest.raises(ConfigError):
        ScenarioConfig(n_agents=0)
    with pytest.raises(ConfigError):
        ScenarioConfig(topology="star")
    s = ScenarioConfig().swarm_settings()
    assert s.safety_scope == "neighbors"
