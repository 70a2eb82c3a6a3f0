import pytest
import yaml

from recoilrl.config import ConfigError, RunConfig, config_from_dict, dump_config, load_config, with_overrides


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_empty_file_gives_defaults(tmp_path):
    assert load_config(write(tmp_path, "")) == RunConfig()


def test_defaults_are_the_reference_airframe():
    cfg = RunConfig()
    assert cfg.inertial.mass == 3.1
    assert (cfg.inertial.Jxx, cfg.inertial.Jyy, cfg.inertial.Jzz) == (0.039, 0.039, 0.061)
    assert (cfg.rotor.arm_length, cfg.rotor.omega_max, cfg.rotor.c_f, cfg.rotor.c_t) == (0.28, 800.0, 2.5e-5, 50.0)
    assert (cfg.disturbance.f_x_min, cfg.disturbance.f_x_max, cfg.disturbance.T_t) == (-1050.0, -950.0, 0.5)


def test_negative_mass_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match=r"inertial\.mass"):
        load_config(write(tmp_path, "inertial:\n  mass: -1\n"))


def test_trigger_duration_is_echoed(tmp_path):
    cfg = load_config(write(tmp_path, "disturbance:\n  T_t: 2.0\n"))
    assert cfg.disturbance.T_t == 2.0
    assert cfg.to_dict()["disturbance"]["T_t"] == 2.0
    assert cfg.env_config().disturbance.T_t == 2.0


def test_unknown_keys_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"env\.colour: unknown key"):
        load_config(write(tmp_path, "env:\n  colour: red\n"))
    with pytest.raises(ConfigError, match="bogus: unknown key"):
        config_from_dict({"bogus": 1})


@pytest.mark.parametrize(
    "doc, key",
    [
        ({"ppo": {"horizon": 3.5}}, "ppo.horizon"),
        ({"env": {"p_r": [0, 0]}}, "env.p_r"),
        ({"eval": {"n_episodes": 0}}, "eval.n_episodes"),
        ({"ppo": {"enable": True}}, "ppo.enable"),
        ({"rotor": "fast"}, "rotor"),
        ({"eval": {"literal_metric": "yes"}}, "eval.literal_metric"),
    ],
)
def test_invalid_values_name_their_path(doc, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        config_from_dict(doc)


def test_parse_error_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError, match="parse error"):
        load_config(write(tmp_path, "env: [unclosed\n"))


def test_dump_load_round_trip(tmp_path):
    cfg = config_from_dict({"env": {"H": 10, "p_r": [1, 2, 3]}, "ppo": {"hidden": [32, 32], "seed": 4}, "seeds": [1, 2]})
    path = tmp_path / "out.yaml"
    dump_config(cfg, path)
    again = load_config(path)
    assert again == cfg
    assert again.digest() == cfg.digest()


def test_digest_tracks_content():
    a = RunConfig()
    b = with_overrides(a, "disturbance", T_t=1.0)
    assert a.digest() == RunConfig().digest()
    assert a.digest() != b.digest()


def test_gamma_flows_from_ppo_section():
    cfg = config_from_dict({"ppo": {"gamma": 0.97}})
    assert cfg.env_config().gamma == 0.97


def test_eval_environment_uses_eval_ranges():
    cfg = config_from_dict({"eval": {"init_pos_range": 0.25}})
    ec = cfg.eval_env_config()
    assert ec.init_pos_range == 0.25 and ec.init_att_range == 0.0
    assert cfg.env_config().init_pos_range == 1.0


def test_written_yaml_is_plain():
    doc = yaml.safe_load(yaml.safe_dump(RunConfig().to_dict()))
    assert config_from_dict(doc) == RunConfig()
