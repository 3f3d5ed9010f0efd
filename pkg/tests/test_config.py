import pytest

from keyreader.config import ConfigError, RunConfig, load_config, parse_config


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert (cfg.hidden, cfg.char_filters, cfg.filter_width, cfg.dropout, cfg.hops) == (100, 100, 5, 0.2, 2)
    assert (cfg.beam_k, cfg.candidates, cfg.max_span_len, cfg.skip_window) == (12, 6, 15, 2)


def test_parse_with_comments_and_blank_lines():
    cfg = parse_config("# header\n\nhidden = 8   # small\ntrain = data/a.json\ndropout=0.5\n")
    assert cfg.hidden == 8 and cfg.train == "data/a.json" and cfg.dropout == 0.5


def test_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as e:
        parse_config("hidden = 4\n\nhidden four\n")
    assert e.value.line == 3 and "line 3" in str(e.value)
    with pytest.raises(ConfigError) as e:
        parse_config("hidden = 4\nwidth = 3\n")
    assert e.value.line == 2 and "unknown key" in str(e.value)
    with pytest.raises(ConfigError) as e:
        parse_config("dropout = lots\n")
    assert e.value.line == 1


@pytest.mark.parametrize("kw", [{"hidden": 0}, {"dropout": 1.0}, {"dropout": -0.1}, {"beam_k": 3},
                                {"rho": 1.0}, {"seed": -1}, {"epsilon": 0.0}])
def test_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig().replace(**kw).validate()


def test_seed_precedence(tmp_path, monkeypatch):
    monkeypatch.setenv("KEYREADER_SEED", "11")
    assert load_config().seed == 11
    path = tmp_path / "c.cfg"
    path.write_text("seed = 5\n")
    assert load_config(path).seed == 5
    assert load_config(path, overrides=["seed=6"]).seed == 6
    assert load_config(path, overrides=["seed=6"], seed=7).seed == 7
    monkeypatch.delenv("KEYREADER_SEED")
    assert load_config().seed == 0


def test_override_must_have_equals():
    with pytest.raises(ConfigError):
        load_config(overrides=["hidden"])


def test_digest_ignores_output_dir_only():
    a = RunConfig()
    assert a.digest() == a.replace(out_dir="elsewhere").digest()
    assert a.digest() != a.replace(seed=1).digest()
    assert a.digest() != a.replace(train="x.json").digest()
    assert len(a.digest()) == 64
