import pytest

from cuttiming.config import RunConfig, apply_flags, dump_config, load_config


def test_defaults_without_file():
    assert load_config(None) == RunConfig()


def test_file_overrides_defaults(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\njobs = 3\n\n[detect]\naccel_min = 2.5\n\n[timing]\nv_disc = 10\n")
    cfg = load_config(path)
    assert cfg.jobs == 3 and cfg.detect.accel_min == 2.5 and cfg.timing.v_disc == 10.0
    assert cfg.control == RunConfig().control


def test_flags_override_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\njobs = 3\ngrid_cell = 2.0\n[timing]\nv_disc = 10\n")
    cfg = apply_flags(load_config(path), jobs=5, v_disc=14.0)
    assert (cfg.jobs, cfg.grid_cell, cfg.timing.v_disc) == (5, 2.0, 14.0)


def test_dump_reads_back(tmp_path):
    cfg = apply_flags(RunConfig(), jobs=4, grid_cell=0.5, v_disc=11.0, out_dir="x")
    path = tmp_path / "resolved.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_unknown_keys_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[detect]\nacel_min = 2\n")
    with pytest.raises(ValueError):
        load_config(path)
    path.write_text("[colour]\nx = 1\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_invalid_values_rejected(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[timing]\nv_disc = 0\n")
    with pytest.raises(ValueError):
        load_config(path)
