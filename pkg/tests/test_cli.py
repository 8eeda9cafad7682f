import json
import subprocess
import sys

import numpy as np
import pytest
from PIL import Image

from cuttiming import dataio, synth
from cuttiming.cli import main
from plays import BLOCKED_T0, blocked_lane, symmetric_play


def write_play(path, script):
    dataio.write_csv(synth.generate(script).table, path)
    return str(path)


@pytest.fixture(scope="module")
def cut_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "cut.csv"
    return write_play(path, synth.ScriptedPlay(90, (synth.cut(3, 30, direction=(1.0, 0.2), lead_in=15),)))


def test_ingest_reports_counts(tmp_path, cut_csv, capsys):
    assert main(["ingest", cut_csv, "--out-dir", str(tmp_path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["frames"] == 90 and info["possessions"] == 1
    assert info["objects"] == {"offense": 630, "defense": 630, "disc": 90}
    assert json.loads((tmp_path / "summary.json").read_text()) == info
    assert (tmp_path / "dataset.csv").exists() and (tmp_path / "resolved-config.ini").exists()


def test_ingest_missing_object_exits_2(tmp_path, cut_csv, capsys):
    lines = open(cut_csv).read().splitlines()
    lines = [ln for ln in lines if not ln.startswith("7,9,")]
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["ingest", str(bad), "--out-dir", str(tmp_path / "o")]) == 2
    assert "frame 7" in capsys.readouterr().err


def test_ingest_full_season(tmp_path, capsys):
    assert main(["synth", "--season", "64", "--seed", "2", "--out-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["ingest", str(tmp_path / "synthetic.csv"), "--out-dir", str(tmp_path / "i")]) == 0
    assert json.loads(capsys.readouterr().out)["possessions"] == 64


def test_detect_writes_sequences(tmp_path, cut_csv):
    assert main(["detect", cut_csv, "--out-dir", str(tmp_path)]) == 0
    rows = (tmp_path / "sequences.csv").read_text().splitlines()
    assert len(rows) == 2 and rows[1].split(",")[:2] == ["0", "3"]


def test_sweep_xi0_only_has_no_timing_score(tmp_path, cut_csv):
    assert main(["sweep", cut_csv, "--xi0-only", "--grid-cell", "2", "--out-dir", str(tmp_path)]) == 0
    (report,) = (tmp_path / "reports").glob("*.json")
    rep = json.loads(report.read_text())
    assert rep["xi_values"] == [0] and len(rep["v_scenario"]) == 1
    assert "v_timing" not in rep and "best_xi" not in rep


def test_sweep_parallel_matches_serial(tmp_path, cut_csv):
    for jobs in (1, 2):
        assert main(["--jobs", str(jobs), "sweep", cut_csv, "--grid-cell", "2", "--frames-csv",
                     "--out-dir", str(tmp_path / f"j{jobs}")]) == 0
    for name in ("reports/p0-id3-t30.json", "v_frame.csv", "sweep.json"):
        assert (tmp_path / "j1" / name).read_bytes() == (tmp_path / "j2" / name).read_bytes()


def test_sweep_blocked_lane_prefers_earlier_cut(tmp_path):
    data = write_play(tmp_path / "blocked.csv", blocked_lane())
    assert main(["sweep", data, "--select", f"0:3:{BLOCKED_T0}", "--out-dir", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "reports" / f"p0-id3-t{BLOCKED_T0}.json").read_text())
    assert rep["best_xi"] < 0 and rep["v_timing"] < 0
    assert rep["schema_version"] == 1


def test_sweep_with_nothing_selected_is_ok(tmp_path, cut_csv):
    assert main(["sweep", cut_csv, "--select", "0:4:30", "--out-dir", str(tmp_path)]) == 0


def test_sweep_fails_when_every_sequence_fails(tmp_path, cut_csv):
    seqs = tmp_path / "seqs.csv"
    seqs.write_text("possession_id,player_id,start,t0,end,retained\n0,3,30,30,36,True\n")
    # an 80-frame window cannot fit in the evaluation span
    cfg = tmp_path / "c.ini"
    cfg.write_text("[timing]\nwindow = 80\n")
    code = main(["sweep", cut_csv, "--sequences", str(seqs), "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert json.loads((tmp_path / "o" / "sweep.json").read_text())["failures"]


def test_sweep_ranks_and_stats(tmp_path, cut_csv):
    out = tmp_path / "o"
    assert main(["sweep", cut_csv, "--grid-cell", "2", "--frames-csv", "--ranks", "--out-dir", str(out)]) == 0
    frames = [ln.split(",") for ln in (out / "v_frame.csv").read_text().splitlines()[1:]]
    zero = [f for f in frames if f[3] == "0"]
    probs = tmp_path / "probs.csv"
    probs.write_text("sequence,frame,prob\n" + "".join(
        f"{f[0]},{f[4]},{0.9 if k % 2 else 0.1}\n" for k, f in enumerate(zero)))
    roster = tmp_path / "roster.csv"
    roster.write_text("player_id,group\n3,group1\n")
    assert main(["stats", "--frames", str(out / "v_frame.csv"), "--ranks", str(out / "ranks.csv"),
                 "--reports", str(out / "reports"), "--probs", str(probs), "--roster", str(roster),
                 "--out-dir", str(tmp_path / "s")]) == 0
    summary = json.loads((tmp_path / "s" / "stats.json").read_text())
    assert summary["v_frame"]["all"]["n_a"] + summary["v_frame"]["all"]["n_b"] == len(zero)
    assert set(summary["v_frame"]) == {"all", "group1"}
    assert summary["rank"]["all"] is not None
    assert summary["v_timing"]["n"] == {"group1": 1}
    assert summary["v_timing"]["group1_vs_group2"] is None


def test_render_distance_weight_decays_from_disc(tmp_path, cut_csv):
    assert main(["render", cut_csv, "--frames", "10", "--layers", "w_d", "--format", "pgm", "--scale", "1",
                 "--out-dir", str(tmp_path)]) == 0
    img = np.asarray(Image.open(tmp_path / "w_d_000010.pgm"), dtype=float)
    disc = synth.formation()[0]
    row, col = 36 - int(disc[1]), int(disc[0])
    assert img[row, col] == img.max()
    yy, xx = np.mgrid[: img.shape[0], : img.shape[1]]
    radius = np.hypot(yy - row, xx - col)
    ring = [img[(radius >= r) & (radius < r + 5)].mean() for r in range(0, 40, 5)]
    assert all(a >= b for a, b in zip(ring, ring[1:]))


def test_render_symmetric_play_gives_mirror_image(tmp_path):
    data = write_play(tmp_path / "sym.csv", symmetric_play())
    assert main(["render", data, "--frames", "5", "--layers", "wuppcf,uppcf", "--out-dir", str(tmp_path)]) == 0
    for layer in ("wuppcf", "uppcf"):
        img = np.asarray(Image.open(tmp_path / f"{layer}_000005.png"))
        assert np.array_equal(img, img[::-1])


def test_render_empty_range_writes_nothing(tmp_path, cut_csv):
    assert main(["render", cut_csv, "--frames", "500:600", "--out-dir", str(tmp_path)]) == 0
    assert not list(tmp_path.glob("*.png"))


def test_render_unknown_layer(tmp_path, cut_csv, capsys):
    assert main(["render", cut_csv, "--frames", "1", "--layers", "heat", "--out-dir", str(tmp_path)]) == 1
    assert "unknown layer" in capsys.readouterr().err


def test_resolved_config_records_precedence(tmp_path, cut_csv):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[run]\ngrid_cell = 2.0\njobs = 3\n[timing]\nv_disc = 10\n")
    assert main(["detect", cut_csv, "--config", str(cfg), "--v-disc", "11", "--out-dir", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "resolved-config.ini").read_text()
    assert "grid_cell = 2.0" in text and "jobs = 3" in text and "v_disc = 11.0" in text


def test_synth_from_script(tmp_path):
    script = tmp_path / "play.txt"
    script.write_text(synth.format_script(blocked_lane()))
    assert main(["synth", "--script", str(script), "--output", "p.csv", "--out-dir", str(tmp_path)]) == 0
    direct = dataio.write_csv(synth.generate(blocked_lane()).table)
    assert (tmp_path / "p.csv").read_text() == direct


def test_module_entry_point(cut_csv, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cuttiming", "detect", cut_csv, "--out-dir", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "retained" in proc.stdout
