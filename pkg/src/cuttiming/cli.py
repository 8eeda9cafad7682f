"""Command-line front end: ingest, detect, sweep, stats, render, synth."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, detect, stats, synth, timing
from .config import RunConfig, apply_flags, dump_config, load_config
from .control import LAYERS, Grid, wuppcf
from .counterfactual import XI_MAX, XI_MIN, build_scenario, marking_defender
from .errors import CutTimingError, SchemaError, UnknownLayer

log = logging.getLogger("cuttiming")

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


# ---------------------------------------------------------------------------
# helpers


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    return apply_flags(cfg, jobs=args.jobs, grid_cell=args.grid_cell, v_disc=args.v_disc, out_dir=args.out_dir)


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved-config.ini").write_text(dump_config(cfg), encoding="utf-8")
    return out


def sequence_key(seq_info: dict) -> str:
    return f"p{seq_info['possession_id']}-id{seq_info['player_id']}-t{seq_info['t0']}"


def _load_table(path: str, cfg: RunConfig) -> dataio.FrameTable:
    return dataio.read_csv(path, fps=dataio.FPS)


def _colormap(name: str) -> np.ndarray:
    from matplotlib import colormaps

    return (colormaps[name](np.linspace(0.0, 1.0, 256))[:, :3] * 255).round().astype(np.uint8)


def field_image(values: np.ndarray, grid: Grid, fmt: str = "png", cmap: str = "coolwarm",
                scale: int = 4, vmax: float = 1.0):
    """Pillow image of per-cell values; top row is the far sideline."""
    from PIL import Image

    img = values.reshape(grid.ny, grid.nx)[::-1]
    level = np.clip(np.rint(np.clip(img / vmax, 0.0, 1.0) * 255), 0, 255).astype(np.uint8)
    if scale > 1:
        level = np.kron(level, np.ones((scale, scale), dtype=np.uint8))
    if fmt == "pgm":
        return Image.fromarray(level, mode="L")
    return Image.fromarray(_colormap(cmap)[level], mode="RGB")


def render_frame(table: dataio.FrameTable, i: int, layers, cfg: RunConfig, out: Path, fmt: str,
                 prefix: str = "", scale: int = 4, cmap: str = "coolwarm") -> list[Path]:
    for name in layers:
        if name not in LAYERS:
            raise UnknownLayer(f"unknown layer {name!r}; choose from {', '.join(LAYERS)}")
    grid = Grid(cfg.grid_cell)
    field = wuppcf(table, i, params=cfg.control, grid=grid, with_ppcf="ppcf" in layers)
    written = []
    for name in layers:
        values = field.layer(name, team=dataio.OFFENSE, cls=table.cls[i])
        path = out / f"{prefix}{name}_{int(table.frames[i]):06d}.{fmt}"
        field_image(values, grid, fmt, cmap, scale).save(path, format="PPM" if fmt == "pgm" else "PNG")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, cfg: RunConfig) -> int:
    table = _load_table(args.input, cfg)
    if not args.no_preprocess:
        table = dataio.preprocess(table, cfg.smoothing)
    out = _prepare_out(cfg)
    dataio.write_csv(table, out / "dataset.csv")
    info = dataio.summary(table)
    info["schema_version"] = timing.SCHEMA_VERSION
    _write_json(out / "summary.json", info)
    print(json.dumps(info))
    return EXIT_OK


def cmd_detect(args, cfg: RunConfig) -> int:
    table = _load_table(args.input, cfg)
    seqs = detect.detect_sequences(table, cfg.detect, keep_excluded=args.all)
    out = _prepare_out(cfg)
    (out / "sequences.csv").write_text(detect.sequences_to_csv(table, seqs), encoding="utf-8")
    print(f"{sum(s.retained for s in seqs)} retained of {len(seqs)} sequences")
    return EXIT_OK


def _select(table, cfg: RunConfig, args) -> list[detect.MovementSequence]:
    if args.sequences:
        seqs = detect.sequences_from_csv(table, Path(args.sequences).read_text(encoding="utf-8"))
        seqs = [s for s in seqs if s.retained]
    else:
        seqs = detect.detect_sequences(table, cfg.detect)
    for sel in args.select or []:
        pid, player, t0 = (int(v) for v in sel.split(":"))
        seqs = [s for s in seqs if (s.possession_id, s.player_id, int(table.frames[s.t0])) == (pid, player, t0)]
    return seqs


# worker state, set once per process so the table is pickled once
_STATE: dict = {}


def _init_worker(table, seqs, plans, cfg, derivatives):
    _STATE.update(table=table, seqs=seqs, plans=plans, cfg=cfg, derivatives=derivatives, caches={})


def _run_task(task):
    k, xi = task
    table, cfg = _STATE["table"], _STATE["cfg"]
    rows, defender = _STATE["plans"][k]
    cache = _STATE["caches"].setdefault(k, {})
    try:
        return timing.scenario_series(table, _STATE["seqs"][k], xi, rows, defender, cfg.control, cfg.timing,
                                      Grid(cfg.grid_cell), _STATE["derivatives"], cache)
    except CutTimingError as exc:
        return exc


def _ranks(table, seq, rows, cfg: RunConfig) -> list[tuple]:
    out = []
    grid = Grid(cfg.grid_cell)
    for r in rows:
        values = timing.team_frame_values(table, r, cfg.control, cfg.timing, grid)
        holder = table.holder_id(r)
        try:
            rec = stats.rank_within_team(values, seq.player_id, holder, int(table.frames[r]))
        except CutTimingError:
            continue
        out.append((rec.frame, values.get(seq.player_id, 0.0), rec.rank, rec.team_size))
    return out


def cmd_sweep(args, cfg: RunConfig) -> int:
    table = _load_table(args.input, cfg)
    seqs = _select(table, cfg, args)
    out = _prepare_out(cfg)
    if not seqs:
        log.warning("no sequences selected")
        return EXIT_OK
    xis = [0] if args.xi0_only else list(range(XI_MIN, XI_MAX + 1))

    plans, failures = {}, {}
    for k, seq in enumerate(seqs):
        rows = list(timing.evaluation_rows(table, seq, cfg.timing))
        if len(rows) < cfg.timing.window + 1:
            failures[k] = f"evaluation span of {len(rows)} frames is too short"
            continue
        plans[k] = (rows, marking_defender(table, seq))
    tasks = [(k, xi) for k in plans for xi in xis]

    init = (table, seqs, plans, cfg, args.derivatives)
    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs, initializer=_init_worker, initargs=init) as pool:
            results = list(pool.map(_run_task, tasks, chunksize=max(1, len(xis) // cfg.jobs)))
    else:
        _init_worker(*init)
        results = [_run_task(t) for t in tasks]
    _STATE.clear()

    by_seq: dict[int, list] = {}
    for (k, _), res in zip(tasks, results):
        by_seq.setdefault(k, []).append(res)

    frame_lines = ["sequence,possession_id,player_id,xi,frame,v_frame"]
    rank_lines = ["sequence,possession_id,player_id,frame,v_frame,rank,team_size"]
    reports_dir = out / "reports"
    reports_dir.mkdir(exist_ok=True)
    index = []
    for k, seq in enumerate(seqs):
        if k in failures:
            log.error("sequence %d (player %d): %s", k, seq.player_id, failures[k])
            continue
        series = by_seq[k]
        bad = [r for r in series if isinstance(r, Exception)]
        if bad:
            failures[k] = str(bad[0])
            log.error("sequence %d (player %d): %s", k, seq.player_id, bad[0])
            continue
        rows, defender = plans[k]
        report = timing.assemble_report(table, seq, xis, rows, defender, series, cfg.timing)
        payload = report.to_json()
        if report.v_timing is None:
            payload.pop("v_timing")
            payload.pop("best_xi")
        key = sequence_key(report.sequence)
        _write_json(reports_dir / f"{key}.json", payload)
        index.append(key)
        info = report.sequence
        for xi, f, v in report.frame_rows():
            frame_lines.append(f"{key},{info['possession_id']},{info['player_id']},{xi},{f},{v!r}")
        if args.ranks:
            for f, v, rank, size in _ranks(table, seq, rows, cfg):
                rank_lines.append(f"{key},{info['possession_id']},{info['player_id']},{f},{v!r},{rank},{size}")
        if args.heatmaps:
            heat = out / "heatmaps" / key
            heat.mkdir(parents=True, exist_ok=True)
            shown = [0] + ([report.best_xi] if report.best_xi is not None else [])
            for xi in shown:
                sc = build_scenario(table, seq, xi, defender_id=defender, derivatives=args.derivatives)
                for r in rows:
                    render_frame(sc.table, r - sc.row0, ["wuppcf"], cfg, heat, args.format, prefix=f"xi{xi:+d}_")

    if args.frames_csv:
        (out / "v_frame.csv").write_text("\n".join(frame_lines) + "\n", encoding="utf-8")
    if args.ranks:
        (out / "ranks.csv").write_text("\n".join(rank_lines) + "\n", encoding="utf-8")
    _write_json(out / "sweep.json", {
        "schema_version": timing.SCHEMA_VERSION,
        "reports": index,
        "failures": [{"player_id": seqs[k].player_id, "possession_id": seqs[k].possession_id, "error": msg}
                     for k, msg in sorted(failures.items())],
    })
    print(f"{len(index)} reports written, {len(failures)} failed")
    return EXIT_FAIL if not index else EXIT_OK


def _read_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _compare_or_none(a, b):
    if not len(a) or not len(b):
        return None
    return stats.compare(a, b)


def cmd_stats(args, cfg: RunConfig) -> int:
    roster = {int(r["player_id"]): r["group"].strip() for r in _read_rows(args.roster)} if args.roster else {}
    probs = {}
    if args.probs:
        for r in _read_rows(args.probs):
            probs[(r["sequence"], int(r["frame"]))] = float(r["prob"])
    summary = {"schema_version": timing.SCHEMA_VERSION}

    def grouped(rows, value_key):
        buckets: dict[str, dict[str, list]] = {}
        for r in rows:
            prob = probs.get((r["sequence"], int(r["frame"])))
            label = stats.label_from_probability(prob) if prob is not None else None
            if label is None:
                continue
            groups = ["all"]
            g = roster.get(int(r["player_id"]))
            if g:
                groups.append(g)
            for g in groups:
                buckets.setdefault(g, {"target": [], "others": []})[label].append(float(r[value_key]))
        return {g: _compare_or_none(b["target"], b["others"]) for g, b in sorted(buckets.items())}

    if args.frames:
        rows = [r for r in _read_rows(args.frames) if int(r.get("xi", 0)) == 0]
        summary["v_frame"] = grouped(rows, "v_frame")
    if args.ranks:
        summary["rank"] = grouped(_read_rows(args.ranks), "rank")
    if args.reports:
        by_group: dict[str, list] = {}
        for path in sorted(Path(args.reports).glob("*.json")):
            rep = json.loads(path.read_text(encoding="utf-8"))
            if rep.get("v_timing") is None:
                continue
            g = roster.get(int(rep["sequence"]["player_id"]))
            if g:
                by_group.setdefault(g, []).append(rep["v_timing"])
        summary["v_timing"] = {
            "n": {g: len(v) for g, v in sorted(by_group.items())},
            "group1_vs_group2": _compare_or_none(by_group.get("group1", []), by_group.get("group2", [])),
        }
    out = _prepare_out(cfg)
    _write_json(out / "stats.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


def _frame_range(text: str) -> tuple[int, int]:
    lo, _, hi = text.partition(":")
    lo = int(lo)
    return lo, int(hi) if hi else lo


def cmd_render(args, cfg: RunConfig) -> int:
    layers = [s.strip() for s in args.layers.split(",") if s.strip()]
    for name in layers:
        if name not in LAYERS:
            raise UnknownLayer(f"unknown layer {name!r}; choose from {', '.join(LAYERS)}")
    table = _load_table(args.input, cfg)
    out = _prepare_out(cfg)
    lo, hi = _frame_range(args.frames)
    rows = [i for i, f in enumerate(table.frames) if lo <= f <= hi]
    count = 0
    for i in rows:
        count += len(render_frame(table, i, layers, cfg, out, args.format, scale=args.scale, cmap=args.cmap))
    print(f"{count} images written")
    return EXIT_OK


def cmd_synth(args, cfg: RunConfig) -> int:
    if args.script:
        play = synth.parse_script(Path(args.script).read_text(encoding="utf-8"))
        table = synth.generate(play, cfg.smoothing).table
    else:
        table = synth.generate_season(args.season, seed=args.seed, duration=args.duration)
    out = _prepare_out(cfg)
    dataio.write_csv(table, out / args.output)
    print(json.dumps(dataio.summary(table)))
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="INI file with [run]/[smoothing]/[detect]/[control]/[timing]")
    parser.add_argument("--jobs", type=int, default=d, help="worker processes")
    parser.add_argument("--grid-cell", type=float, default=d, help="grid cell size in metres")
    parser.add_argument("--v-disc", type=float, default=d, help="assumed disc speed in m/s")
    parser.add_argument("--out-dir", default=d, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuttiming", description=__doc__)
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        _common(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "validate and preprocess a tracking CSV")
    p.add_argument("input")
    p.add_argument("--no-preprocess", action="store_true", help="keep the file's kinematics and pairing")

    p = add("detect", cmd_detect, "detect movement-initiation sequences")
    p.add_argument("input")
    p.add_argument("--all", action="store_true", help="also list sequences removed by the exclusions")

    p = add("sweep", cmd_sweep, "score shifted onsets for each sequence")
    p.add_argument("input")
    p.add_argument("--sequences", help="sequence CSV from the detect command")
    p.add_argument("--select", action="append", metavar="POSS:PLAYER:T0", help="keep only this sequence")
    p.add_argument("--xi0-only", action="store_true", help="score the actual play only")
    p.add_argument("--frames-csv", action="store_true", help="write per-frame values to v_frame.csv")
    p.add_argument("--ranks", action="store_true", help="write within-team ranks to ranks.csv")
    p.add_argument("--heatmaps", action="store_true", help="render frames of the actual and best shifted play")
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.add_argument("--derivatives", choices=("carry", "recompute"), default="carry")

    p = add("stats", cmd_stats, "compare target and non-target frame values")
    p.add_argument("--frames", help="v_frame.csv from sweep")
    p.add_argument("--ranks", help="ranks.csv from sweep")
    p.add_argument("--reports", help="directory of sweep reports")
    p.add_argument("--probs", help="CSV sequence,frame,prob of predicted receiver probabilities")
    p.add_argument("--roster", help="CSV player_id,group")

    p = add("render", cmd_render, "render control layers as images")
    p.add_argument("input")
    p.add_argument("--layers", default="wuppcf", help=f"comma list of {', '.join(LAYERS)}")
    p.add_argument("--frames", required=True, help="frame or inclusive range A:B")
    p.add_argument("--format", choices=("png", "pgm"), default="png")
    p.add_argument("--scale", type=int, default=4, help="pixels per cell")
    p.add_argument("--cmap", default="coolwarm")

    p = add("synth", cmd_synth, "write a synthetic tracking CSV")
    p.add_argument("--script", help="plain-text play script")
    p.add_argument("--season", type=int, default=64, help="number of random possessions")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=int, default=90)
    p.add_argument("--output", default="synthetic.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
        return args.func(args, cfg)
    except SchemaError as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (CutTimingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
