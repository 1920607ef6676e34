"""Command-line experiment runner.

Configuration is one JSON document merged over built-in desk-scale defaults.
Precedence is named flag > ``--set key.path=value`` > config file > default.
Every output file gets a metadata record carrying the config hash and tool
version; no timestamps are written, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from pathlib import Path

from . import __version__
from .core import SPEED_OF_LIGHT, BatchGrid, CPIConfig, RadarParams, WindowKind
from .io import FileReference, dump_json, iter_iq_batches, provenance, read_iq_meta, write_iq, write_map
from .losses import GridSpec, LossQuery, SpacingMode, loss_curve, required_spacing
from .metrics import clutter_bin_for, clutter_free_search, measure_sinr
from .processor import Mode, VelocityHypothesis, process_stream
from .scene import Scene, load_scene, scene_from_dict, scene_to_dict, synthesize_echo
from .waveform import WaveformSpec, generate_noise

DEFAULTS = {
    "radar": {
        "carrier_freq_hz": 1.3e9,
        "sample_rate_hz": 31.25e6,
        "bandwidth_hz": 25e6,
        "wave_speed_mps": SPEED_OF_LIGHT,
    },
    "grid": {"batch_len": 4096, "batch_count": 1536},
    "window": "rectangular",
    "waveform": {"seed": 1, "rms_level": 1.0},
    "scene_file": None,
    "scene": None,
    "hypotheses": {"velocities": None, "auto": None},
    "modes": ["none", "doppler", "stretch", "both", "resample"],
    "output_dir": "out",
    "threads": 1,
    "simulate": {"length_samples": None},
    "process": {"start_sample": 0, "cpi_batch_counts": None, "reference_file": None, "received_file": None},
    "metrics": {"guard": 3, "clutter_halfwidth": None},
    "losses": {"batch_duration_s": None, "integration_time_s": None, "span_mps": 50.0, "step_mps": 0.1},
    "gain_curve": {"start_times_s": [0.0], "doublings": 4, "base_batch_count": 8, "mode": "both",
                   "velocity_mps": 300.0},
    "design": {"max_loss_db": 3.0, "mode": "stretch", "batch_duration_s": None, "integration_time_s": None,
               "span_mps": None},
}


# used when neither an explicit list nor an auto grid is configured
DEFAULT_VELOCITIES = (0.0, 300.0)


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key.path=value, got '{assignment}'")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    node, defaults = cfg, DEFAULTS
    for i, part in enumerate(parts):
        if not isinstance(defaults, dict) or part not in defaults:
            raise ConfigError(f"unknown config key '{'.'.join(parts[:i + 1])}'")
        if i == len(parts) - 1:
            node[part] = _parse_value(text)
        else:
            if not isinstance(node.get(part), dict):
                node[part] = copy.deepcopy(defaults[part]) if isinstance(defaults[part], dict) else {}
            node, defaults = node[part], defaults[part]


def load_config(path: str | None, sets=(), flags: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    base_dir = Path.cwd()
    if path:
        text = Path(path).read_text(encoding="utf-8")
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        cfg = _merge(cfg, user)
        base_dir = Path(path).resolve().parent
    for assignment in sets:
        _apply_set(cfg, assignment)
    for key, value in (flags or {}).items():
        if value is not None:
            _apply_set(cfg, f"{key}={json.dumps(value)}")
    if cfg["scene_file"] is not None and not Path(cfg["scene_file"]).is_absolute():
        cfg["scene_file"] = str(base_dir / cfg["scene_file"])
    return cfg


class Experiment:
    """Typed view of a resolved config dictionary."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        r = cfg["radar"]
        try:
            self.radar = RadarParams(float(r["carrier_freq_hz"]), float(r["sample_rate_hz"]),
                                     float(r["bandwidth_hz"]), float(r["wave_speed_mps"]))
            self.window = WindowKind(cfg["window"])
            grid = BatchGrid(int(cfg["grid"]["batch_count"]), int(cfg["grid"]["batch_len"]),
                             self.radar.sample_rate)
            self.config = CPIConfig(self.radar, grid, self.window)
            self.modes = [Mode(m) for m in cfg["modes"]]
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"bad config value: {exc}") from None
        if not self.modes:
            raise ConfigError("modes must not be empty")
        self.threads = int(cfg["threads"])
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        self.output_dir = Path(cfg["output_dir"])
        # settings that cannot change results stay out of the config hash
        self.provenance = provenance({k: v for k, v in cfg.items() if k not in ("threads", "output_dir")})

    def scene(self) -> Scene:
        if self.cfg["scene_file"] is not None and self.cfg["scene"] is not None:
            raise ConfigError("scene_file and scene are mutually exclusive")
        if self.cfg["scene_file"] is not None:
            return load_scene(self.cfg["scene_file"])
        if self.cfg["scene"] is not None:
            return scene_from_dict(self.cfg["scene"])
        return Scene()

    def velocities(self) -> list[float]:
        h = self.cfg["hypotheses"]
        explicit, auto = h.get("velocities"), h.get("auto")
        if explicit is not None and auto is not None:
            raise ConfigError("hypotheses.velocities and hypotheses.auto are mutually exclusive")
        if auto is not None:
            mode = SpacingMode(auto.get("spacing_mode", "stretch"))
            q = LossQuery(0.0, self.radar, self.config.grid.batch_duration, self.config.integration_time,
                          self.window)
            spacing = required_spacing(float(auto["max_loss_db"]), mode, q)
            return [float(v) for v in GridSpec(spacing, float(auto["span"])).velocities()]
        if explicit is None:
            return list(DEFAULT_VELOCITIES)
        if not explicit:
            raise ConfigError("hypotheses.velocities must list at least one velocity")
        return [float(v) for v in explicit]

    def hypotheses(self, mode: Mode) -> list[VelocityHypothesis]:
        if mode is Mode.NONE:
            return [VelocityHypothesis()]
        seen, out = set(), []
        for v in self.velocities():
            h = VelocityHypothesis.for_mode(mode, v)
            key = (0.0, mode) if h.reference_velocity == 0.0 else (v, mode)
            if key not in seen:
                seen.add(key)
                out.append(h)
        return out

    def path(self, name: str) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return self.output_dir / name

    def meta(self, **extra) -> dict:
        return {"provenance": self.provenance, **extra}


def _write_csv(path: Path, header: list[str], rows, meta: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    dump_json(meta, path.with_suffix(".meta.json"))


def _fmt(x: float) -> str:
    return f"{x:.6f}" if math.isfinite(x) else ("inf" if x > 0 else "-inf")


# commands

def cmd_losses(exp: Experiment) -> dict:
    spec = exp.cfg["losses"]
    t_p = spec["batch_duration_s"] or exp.config.grid.batch_duration
    t_int = spec["integration_time_s"] or exp.config.integration_time
    rows = loss_curve(exp.radar, float(t_p), float(t_int), float(spec["span_mps"]), float(spec["step_mps"]))
    path = exp.path("losses.csv")
    _write_csv(path, ["mismatch_mps", "L_D_rect_db", "L_D_hann_db", "L_S_db"],
               [[_fmt(v) for v in row] for row in rows],
               exp.meta(batch_duration_s=t_p, integration_time_s=t_int))
    print(f"wrote {len(rows)} rows to {path}")
    return {"rows": len(rows)}


def cmd_design_grid(exp: Experiment) -> dict:
    spec = exp.cfg["design"]
    t_p = spec["batch_duration_s"] or exp.config.grid.batch_duration
    t_int = spec["integration_time_s"] or max(exp.config.integration_time, t_p)
    q = LossQuery(0.0, exp.radar, float(t_p), float(t_int), exp.window)
    spacing = required_spacing(float(spec["max_loss_db"]), spec["mode"], q)
    result = {"mode": SpacingMode(spec["mode"]).value, "max_loss_db": float(spec["max_loss_db"]),
              "window": exp.window.value, "batch_duration_s": float(t_p), "integration_time_s": float(t_int),
              "spacing_mps": spacing}
    if spec["span_mps"] is not None:
        result["velocities_mps"] = [float(v) for v in GridSpec(spacing, float(spec["span_mps"])).velocities()]
    dump_json({**result, **exp.meta()}, exp.path("design_grid.json"))
    print(f"{result['mode']} spacing for {result['max_loss_db']:.2f} dB: {spacing:.4f} m/s")
    return result


def cmd_simulate(exp: Experiment) -> dict:
    scene = exp.scene()
    length = exp.cfg["simulate"]["length_samples"] or exp.config.grid.total_samples
    wf = exp.cfg["waveform"]
    spec = WaveformSpec(int(wf["seed"]), int(length), exp.radar, float(wf["rms_level"]))
    x = generate_noise(spec)
    y = synthesize_echo(x, scene, exp.radar, batch_len=exp.config.grid.batch_len)
    write_iq(exp.path("reference.bin"), x, exp.meta(role="reference"))
    write_iq(exp.path("received.bin"), y, exp.meta(role="received", scene=scene_to_dict(scene)))
    print(f"wrote {length} samples to {exp.output_dir}/reference.bin and received.bin")
    return {"length": int(length)}


def _input_files(exp: Experiment) -> tuple[Path, Path]:
    p = exp.cfg["process"]
    ref = Path(p["reference_file"]) if p["reference_file"] else exp.output_dir / "reference.bin"
    rec = Path(p["received_file"]) if p["received_file"] else exp.output_dir / "received.bin"
    for path in (ref, rec):
        meta = read_iq_meta(path)
        if float(meta["sample_rate_hz"]) != exp.radar.sample_rate:
            raise ValueError(f"{path}: sample rate {meta['sample_rate_hz']} Hz differs from config "
                             f"{exp.radar.sample_rate} Hz")
    return ref, rec


def _run_cpi(exp: Experiment, ref: Path, rec: Path, config: CPIConfig, first: int, hypotheses):
    available = min(int(read_iq_meta(ref)["length"]), int(read_iq_meta(rec)["length"]))
    need = first + config.grid.total_samples
    if first < 0 or need > available:
        raise ValueError(f"CPI of {config.grid.batch_count} x {config.grid.batch_len} samples from sample "
                         f"{first} needs {need} samples, input files hold {available}")
    batches = iter_iq_batches(rec, config.grid.batch_len, first, config.grid.batch_count)
    reference = FileReference(ref, exp.radar, start=first)
    return process_stream(batches, reference, hypotheses, config, exp.threads)


def _measure(exp: Experiment, rd_map):
    m = exp.cfg["metrics"]
    halfwidth = m["clutter_halfwidth"]
    if halfwidth is None:
        return measure_sinr(rd_map, None, int(m["guard"]), None)
    cbin = clutter_bin_for(rd_map.hypothesis, rd_map.config)
    search = clutter_free_search(rd_map.config, cbin, int(halfwidth))
    return measure_sinr(rd_map, search, int(m["guard"]), int(halfwidth), cbin)


def cmd_process(exp: Experiment) -> dict:
    ref, rec = _input_files(exp)
    first = int(exp.cfg["process"]["start_sample"])
    counts = exp.cfg["process"]["cpi_batch_counts"] or [exp.config.grid.batch_count]
    table: dict[str, dict[int, float]] = {}
    for count in counts:
        config = exp.config.with_batch_count(int(count))
        for mode in exp.modes:
            maps = _run_cpi(exp, ref, rec, config, first, exp.hypotheses(mode))
            reports = [_measure(exp, rd_map) for rd_map in maps]
            # strongest cell across the hypotheses of this mode
            best = max(range(len(maps)), key=lambda i: (reports[i].peak_power_db, -i))
            stem = f"{mode.value}_P{int(count)}"
            write_map(exp.path(f"map_{stem}"), maps[best], exp.meta())
            dump_json({
                "mode": mode.value,
                "batch_count": int(count),
                "integration_time_s": config.integration_time,
                "selected": best,
                "reports": [{"hypothesis": m.hypothesis.to_dict(), **r.to_dict()} for m, r in zip(maps, reports)],
                **exp.meta(),
            }, exp.path(f"report_{stem}.json"))
            table.setdefault(mode.value, {})[int(count)] = reports[best].sinr_db
            del maps
    times = [exp.config.with_batch_count(int(c)).integration_time for c in counts]
    header = ["algorithm"] + [f"sinr_db_T{t * 1e3:.3f}ms" for t in times]
    rows = [[mode] + [f"{table[mode][int(c)]:.6f}" for c in counts] for mode in table]
    _write_csv(exp.path("summary.csv"), header, rows, exp.meta())
    width = max(len(h) for h in header)
    print("  ".join(h.ljust(width) for h in header))
    for mode in table:
        print("  ".join([mode.ljust(width)] + [f"{table[mode][int(c)]:.2f}".ljust(width) for c in counts]))
    return table


def cmd_gain_curve(exp: Experiment) -> dict:
    ref, rec = _input_files(exp)
    g = exp.cfg["gain_curve"]
    doublings = int(g["doublings"])
    if doublings < 0:
        raise ConfigError("gain_curve.doublings must be >= 0")
    base = exp.config.with_batch_count(int(g["base_batch_count"]))
    hypothesis = VelocityHypothesis.for_mode(g["mode"], float(g["velocity_mps"]))
    fs = exp.radar.sample_rate
    available = min(int(read_iq_meta(ref)["length"]), int(read_iq_meta(rec)["length"]))
    longest = base.grid.total_samples * 2**doublings
    rows, curves = [], {}
    for start in g["start_times_s"]:
        start = float(start)
        first = int(round(start * fs))
        if first < 0 or first + longest > available:
            limit = max(0.0, (available - longest) / fs)
            raise ValueError(f"a {longest / fs:.6g} s CPI starting at {start} s needs {first + longest} "
                             f"samples, input files hold {available}; latest possible start is {limit:.6g} s")
        sinrs = []
        for k in range(doublings + 1):
            config = base.with_batch_count(base.grid.batch_count * 2**k)
            (rd_map,) = _run_cpi(exp, ref, rec, config, first, [hypothesis])
            sinrs.append(_measure(exp, rd_map).sinr_db)
            rows.append([_fmt(start), _fmt(config.integration_time * 1e3), _fmt(sinrs[-1] - sinrs[0])])
        curves[start] = [s - sinrs[0] for s in sinrs]
    _write_csv(exp.path("gain_curve.csv"), ["start_time_s", "T_ms", "gain_db"], rows,
               exp.meta(hypothesis=hypothesis.to_dict()))
    for start, gains in curves.items():
        print(f"start {start:g} s: " + " ".join(f"{x:.2f}" for x in gains))
    return curves


COMMANDS = {
    "losses": cmd_losses,
    "simulate": cmd_simulate,
    "process": cmd_process,
    "gain-curve": cmd_gain_curve,
    "design-grid": cmd_design_grid,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noiseradar", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config field, e.g. grid.batch_count=256 (value parsed as JSON)")
        p.add_argument("-o", "--output-dir", help="output directory")
        p.add_argument("-j", "--threads", type=int, help="worker threads")
        p.add_argument("--seed", type=int, help="waveform seed")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        flags = {"output_dir": args.output_dir, "threads": args.threads, "waveform.seed": args.seed}
        cfg = load_config(args.config, args.set, flags)
        COMMANDS[args.command](Experiment(cfg))
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        kind = "io" if isinstance(exc, OSError) else "value"
        print(json.dumps({"error": kind, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
