"""Command-line entry point: ``divfuzz fuzz | replay | report | sweep``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import yaml

from .analysis import comparison_table, summarize_dir, window_sweep
from .controller import make_controller
from .fuzzer import CampaignConfig, replay, run_campaign
from .roadmap import load_map
from .scenario import ScenarioError, load_scenario, shipped_seeds
from .simulator import ControllerFault, save_trace

EXIT_OK, EXIT_FAILURE_FOUND = 0, 10
EXIT_USAGE, EXIT_IO = 2, 3

log = logging.getLogger("divfuzz")


class ConfigError(Exception):
    pass


def _parse_override(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def load_config(path: str, overrides=()) -> tuple[CampaignConfig, Path]:
    """Read a campaign YAML (a path or a shipped config name) and apply ``key=value`` overrides."""
    p = Path(path)
    if not p.exists():
        shipped = resources.files("divfuzz") / "data" / "configs" / f"{path}.yaml"
        if not shipped.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        doc, base = yaml.safe_load(shipped.read_text()), Path.cwd()
    else:
        try:
            doc = yaml.safe_load(p.read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        base = p.resolve().parent
    doc = dict(doc or {})
    for text in overrides:
        key, value = _parse_override(text)
        doc[key] = value
    try:
        cfg = CampaignConfig.from_dict(doc)
    except KeyError as exc:
        raise ConfigError(exc.args[0]) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from None
    return cfg, base


def _resolve_inputs(cfg: CampaignConfig, base: Path):
    if not cfg.map:
        raise ConfigError("config must name a map")
    map_ref = cfg.map
    if (base / map_ref).exists():
        map_ref = str(base / map_ref)
    m = load_map(map_ref)
    if not cfg.seeds:
        return m, shipped_seeds(m.name, m)
    seeds = []
    for entry in cfg.seeds:
        p = Path(entry) if Path(entry).is_absolute() else base / entry
        files = sorted(p.glob("*.yaml")) if p.is_dir() else [p]
        if not files or not all(f.exists() for f in files):
            raise FileNotFoundError(f"seed scenario(s) not found: {entry}")
        seeds.extend(load_scenario(f, m) for f in files)
    return m, seeds


def cmd_fuzz(args) -> int:
    try:
        cfg, base = load_config(args.config, args.set or ())
        m, seeds = _resolve_inputs(cfg, base)
        controller = make_controller(cfg.controller)
    except (ConfigError, ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / ".write-test").touch()
        (out / ".write-test").unlink()
    except OSError as exc:
        print(f"error: output directory not writable: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("effective config: %s", json.dumps(cfg.to_dict()))

    def progress(entry):
        if args.verbose and entry["result"] == "FAILURE":
            log.info("iteration %d: %s %s", entry["iteration"], entry["child"], entry["violated"])

    result = run_campaign(seeds, controller, m, cfg, out_dir=out, resume=args.resume, progress=progress)
    print(f"{len(result.log)} iterations, {len(result.failures)} failures, "
          f"corpus {len(result.corpus.seeds)} seeds -> {out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.scenario)
    if not path.exists():
        print(f"error: scenario file not found: {path}", file=sys.stderr)
        return EXIT_USAGE
    try:
        m = load_map(args.map) if args.map else None
        trace, verdict = replay(path, make_controller(args.controller), m, cap=not args.no_cap)
    except (ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ControllerFault as exc:
        print(f"error: controller fault: {exc}", file=sys.stderr)
        return 1
    if args.trace_out:
        save_trace(trace, args.trace_out, verdict)
    d = verdict.to_dict()
    print(f"{verdict.result.value} ({trace.termination.value}, {trace.frames[-1].timestamp:.1f}s)")
    if verdict.failed:
        print("violated: " + ", ".join(verdict.violated_names()))
    print(f"O={d['O']:.4f} f_collision={d['f_collision']:.4f} f_lines={d['f_lines']:.4f} "
          f"f_destination={d['f_destination']:.4f}")
    return EXIT_FAILURE_FOUND if verdict.failed else EXIT_OK


def cmd_report(args) -> int:
    summaries = []
    for d in args.dirs:
        try:
            summaries.append(summarize_dir(d))
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except (ValueError, KeyError) as exc:
            print(f"error: malformed campaign log in {d}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    print(comparison_table(summaries))
    target = Path(args.json) if args.json else Path(args.dirs[0]) / "summary.json"
    doc = summaries[0] if len(summaries) == 1 else {"campaigns": summaries}
    target.write_text(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg, base = load_config(args.config, args.set or ())
        m, seeds = _resolve_inputs(cfg, base)
        rows = window_sweep(cfg, args.windows, seeds, make_controller(cfg.controller), m, out_root=args.out)
    except (ConfigError, ScenarioError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    keys = list(rows[0])
    print("  ".join(f"{k:>17}" for k in keys))
    for r in rows:
        print("  ".join(f"{r[k]:>17}" for k in keys))
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "sweep.json").write_text(json.dumps(rows, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="divfuzz", description="Behavior-diversity-guided driving scenario fuzzer.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fuzz", help="run a fuzzing campaign")
    f.add_argument("config", help="campaign YAML file or shipped config name (s1..s4)")
    f.add_argument("--out", required=True, help="output directory")
    f.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    f.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out")
    f.set_defaults(func=cmd_fuzz)

    r = sub.add_parser("replay", help="re-simulate one scenario and print its verdict")
    r.add_argument("scenario")
    r.add_argument("--map", help="map name or file (default: the map the scenario references)")
    r.add_argument("--controller", default="reference", help="'reference' or module:attribute")
    r.add_argument("--trace-out", help="write the observation trace (with verdict) to this JSON file")
    r.add_argument("--no-cap", action="store_true", help="sum raw distances in the violation degree")
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("report", help="summarize one or more campaign directories")
    s.add_argument("dirs", nargs="+")
    s.add_argument("--json", help="machine-readable summary path (default: <first dir>/summary.json)")
    s.set_defaults(func=cmd_report)

    w = sub.add_parser("sweep", help="run one campaign per sliding-window size")
    w.add_argument("config")
    w.add_argument("--windows", type=int, nargs="+", default=[1, 5, 10, 15])
    w.add_argument("--out", required=True)
    w.add_argument("--set", action="append", metavar="KEY=VALUE")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
