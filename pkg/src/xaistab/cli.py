"""Command line: synth, run, compare, plot.

Exit codes: 0 success, 2 finished but some metrics were undefined, 1 error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import report
from .data import load_schema, write_dataset
from .experiment import (REPORT_KINDS, ExperimentError, compare_files, degenerate, load_config, run_experiment,
                         schema_domains)
from .plots import PlotSpec, beeswarm_svg, fi_bar_svg, write_svg
from .preprocess import read_feature_matrix
from .shapley import read_attributions, read_importance
from .synth import SynthConfig, generate_synthetic

EXIT_OK, EXIT_ERROR, EXIT_DEGENERATE = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (overrides the config)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    p.add_argument("--format", choices=report.FORMATS, default=argparse.SUPPRESS,
                   help="report format for compare (default md)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel scenario workers")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="xaistab", parents=[common],
                                     description="Explanation-stability experiments on longitudinal tabular cohorts.")
    sub = parser.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic cohort (data.csv + schema.json)")
    s.add_argument("config", nargs="?", help="SynthConfig JSON (defaults when omitted)")

    r = sub.add_parser("run", parents=[common], help="run the full experiment")
    r.add_argument("config", nargs="?", help="ExperimentConfig JSON (defaults when omitted)")

    c = sub.add_parser("compare", parents=[common], help="stability tables from FI/attribution files")
    c.add_argument("files", nargs="+",
                   help="fi.json / shap.json files carrying scenario and task fields, or a run directory")
    c.add_argument("--mode", choices=REPORT_KINDS, required=True)
    c.add_argument("--domains", help="schema JSON mapping columns to domains (task mode)")

    p = sub.add_parser("plot", parents=[common], help="beeswarm and importance-bar SVGs")
    p.add_argument("--shap", help="attribution file")
    p.add_argument("--matrix", help="feature matrix CSV aligned with the attribution rows")
    p.add_argument("--fi", help="importance vector file")
    p.add_argument("--top-n", type=int, default=10)
    return parser


def _opt(args, name, default=None):
    return getattr(args, name, default)


def cmd_synth(args) -> int:
    cfg = SynthConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = SynthConfig.from_json(json.load(fh))
    if _opt(args, "seed") is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = Path(_opt(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    write_dataset(generate_synthetic(cfg), out / "data.csv", out / "schema.json")
    print(f"wrote {out / 'data.csv'} and {out / 'schema.json'}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .experiment import ExperimentConfig

    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if _opt(args, "seed") is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = Path(_opt(args, "out", cfg.out_dir))
    manifest = run_experiment(cfg, out, _opt(args, "jobs", 1))
    print(f"wrote {len(manifest['files'])} files under {out} (manifest.json)")
    recs = {k: report.from_json_text((out / f"report_{k}.json").read_text(encoding="utf-8")) for k in REPORT_KINDS}
    return EXIT_DEGENERATE if degenerate(recs) else EXIT_OK


def _expand(paths, domains_path):
    """Run directories expand to their FI/attribution files in config order."""
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            cfg = load_config(p / "config.json")
            for spec in cfg.scenarios:
                files += [p / spec.slug / "fi.json", p / spec.slug / "shap.json"]
            if domains_path is None and (p / "schema.json").exists():
                domains_path = p / "schema.json"
        else:
            files.append(p)
    return files, domains_path


def cmd_compare(args) -> int:
    files, domains_path = _expand(args.files, args.domains)
    domains = schema_domains(load_schema(domains_path)) if domains_path else {}
    records = compare_files(files, args.mode, domains)
    text = report.emit(records, args.mode, _opt(args, "format", "md"))
    out = _opt(args, "out")
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for r in records:
        if r.undefined:
            print(f"warning: {r.left} / {r.right}: undefined {', '.join(r.undefined)}", file=sys.stderr)
    return EXIT_DEGENERATE if degenerate(records) else EXIT_OK


def cmd_plot(args) -> int:
    if not args.shap and not args.fi:
        raise ValueError("plot needs --shap (with --matrix) and/or --fi")
    spec = PlotSpec(top_n=args.top_n)
    out = Path(_opt(args, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    if args.shap:
        if not args.matrix:
            raise ValueError("--shap needs --matrix for feature-value colors")
        mats, _ = read_attributions(args.shap)
        write_svg(out / "beeswarm.svg", beeswarm_svg(mats[-1], read_feature_matrix(args.matrix), spec))
    if args.fi:
        write_svg(out / "fi_bar.svg", fi_bar_svg(read_importance(args.fi), spec))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "run": cmd_run, "compare": cmd_compare, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (ValueError, OSError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
