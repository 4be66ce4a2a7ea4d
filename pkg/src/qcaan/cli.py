"""Command-line front end.

    qcaan prepare  --config cfg.json     validate datasets against the catalog
    qcaan metadata --config cfg.json     distance metadata + registry check
    qcaan exp1     --config cfg.json     the dataset x strategy x seed matrix
    qcaan exp2     --config cfg.json     the PCA'd single-dataset comparison
    qcaan analyze  --config cfg.json     statistics + explainability reports
    qcaan plots    --config cfg.json     figures with CSV twins

The config file is JSON; any omitted field takes its default, and
`"profile": "dev"` switches to the 8-qubit desk-scale defaults.  The output
root honors the QCAAN_OUT environment variable.  Exit code 0 means every
configured cell produced an ok record.
"""

from __future__ import annotations

import argparse
import sys

from .config import ExperimentConfig
from .plots import PLOT_FORMATS, emit_plots
from .runner import compute_all_metadata, prepare_datasets, run_analysis, \
    run_experiment1, run_experiment2


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    if args.out:
        config.output_dir = args.out
    return config


def cmd_prepare(args) -> int:
    config = _load_config(args)
    datasets, reports = prepare_datasets(config)
    for rec in reports:
        status = "ok" if rec["admitted"] and not rec["catalog_issues"] else "CHECK"
        print(f"[{status}] {rec['name']}: f={rec['f']} n={rec['n_samples']} "
              f"neg={rec['n_neg']} pos={rec['n_pos']} ratio={rec['ratio']:.2f}"
              + (f"  ({rec['catalog_issues']})" if rec["catalog_issues"] else ""))
    return 0 if all(r["admitted"] and not r["catalog_issues"] for r in reports) else 1


def cmd_metadata(args) -> int:
    config = _load_config(args)
    metadata, discrepancies = compute_all_metadata(config)
    for name, meta in metadata.items():
        print(f"{name}: ratio={meta.ratio:.2f} dn={meta.dn} dp={meta.dp} dnp={meta.dnp}"
              + ("  [subsampled]" if meta.subsampled else ""))
    for item in discrepancies:
        print(f"DISCREPANCY {item['dataset']}: {item['issue']}")
    print(f"metadata written under {config.run_dir()}")
    return 0 if not discrepancies else 1


def cmd_exp1(args) -> int:
    config = _load_config(args)
    rows, ok = run_experiment1(config)
    print(f"{len(rows)} result rows under {config.run_dir()}")
    return 0 if ok else 1


def cmd_exp2(args) -> int:
    config = _load_config(args)
    result = run_experiment2(config)
    for row in result["summary"]:
        print(f"{row['regime']}: accuracy={row['accuracy']:.4f} "
              f"precision={row['precision']:.4f} recall={row['recall']:.4f} "
              f"auc={row['auc']:.4f}")
    d = result["distinguishability"]
    print(f"distinguishability accuracy={d.accuracy:.4f} "
          f"(tn={d.tn} fp={d.fp} fn={d.fn} tp={d.tp})")
    return 0


def cmd_analyze(args) -> int:
    config = _load_config(args)
    out = run_analysis(config)
    print(f"analysis reports under {out}")
    return 0


def cmd_plots(args) -> int:
    config = _load_config(args)
    fmt = args.format or config.plot_format
    out = emit_plots(config.run_dir(), fmt)
    print(f"plots under {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcaan", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("prepare", cmd_prepare), ("metadata", cmd_metadata),
                     ("exp1", cmd_exp1), ("exp2", cmd_exp2),
                     ("analyze", cmd_analyze), ("plots", cmd_plots)):
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="JSON config file")
        cmd.add_argument("--out", default=None, help="override the output root")
        if name == "plots":
            cmd.add_argument("--format", choices=PLOT_FORMATS, default=None)
        cmd.set_defaults(handler=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
