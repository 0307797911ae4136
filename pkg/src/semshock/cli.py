"""Command-line interface.

Subcommands run prefixes of the pipeline from a config file and write their
stage artifacts; ``synth`` generates verification datasets. Exit codes:
0 success, 1 fatal input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import causality, ingest, pipeline, reports, synth
from .config import PipelineConfig, load_config
from .errors import InputError, NumericError

log = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are input errors (exit 1)
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_shared(parser: argparse.ArgumentParser, config_required: bool = True) -> None:
    parser.add_argument("--config", required=config_required, help="path to the YAML config")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory override")


def _load(args) -> PipelineConfig:
    overrides = {"seed": args.seed, "out_dir": args.out}
    return load_config(args.config, overrides)


def _out_dir(config: PipelineConfig) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_ingest(args) -> None:
    config = _load(args)
    config.validate_paths()
    out = _out_dir(config)
    articles = pipeline.stage_articles(config)
    embeddings = pipeline.stage_embedding_series(config, articles)
    rows = []
    arrays = {}
    for outlet_id in sorted(embeddings):
        s = embeddings[outlet_id]
        rows.append(
            {
                "outlet": outlet_id,
                "orientation": s.orientation,
                "days": len(s),
                "active_days": s.active_days,
                "coverage": s.active_days / len(s),
            }
        )
        arrays[f"{outlet_id}.vectors"] = s.vectors
        arrays[f"{outlet_id}.counts"] = s.article_counts
    reports.write_csv(pd.DataFrame(rows), out / "coverage.csv")
    np.savez(out / "daily_embeddings.npz", **arrays)
    print(f"wrote {out / 'coverage.csv'} and {out / 'daily_embeddings.npz'}")


def cmd_features(args) -> None:
    config = _load(args)
    config.validate_paths()
    out = _out_dir(config)
    articles = pipeline.stage_articles(config)
    embeddings = pipeline.stage_embedding_series(config, articles)
    shocks, _ = pipeline.stage_shocks(config)
    panel = pipeline.stage_panel(config, embeddings, articles, shocks)
    reports.write_csv(panel.to_frame(), out / "panel.csv")
    print(f"wrote {out / 'panel.csv'} ({panel.n_rows} rows, {len(panel.columns)} columns)")


def cmd_shocks(args) -> None:
    config = _load(args)
    config.validate_paths()
    if config.market_path is None:
        raise InputError("shocks subcommand needs market_path in the config")
    config.shocks_path = None  # force local identification
    out = _out_dir(config)
    shocks, factors = pipeline.stage_shocks(config)
    ingest.write_shocks_csv(shocks, out / "shocks_identified.csv")
    print(f"wrote {out / 'shocks_identified.csv'} "
          f"(accepted after {factors.draws_tried} rotation draws)")


def cmd_grid(args) -> None:
    config = _load(args)
    config.validate_paths()
    out = _out_dir(config)
    articles = pipeline.stage_articles(config)
    embeddings = pipeline.stage_embedding_series(config, articles)
    shocks, _ = pipeline.stage_shocks(config)
    panel = pipeline.stage_panel(config, embeddings, articles, shocks)
    results = pipeline.stage_grid(config, panel)
    reports.write_csv(reports.results_frame(results), out / "results.csv")
    print(f"wrote {out / 'results.csv'} ({len(results)} pair results)")


def cmd_infer(args) -> None:
    config = _load(args)
    config.validate_paths()
    out = _out_dir(config)
    articles = pipeline.stage_articles(config)
    embeddings = pipeline.stage_embedding_series(config, articles)
    shocks, _ = pipeline.stage_shocks(config)
    panel = pipeline.stage_panel(config, embeddings, articles, shocks)
    results = pipeline.stage_grid(config, panel)
    groups, selected, confounders, feedback = pipeline.stage_inference(config, panel, results)
    reports.write_csv(reports.results_frame(results), out / "results.csv")
    reports.write_csv(reports.groups_frame(groups), out / "groups.csv")
    reports.write_confounders(confounders, out / "confounders.txt")
    reports.write_feedback(feedback, out / "feedback.txt")
    print(f"{len(selected)} pairs pass the corrected threshold; "
          f"{len(feedback)} feedback loops; reports in {out}")


def cmd_report(args) -> None:
    cmd_pipeline(args)


def cmd_pipeline(args) -> None:
    config = _load(args)
    bundle = pipeline.run_pipeline(config)
    print(f"{len(bundle.results)} pair results; {len(bundle.selected)} selected; "
          f"{len(bundle.files)} files in {config.out_dir}")


def cmd_synth(args) -> None:
    out = Path(args.out or "synth_out")
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else 0
    if args.kind == "corpus":
        paths = synth.make_fixture_corpus(out, seed=seed, n_days=args.n)
        print(f"fixture corpus in {out}: " + ", ".join(str(p) for p in
              (paths["articles"], paths["shocks"], paths["config"])))
        return
    spec = synth.SyntheticSpec(
        kind=args.kind,
        n=args.n,
        lag=args.lag,
        coupling=args.coupling,
        strength=args.strength,
        seed=seed,
        n_series=args.n_series,
        decoys=args.decoys,
    )
    data = synth.gen_synthetic(spec)
    reports.write_csv(data.panel.to_frame(), out / "panel.csv")
    edges = [vars(e) for e in data.edges]
    (out / "edges.json").write_text(json.dumps(edges, indent=2) + "\n", encoding="utf-8")
    written = ["panel.csv", "edges.json"]
    if data.market is not None:
        frame = pd.DataFrame(
            {
                "date": [d.isoformat() for d in data.market.dates],
                "dy2": data.market.y[:, 0],
                "dy5": data.market.y[:, 1],
                "dy10": data.market.y[:, 2],
                "dlogS": data.market.y[:, 3],
            }
        )
        reports.write_csv(frame, out / "market.csv")
        truth = pd.DataFrame(data.true_shocks, columns=list(ingest.SHOCK_NAMES))
        reports.write_csv(truth, out / "true_shocks.csv")
        written += ["market.csv", "true_shocks.csv"]
    print(f"wrote {', '.join(written)} in {out}")


def build_parser() -> _Parser:
    parser = _Parser(prog="semshock",
                     description="Granger-causality toolkit for news semantic shifts and market shocks")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler, needs_config in [
        ("ingest", cmd_ingest, True),
        ("features", cmd_features, True),
        ("shocks", cmd_shocks, True),
        ("grid", cmd_grid, True),
        ("infer", cmd_infer, True),
        ("report", cmd_report, True),
        ("pipeline", cmd_pipeline, True),
    ]:
        p = sub.add_parser(name)
        _add_shared(p, config_required=needs_config)
        p.set_defaults(handler=handler)

    p = sub.add_parser("synth", help="generate synthetic verification data")
    p.add_argument("--kind", required=True,
                   choices=list(synth.SYNTH_KINDS) + ["corpus"])
    p.add_argument("--n", type=int, default=1000, help="series length (days)")
    p.add_argument("--lag", type=int, default=3)
    p.add_argument("--coupling", choices=synth.COUPLINGS, default="linear")
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--n-series", type=int, default=2, dest="n_series")
    p.add_argument("--decoys", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_synth)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.handler(args)
    except InputError as exc:
        log.error("%s", exc)
        return 1
    except NumericError as exc:
        log.error("numerical failure: %s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
