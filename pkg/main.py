"""
Command-line interface of the Chebyshev network experiment harness.

    python run.py compare --data auto.csv wdbc.csv --out results
    python run.py prune --model results/rings_cheby.json --data rings.csv
    python run.py fit --expr "x0**2 * x1" --dims 2 --order 2

Every subcommand exits 0 on success; any error prints one `error: ...` line
to stderr and exits 1.
"""

import argparse
import logging
import os
import sys

from config import Config
from data import load_csv, make_rings, make_xor, save_csv, stratified_split_indices
from diagnostic_tool import run_diagnostics
from exports import BOUNDARY_FIELDS, CURVE_FIELDS, export_boundary_grid, export_weight_curves, write_csv
from harness import (bench_timing, compare_datasets, fit_function, k_sweep, prune_run, results_document,
                     sweep_rows, train_and_save, write_results)
from models import ExperimentConfig, RunResult
from network import load_model
from prune import STRATEGIES
from run_logger import configure_logging

logger = logging.getLogger(__name__)


def experiment_config(args, settings):
    """Experiment settings from the config file, overridden by command-line flags."""
    return ExperimentConfig.from_dict(
        settings["experiment"],
        hidden=args.hidden, lr=args.lr, epochs=args.epochs, repeats=args.repeats, k=args.k,
        mode=args.mode, seed=args.seed, train_fraction=args.train_fraction, batch_size=args.batch,
        parity=getattr(args, "parity", None) or None,
    )


def output_dir(args, settings):
    return args.out or settings.get("output_dir") or "results"


def cmd_train(args, settings):
    config = experiment_config(args, settings)
    dataset = load_csv(args.data)
    path = args.model_out or os.path.join(output_dir(args, settings), f"{dataset.name}_{args.model}.json")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    result = train_and_save(config, dataset, args.model, path)
    write_results(os.path.join(output_dir(args, settings), f"train_{dataset.name}_{args.model}.json"),
                  results_document("train", {"dataset": dataset.name, "config": config.to_dict(),
                                             "run": result.to_dict(args.timings), "model_file": path}))
    print(f"{dataset.name}: {result}")
    print(f"Model saved to {path}")
    return 0


def cmd_compare(args, settings):
    config = experiment_config(args, settings)
    datasets = [load_csv(path) for path in args.data]
    results, tally = compare_datasets(config, datasets)
    for result in results:
        print(result.summary_line())
    print(f"cheby wins {tally['win']}, losses {tally['loss']}, ties {tally['tie']}, failed {tally['failed']}")
    doc = results_document("compare", {
        "comparisons": [r.to_dict(args.timings) for r in results],
        "tally": tally,
    })
    path = write_results(os.path.join(output_dir(args, settings), "compare.json"), doc)
    print(f"Results written to {path}")
    return 0


def cmd_sweep_k(args, settings):
    config = experiment_config(args, settings)
    dataset = load_csv(args.data)
    sweep = k_sweep(config, dataset, args.ks)
    rows = sweep_rows(sweep)
    for row in rows:
        print(f"k={row['k']}: cheby params {row['cheby_params']}, accuracy {row['cheby_best_accuracy']}, "
              f"F1 {row['cheby_f1']}")
    out = output_dir(args, settings)
    write_csv(os.path.join(out, f"sweep_k_{dataset.name}.csv"), list(rows[0].keys()), rows)
    write_results(os.path.join(out, f"sweep_k_{dataset.name}.json"), results_document("sweep-k", {
        "dataset": dataset.name,
        "rows": rows,
        "comparisons": [result.to_dict(args.timings) for _, result in sweep],
    }))
    return 0


def cmd_prune(args, settings):
    prune_settings = settings["prune"]
    dataset = load_csv(args.data)
    report, frontier = prune_run(
        args.model, dataset,
        strategy=args.strategy or prune_settings["strategy"],
        tau=args.tau,
        percentiles=args.percentiles or prune_settings["percentiles"],
        fine_tune_epochs=args.fine_tune_epochs or prune_settings["fine_tune_epochs"],
        lr=args.lr,
        tolerance=prune_settings["tolerance"] if args.tolerance is None else args.tolerance,
        order=args.layers,
        out_path=args.model_out,
    )
    print(report.summary_line(dataset.name))
    write_results(os.path.join(output_dir(args, settings), f"prune_{dataset.name}.json"),
                  results_document("prune", {"dataset": dataset.name, "report": report.to_dict(),
                                             "frontier": frontier}))
    return 0


def cmd_boundary(args, settings):
    net, scaler, metadata = load_model(args.model)
    dataset = None
    if args.data:
        dataset = load_csv(args.data)
        if args.split == "test":
            _, test_idx = stratified_split_indices(dataset, float(metadata.get("train_fraction", 0.8)),
                                                   int(metadata.get("split_seed", 0)))
            dataset = dataset.subset(test_idx)
    rows = export_boundary_grid(net, args.resolution, dataset, scaler, args.pair)
    path = write_csv(os.path.join(output_dir(args, settings), "boundary.csv"), BOUNDARY_FIELDS, rows)
    print(f"Boundary grid written to {path}")
    return 0


def cmd_curves(args, settings):
    net, _, _ = load_model(args.model)
    rows = export_weight_curves(net, args.layer, args.samples)
    path = write_csv(os.path.join(output_dir(args, settings), f"curves_layer{args.layer}.csv"), CURVE_FIELDS, rows)
    print(f"Weight curves written to {path}")
    return 0


def cmd_bench(args, settings):
    bench = settings["bench"]
    config = experiment_config(args, settings)
    rows = bench_timing(
        args.features or bench["features"],
        args.ks or bench["ks"],
        hidden=config.hidden,
        batch_size=args.batch or bench["batch_size"],
        repetitions=args.repetitions or bench["repetitions"],
        warmup=bench["warmup"],
        lr=config.lr,
        seed=config.seed,
    )
    fields = ["model", "features", "k", "train_s_per_batch", "infer_s_per_batch"]
    path = write_csv(os.path.join(output_dir(args, settings), "bench.csv"), fields, rows)
    for row in rows:
        print(f"{row['model']} features={row['features']} k={row['k']}: "
              f"train {row['train_s_per_batch']:.3e}s, infer {row['infer_s_per_batch']:.3e}s")
    print(f"Timings written to {path}")
    return 0


def cmd_fit(args, settings):
    result = fit_function(args.expr, args.dims, args.order, pairwise=args.pairwise, seed=args.seed or 0)
    path = write_results(os.path.join(output_dir(args, settings), "fit.json"), results_document("fit", result))
    print(f"max |error| on random points: {result['max_abs_error']:.3e}")
    print(f"Coefficients written to {path}")
    return 0


def cmd_synth(args, settings):
    seed = args.seed or 0
    if args.kind == "rings":
        dataset = make_rings(args.n, args.noise, seed)
    else:
        dataset = make_xor(args.n, seed)
    path = os.path.join(output_dir(args, settings), f"{args.kind}.csv")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    save_csv(dataset, path)
    print(f"{dataset} written to {path}")
    return 0


def cmd_diagnose(args, settings):
    return 0 if run_diagnostics(args.config) else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', default=None, help='JSON config file (default: config.json)')
    common.add_argument('--seed', type=int, default=None, help='Base seed for splits and repeats')
    common.add_argument('--k', type=int, default=None, help='Chebyshev order')
    common.add_argument('--mode', choices=['weight', 'expansion'], default=None, help='Chebyshev layer form')
    common.add_argument('--hidden', type=int, nargs='+', default=None, help='Hidden layer widths')
    common.add_argument('--epochs', type=int, default=None, help='Training epochs')
    common.add_argument('--lr', type=float, default=None, help='Learning rate')
    common.add_argument('--repeats', type=int, default=None, help='Independent trainings per model')
    common.add_argument('--train-fraction', type=float, default=None, help='Share of samples used for training')
    common.add_argument('--batch', type=int, default=None, help='Mini-batch size (default: full batch)')
    common.add_argument('--out', default=None, help='Output directory')
    common.add_argument('--timings', action='store_true', help='Write wall times into results documents')
    common.add_argument('--log-level', default=None, help='Logging level (DEBUG, INFO, ...)')
    common.add_argument('--log-file', default=None, help='Also append logs to this file')

    parser = argparse.ArgumentParser(description='Chebyshev adaptive network experiment harness')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train', parents=[common], help='Train one architecture and save the best repeat')
    p.add_argument('--data', required=True, help='Dataset CSV')
    p.add_argument('--model', choices=[RunResult.MODEL_CHEBY, RunResult.MODEL_MLP], default=RunResult.MODEL_CHEBY)
    p.add_argument('--model-out', default=None, help='Model file to write')
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser('compare', parents=[common], help='MLP vs Chebyshev best-of-repeats comparison')
    p.add_argument('--data', required=True, nargs='+', help='One or more dataset CSVs')
    p.add_argument('--parity', action='store_true', help='Widen the MLP to at least the Chebyshev parameter count')
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser('sweep-k', parents=[common], help='Compare across Chebyshev orders')
    p.add_argument('--data', required=True, help='Dataset CSV')
    p.add_argument('--ks', type=int, nargs='+', default=[0, 1, 3, 6, 10], help='Orders to try')
    p.set_defaults(handler=cmd_sweep_k)

    p = sub.add_parser('prune', parents=[common], help='Prune a trained model')
    p.add_argument('--model', required=True, help='Model file from train')
    p.add_argument('--data', required=True, help='Dataset CSV the model was trained on')
    p.add_argument('--strategy', choices=list(STRATEGIES), default=None)
    p.add_argument('--tau', type=float, default=None, help='Absolute threshold (default: percentile sweep)')
    p.add_argument('--percentiles', type=float, nargs='+', default=None, help='Per-layer percentiles to sweep')
    p.add_argument('--fine-tune-epochs', type=int, default=None, help='Epochs of fine-tuning after each layer')
    p.add_argument('--tolerance', type=float, default=None, help='Accepted accuracy drop in points')
    p.add_argument('--layers', type=int, nargs='+', default=None, help='Layer indices to prune')
    p.add_argument('--model-out', default=None, help='Where to save the pruned model')
    p.set_defaults(handler=cmd_prune)

    p = sub.add_parser('boundary', parents=[common], help='Export a decision-boundary grid')
    p.add_argument('--model', required=True)
    p.add_argument('--data', default=None, help='Dataset CSV whose samples are overlaid')
    p.add_argument('--split', choices=['test', 'all'], default='test', help='Which samples to overlay')
    p.add_argument('--resolution', type=int, default=100)
    p.add_argument('--pair', type=int, nargs=2, default=None, help='Feature indices on the x and y axes')
    p.set_defaults(handler=cmd_boundary)

    p = sub.add_parser('curves', parents=[common], help='Export adaptive weight curves of a layer')
    p.add_argument('--model', required=True)
    p.add_argument('--layer', type=int, default=0)
    p.add_argument('--samples', type=int, default=101)
    p.set_defaults(handler=cmd_curves)

    p = sub.add_parser('bench', parents=[common], help='Time training and inference per batch')
    p.add_argument('--features', type=int, nargs='+', default=None)
    p.add_argument('--ks', type=int, nargs='+', default=None)
    p.add_argument('--repetitions', type=int, default=None)
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser('fit', parents=[common], help='Fit a multivariate Chebyshev series to an expression')
    p.add_argument('--expr', required=True, help='Expression in x0, x1, ... and numpy functions')
    p.add_argument('--dims', type=int, required=True)
    p.add_argument('--order', type=int, required=True)
    p.add_argument('--pairwise', action='store_true', help='Fit a sum of bivariate series instead')
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser('synth', parents=[common], help='Write a synthetic dataset CSV')
    p.add_argument('--kind', choices=['rings', 'xor'], required=True)
    p.add_argument('--n', type=int, default=600)
    p.add_argument('--noise', type=float, default=0.03, help='Radial noise of the rings')
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('diagnose', parents=[common], help='Print configuration and run basis self-checks')
    p.set_defaults(handler=cmd_diagnose)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    settings = Config.load_config(args.config)
    log_settings = settings["logging"]
    try:
        configure_logging(args.log_level or log_settings.get("level") or "INFO",
                          args.log_file or log_settings.get("log_file"))
        return args.handler(args, settings)
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
