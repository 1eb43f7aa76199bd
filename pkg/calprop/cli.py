import argparse
import logging
from typing import Callable, Dict, List, NamedTuple, Optional
import pandas as pd
from . import constants
from . import settings as _settings
from .data import SplitSpec, read_csv, split_train_calibration, write_csv
from .drug_bench import bench_drug
from .estimators import estimate, fit_outcome_model, iptw_terms, run_pipeline
from .exceptions import CalpropException, ConfigError, ParameterError
from .gwas_bench import DEFAULT_METHODS, GwasMethod, run_gwas_benchmark
from .metrics import ece
from .models import dump_model, fit_model
from .recalibration import CalibratedModel, load_model, recalibration_step
from .reports import (calibration_summary, effect_histogram, output_path, propensity_histograms, provenance,
                      reliability_table, write_json, write_table)
from .simulators import DrugSimConfig, SpatialGwasConfig, simulate_binary_confounder, simulate_drug, \
    simulate_spatial_gwas


LOGGER = logging.getLogger("calprop.cli")
LOGGER.setLevel(logging.INFO)


class RunConfig(NamedTuple):
    """
    A validated command line invocation: the subcommand, its options, the
    global seed and the output directory.
    """

    command: str
    options: dict
    seed: int
    out_dir: str
    settings: dict

    def provenance(self) -> dict:
        return provenance(self.command, {"options": self.options, "settings": self.settings}, self.seed)


def _add_data_options(parser: argparse.ArgumentParser):
    parser.add_argument("--data", required=True, help="CSV file with a header row")
    parser.add_argument("--treatment-col", default="t", help="Name of the treatment column")
    parser.add_argument("--outcome-col", default="y", help="Name of the outcome column")


def _add_model_options(parser: argparse.ArgumentParser, recal_default: str = "isotonic"):
    parser.add_argument("--base", choices=constants.BASE_MODELS, default="logistic", help="Base propensity model")
    parser.add_argument("--recal", choices=constants.RECALIBRATORS, default=recal_default, help="Recalibrator")
    parser.add_argument("--folds", type=int, help="Number of cross-fitting folds (default from settings)")
    parser.add_argument("--calib-fraction", type=float,
                        help="Use one split with this calibration fraction instead of folds")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="calprop",
                                     description="Treatment effect estimation with calibrated propensity scores")
    parser.add_argument("--config", help="Settings JSON (default: $CALPROP_SETTINGS or the per-user file)")
    parser.add_argument("--out-dir", default=".", help="Directory for every output file")
    parser.add_argument("--seed", type=int, default=0, help="Global seed")
    parser.add_argument("--clamp-eps", type=float, help="Clamp of recalibrated propensities")
    parser.add_argument("--ece-bins", type=int, help="Number of ECE bins")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Log debug messages")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Log warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Simulate a study and write it as CSV")
    simulate.add_argument("study", choices=("drug", "binary", "gwas"))
    simulate.add_argument("--variant", choices=constants.DRUG_VARIANTS, default="A")
    simulate.add_argument("--n", type=int, default=20_000)
    simulate.add_argument("--m", type=int, default=100)
    simulate.add_argument("--alpha", type=float, default=0.1)
    simulate.add_argument("--causal-frac", type=float, default=0.01)
    simulate.add_argument("--op", choices=("xor", "and"), default="xor")

    fit = commands.add_parser("fit", help="Fit a (recalibrated) propensity model and write it as JSON")
    _add_data_options(fit)
    fit.add_argument("--base", choices=constants.BASE_MODELS, default="logistic")
    fit.add_argument("--recal", choices=constants.RECALIBRATORS, default="isotonic")
    fit.add_argument("--calib-fraction", type=float, default=0.5)
    fit.add_argument("--model-out", default="model.json", help="Model file name inside the output directory")

    estimate_parser = commands.add_parser("estimate", help="Estimate the average treatment effect")
    _add_data_options(estimate_parser)
    _add_model_options(estimate_parser)
    estimate_parser.add_argument("--estimator", choices=constants.ESTIMATORS, default="iptw")
    estimate_parser.add_argument("--model", help="Use a fitted model file instead of fitting")
    estimate_parser.add_argument("--hajek", action="store_true", help="Normalize IPTW weights per group")

    reliability = commands.add_parser("reliability", help="Write reliability bins and propensity histograms")
    _add_data_options(reliability)
    _add_model_options(reliability)
    reliability.add_argument("--model", help="Use a fitted model file instead of fitting")
    reliability.add_argument("--hist-bins", type=int, default=100)

    bench = commands.add_parser("bench", help="Run a benchmark")
    benches = bench.add_subparsers(dest="bench", required=True)
    drug = benches.add_parser("drug", help="Plain against recalibrated propensities on the drug simulations")
    drug.add_argument("--variants", nargs="+", choices=constants.DRUG_VARIANTS, default=list(constants.DRUG_VARIANTS))
    drug.add_argument("--base", nargs="+", choices=constants.BASE_MODELS, default=["logistic"])
    drug.add_argument("--recal", nargs="+", choices=constants.RECALIBRATORS, default=["isotonic"])
    drug.add_argument("--seeds", nargs="*", type=int, default=list(range(10)))
    drug.add_argument("--n", type=int, default=20_000)
    drug.add_argument("--folds", type=int)
    drug.add_argument("--estimator", choices=("iptw", "aipw"), default="iptw")
    gwas = benches.add_parser("gwas", help="Per-SNP effect estimation on the spatial GWAS simulation")
    gwas.add_argument("--alpha", type=float, default=0.1)
    gwas.add_argument("--n", type=int, default=4000)
    gwas.add_argument("--m", type=int, default=100)
    gwas.add_argument("--causal-frac", nargs="+", type=float, default=[0.01])
    gwas.add_argument("--seeds", nargs="*", type=int, default=list(range(5)))
    gwas.add_argument("--methods", nargs="+", default=list(DEFAULT_METHODS))
    gwas.add_argument("--threads", type=int)
    gwas.add_argument("--folds", type=int)
    gwas.add_argument("--recal", choices=("isotonic", "sigmoid"), default="isotonic")
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    settings = _settings.load(args.config)
    if args.clamp_eps is not None:
        settings["clamp_eps"] = args.clamp_eps
    if args.ece_bins is not None:
        settings["ece_bins"] = args.ece_bins
    if getattr(args, "threads", None) is not None:
        settings["threads"] = args.threads
    if not 0.0 < settings["clamp_eps"] < 0.5:
        raise ParameterError(f"--clamp-eps must lie in (0, 0.5), got {settings['clamp_eps']}")
    if settings["ece_bins"] < 1:
        raise ParameterError(f"--ece-bins must be at least 1, got {settings['ece_bins']}")
    if args.seed < 0:
        raise ParameterError(f"--seed must be non-negative, got {args.seed}")
    if getattr(args, "calib_fraction", None) is not None and getattr(args, "folds", None) is not None:
        raise ConfigError("--folds and --calib-fraction are mutually exclusive")

    ignored = {"config", "out_dir", "seed", "clamp_eps", "ece_bins", "verbose", "quiet", "command", "bench"}
    options = {key: value for key, value in vars(args).items() if key not in ignored}
    command = args.command if args.command != "bench" else f"bench-{args.bench}"
    return RunConfig(command, options, args.seed, args.out_dir, settings)


def _split_spec(run: RunConfig) -> SplitSpec:
    fraction = run.options.get("calib_fraction")
    if fraction is not None:
        return SplitSpec(calibration_fraction=fraction, seed=run.seed)
    return SplitSpec(fold_count=run.options.get("folds") or _settings.value(run.settings, "folds"), seed=run.seed)


def _read(run: RunConfig):
    return read_csv(run.options["data"], run.options["treatment_col"], run.options["outcome_col"])


def _finish(run: RunConfig, name: str = "provenance.json"):
    write_json(run.provenance(), output_path(run.out_dir, name))


def run_simulate(run: RunConfig):
    options = run.options
    if options["study"] == "gwas":
        gwas = simulate_spatial_gwas(SpatialGwasConfig(options["n"], options["m"], options["alpha"],
                                                       options["causal_frac"], run.seed))
        names = [f"snp{index}" for index in range(gwas.m)]
        write_table(pd.DataFrame(gwas.genotypes, columns=names), output_path(run.out_dir, "genotypes.csv"))
        write_table(pd.DataFrame({"y": gwas.phenotypes}), output_path(run.out_dir, "phenotypes.csv"))
        write_table(pd.DataFrame({"snp": names, "beta": gwas.true_beta}), output_path(run.out_dir, "true_beta.csv"))
        _finish(run)
        return
    if options["study"] == "drug":
        study = simulate_drug(DrugSimConfig(options["variant"], options["n"], run.seed))
    else:
        study = simulate_binary_confounder(options["n"], run.seed, options["op"])
    write_csv(study.data, output_path(run.out_dir, "data.csv"))
    write_json({"true_ate": study.true_ate, "true_ratio": study.true_ratio, "clamped_means": study.clamped_means},
               output_path(run.out_dir, "truth.json"))
    _finish(run)


def run_fit(run: RunConfig):
    options = run.options
    data = _read(run)
    eps = _settings.value(run.settings, "clamp_eps")
    if options["recal"] == "none":
        model = fit_model(options["base"], data, run.settings, run.seed)
    else:
        train, calibration = split_train_calibration(
            data, SplitSpec(calibration_fraction=options["calib_fraction"], seed=run.seed))
        model = recalibration_step(fit_model(options["base"], train, run.settings, run.seed), calibration,
                                   options["recal"], eps)
    dump_model(model, output_path(run.out_dir, options["model_out"]))
    _finish(run)


def _model_propensities(run: RunConfig, data):
    model = load_model(run.options["model"])
    propensities = model.predict_proba(data.covariates)
    plain = model.base.predict_proba(data.covariates) if isinstance(model, CalibratedModel) else propensities
    return plain, propensities


def run_estimate(run: RunConfig):
    options = run.options
    data = _read(run)
    bins = _settings.value(run.settings, "ece_bins")
    if options["model"]:
        plain, propensities = _model_propensities(run, data)
        outcome = fit_outcome_model(data) if options["estimator"] == "aipw" else None
        result = estimate(data, options["estimator"], propensities, outcome, options["hajek"])
        ece_before = ece(plain, data.treatments, bins).ece
        ece_after = ece(propensities, data.treatments, bins).ece
    else:
        pipeline = run_pipeline(data, options["base"], options["recal"], options["estimator"], _split_spec(run),
                                _settings.value(run.settings, "clamp_eps"), run.settings, options["hajek"], bins)
        result = pipeline.estimate
        ece_before, ece_after = pipeline.ece_before, pipeline.ece_after
    document = result.to_dict()
    document.update({"ece_before": ece_before, "ece_after": ece_after, "seed": run.seed})
    write_json(document, output_path(run.out_dir, "estimate.json"))
    _finish(run)


def run_reliability(run: RunConfig):
    options = run.options
    data = _read(run)
    bins = _settings.value(run.settings, "ece_bins")
    if options["model"]:
        plain, calibrated = _model_propensities(run, data)
    else:
        pipeline = run_pipeline(data, options["base"], options["recal"], "iptw", _split_spec(run),
                                _settings.value(run.settings, "clamp_eps"), run.settings, ece_bins=bins)
        plain, calibrated = pipeline.plain_propensities, pipeline.propensities
    write_table(reliability_table(data.treatments, plain, calibrated, bins),
                output_path(run.out_dir, "reliability.csv"))
    write_table(propensity_histograms(plain, calibrated, options["hist_bins"]),
                output_path(run.out_dir, "propensity_histograms.csv"))
    write_table(effect_histogram(iptw_terms(data, calibrated)), output_path(run.out_dir, "effect_histogram.csv"))
    write_json(calibration_summary(data.treatments, plain, calibrated, bins),
               output_path(run.out_dir, "reliability_summary.json"))
    _finish(run)


def run_bench_drug(run: RunConfig):
    options = run.options
    result = bench_drug(options["variants"], options["base"], options["recal"], options["seeds"], options["n"],
                        options["folds"], _settings.value(run.settings, "clamp_eps"), options["estimator"],
                        run.settings)
    write_table(result.to_frame(), output_path(run.out_dir, "bench_drug.csv"))
    _finish(run)


def run_bench_gwas(run: RunConfig):
    options = run.options
    configs = [SpatialGwasConfig(options["n"], options["m"], options["alpha"], fraction)
               for fraction in options["causal_frac"]]
    for config in configs:
        config.validate()
    methods = [GwasMethod.parse(method) for method in options["methods"]]
    result = run_gwas_benchmark(configs, methods, options["seeds"], options["folds"], options["recal"],
                                _settings.value(run.settings, "clamp_eps"), run.settings,
                                _settings.value(run.settings, "threads"))
    write_table(result.to_frame(), output_path(run.out_dir, "bench_gwas.csv"))
    write_table(result.timing_frame(), output_path(run.out_dir, "bench_gwas_timing.csv"))
    _finish(run)


COMMANDS: Dict[str, Callable[[RunConfig], None]] = {
    "simulate": run_simulate,
    "fit": run_fit,
    "estimate": run_estimate,
    "reliability": run_reliability,
    "bench-drug": run_bench_drug,
    "bench-gwas": run_bench_gwas,
}


def _configure_logging(level: int):
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    for handler in logging.getLogger().handlers:
        handler.setLevel(level)
    # Module loggers pin INFO; only verbose runs lower them.
    for name in list(logging.root.manager.loggerDict):
        if name == "calprop" or name.startswith("calprop."):
            logging.getLogger(name).setLevel(min(level, logging.INFO))


def main(argv: Optional[List[str]] = None) -> int:
    """
    Runs the command line. Returns the exit code: 0 on success, 2 for
    configuration errors, 3 for data errors and 4 for numeric errors.
    """

    args = build_parser().parse_args(argv)
    _configure_logging(logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO)
    try:
        run = _resolve(args)
        COMMANDS[run.command](run)
    except CalpropException as e:
        LOGGER.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except Exception:
        LOGGER.exception("Unexpected failure")
        return 1
    return 0
