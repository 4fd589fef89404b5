"""Command-line front end tying the library into the end-to-end workflow.

Subcommands: synth, correct, train, infer, uncertainty, eval, bench, plot.
Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
failure. All randomness flows through --seed. Every artifact-producing
command writes exactly one manifest.json beside its outputs; manifests
carry timing and are the only outputs excluded from byte-identical
re-run guarantees.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from . import bench as benchmod
from . import evaluate as evalmod
from . import network as netmod
from . import oracle as oraclemod
from . import plotting
from . import spectral_io as sio
from . import synth as synthmod
from . import uncertainty as uncmod
from .configfile import load_config, section_for
from .core import LabeledDataset, SpectralCube, Spectrum, WavenumberGrid
from .errors import (BenchError, ConfigError, DegenerateInput,
                     DimensionError, DomainError, FormatError, GridError,
                     MieSurrogateError, ParseError, PeakOnBoundary,
                     RangeError, RankError, SingularDesign)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

_USAGE_ERRORS = (ConfigError,)
_DATA_ERRORS = (ParseError, FormatError, RangeError, GridError,
                DimensionError, FileNotFoundError, IsADirectoryError,
                NotADirectoryError, PermissionError)
_NUMERIC_ERRORS = (DegenerateInput, DomainError, RankError, SingularDesign,
                   PeakOnBoundary, BenchError, np.linalg.LinAlgError,
                   FloatingPointError)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_grid(spec: str) -> WavenumberGrid:
    try:
        start, stop, step = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise _UsageError(f"bad --grid {spec!r}, expected START:STOP:STEP") from exc
    return WavenumberGrid.from_range(start, stop, step)


def _parse_window(spec: str):
    try:
        lo, hi = (float(p) for p in spec.split(":"))
    except ValueError as exc:
        raise _UsageError(f"bad window {spec!r}, expected LO:HI") from exc
    return lo, hi


def _parse_sizes(spec: str):
    try:
        return tuple(int(p) for p in spec.split(","))
    except ValueError as exc:
        raise _UsageError(f"bad size list {spec!r}") from exc


def _coerce_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise _UsageError(f"bad boolean {raw!r} in config")


_COMMON_OPTS = [
    (("--config",), dict(type=str, help="shared key/value config file")),
    (("--seed",), dict(type=int, help="root random seed (default 0)")),
    (("--grid",), dict(type=str, help="wavenumber grid START:STOP:STEP")),
    (("--out",), dict(type=str, help="output directory")),
    (("--threads",), dict(type=int, help="worker processes for cube correction")),
]

_COMMON_DEFAULTS = {"config": None, "seed": 0, "grid": "950:1800:2",
                    "out": None, "threads": 1}


def _add_common(sub):
    for flags, kwargs in _COMMON_OPTS:
        sub.add_argument(*flags, default=None, **kwargs)


def _build_parser():
    parser = _Parser(prog="miesurrogate",
                     description="scattering correction, surrogate training "
                                 "and validation pipeline")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)
    defaults = {}

    def command(name, help_text, options, extra_defaults):
        sub = subs.add_parser(name, help=help_text)
        _add_common(sub)
        for flags, kwargs in options:
            sub.add_argument(*flags, default=None, **kwargs)
        defaults[name] = dict(_COMMON_DEFAULTS)
        defaults[name].update(extra_defaults)
        return sub

    command("synth", "generate a synthetic labeled dataset", [
        (("--classes",), dict(type=int, help="number of template classes")),
        (("--per-class",), dict(type=int, help="spectra per class")),
        (("--templates",), dict(type=str, help="template config file")),
        (("--noise",), dict(type=float, help="additive noise sigma, AU")),
    ], {"classes": 5, "per_class": 100, "templates": None, "noise": None})

    command("correct", "run the reference corrector over a dataset", [
        (("--data",), dict(type=str, help="dataset directory (raw.cube)")),
        (("--reference",), dict(type=str,
                                help="class-mean | pure-mean | raw-mean | "
                                     "a spectrum CSV path")),
        (("--iterations",), dict(type=int)),
        (("--components",), dict(type=int, help="PCA components")),
        (("--kk-scale",), dict(type=float, help="resonant coupling weight")),
        (("--h-floor",), dict(type=float)),
        (("--non-resonant",), dict(action="store_true",
                                   help="disable the resonant coupling")),
    ], {"data": None, "reference": "class-mean", "iterations": 10,
        "components": 7, "kk_scale": 0.1, "h_floor": 1e-3,
        "non_resonant": False})

    command("train", "pretrain and finetune the surrogate", [
        (("--data",), dict(type=str,
                           help="dataset directory (raw.cube + corrected.cube)")),
        (("--pretrain-data",), dict(type=str,
                                    help="separate raw-only dataset for "
                                         "pretraining (default: --data)")),
        (("--hidden",), dict(type=str, help="hidden sizes, e.g. 256,128,256")),
        (("--epochs-pretrain",), dict(type=int)),
        (("--epochs-finetune",), dict(type=int)),
        (("--contraction-lambda",), dict(type=float)),
        (("--learning-rate",), dict(type=float)),
        (("--batch-size",), dict(type=int)),
        (("--no-pretrain",), dict(action="store_true")),
    ], {"data": None, "pretrain_data": None, "hidden": "256,128,256",
        "epochs_pretrain": 12, "epochs_finetune": 40,
        "contraction_lambda": 1e-4, "learning_rate": 1e-3, "batch_size": 32,
        "no_pretrain": False})

    command("infer", "apply a trained surrogate to raw spectra", [
        (("--model",), dict(type=str)),
        (("--data",), dict(type=str, help="dataset directory (raw.cube)")),
        (("--cube",), dict(type=str, help="single cube file instead of --data")),
    ], {"model": None, "data": None, "cube": None})

    command("uncertainty", "MC-dropout confidence analysis", [
        (("--model",), dict(type=str)),
        (("--data",), dict(type=str)),
        (("--index",), dict(type=int, help="spectrum index for a detail CSV")),
        (("--summary",), dict(action="store_true",
                              help="pooled analysis over the whole dataset")),
        (("--passes",), dict(type=int)),
        (("--dropout-p",), dict(type=float)),
        (("--z",), dict(type=float, help="CI half-width in standard deviations")),
    ], {"model": None, "data": None, "index": None, "summary": False,
        "passes": 100, "dropout_p": 0.5, "z": 1.96})

    command("eval", "RMSE, downstream agreement and band shift", [
        (("--data",), dict(type=str,
                           help="directory with corrected.cube + surrogate.cube")),
        (("--train-data",), dict(type=str,
                                 help="directory for classifier training "
                                      "(default: --data)")),
        (("--window",), dict(type=str, help="band-shift window LO:HI")),
    ], {"data": None, "train_data": None, "window": "1600:1700"})

    command("bench", "timing comparison of corrector and surrogate", [
        (("--data",), dict(type=str)),
        (("--cube",), dict(type=str)),
        (("--model",), dict(type=str, help="surrogate model to benchmark")),
        (("--iterations",), dict(type=int)),
        (("--runs",), dict(type=int)),
        (("--reference",), dict(type=str)),
        (("--components",), dict(type=int)),
        (("--kk-scale",), dict(type=float)),
        (("--h-floor",), dict(type=float)),
        (("--non-resonant",), dict(action="store_true")),
    ], {"data": None, "cube": None, "model": None, "iterations": 10,
        "runs": 10, "reference": "raw-mean", "components": 7,
        "kk_scale": 0.1, "h_floor": 1e-3, "non_resonant": False})

    command("plot", "vector graphics + CSV sidecars from pipeline outputs", [
        (("--kind",), dict(type=str, choices=["overlay", "bandshift", "ci"])),
        (("--data",), dict(type=str)),
        (("--input",), dict(type=str, help="uncertainty CSV for --kind ci")),
        (("--index",), dict(type=int)),
        (("--window",), dict(type=str)),
    ], {"kind": "overlay", "data": None, "input": None, "index": 0,
        "window": "1600:1700"})

    return parser, subs, defaults


def _resolve(args, subparser, defaults):
    config = {}
    if args.config:
        config = section_for(load_config(args.config), args.command)
    resolved = {}
    for action in subparser._actions:
        dest = action.dest
        if dest in ("help",):
            continue
        value = getattr(args, dest, None)
        if value is None:
            key = dest.replace("_", "-")
            if key in config:
                raw = config[key]
                if isinstance(action, argparse._StoreTrueAction):
                    value = _coerce_bool(raw)
                elif action.type is not None:
                    try:
                        value = action.type(raw)
                    except ValueError as exc:
                        raise _UsageError(
                            f"config key {key}: {exc}") from exc
                else:
                    value = raw
            elif dest in defaults:
                value = defaults[dest]
        resolved[dest] = value
    resolved["command"] = args.command
    return argparse.Namespace(**resolved)


def _require(opts, *names):
    for name in names:
        if getattr(opts, name, None) is None:
            raise _UsageError(f"--{name.replace('_', '-')} is required")


def _require_paths(*paths):
    for p in paths:
        if not os.path.exists(p):
            raise FileNotFoundError(f"missing input: {p}")


def _outdir(opts) -> str:
    _require(opts, "out")
    os.makedirs(opts.out, exist_ok=True)
    return opts.out


def _write_manifest(out_dir, opts, inputs, outputs, wall_time, extra=None):
    doc = {
        "command": opts.command,
        "tool_version": __version__,
        "options": {k: v for k, v in vars(opts).items() if k != "command"},
        "seed": opts.seed,
        "inputs": sorted(str(p) for p in inputs),
        "outputs": sorted(str(p) for p in outputs),
        "wall_time_s": wall_time,
        "written_unix": time.time(),
    }
    if extra:
        doc["result"] = extra
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, default=str)


def _item_seed(seed: int, index: int) -> int:
    return (int(seed) << 20) + index


def _rmies_config(opts) -> oraclemod.RmiesConfig:
    curve = oraclemod.MieCurveConfig(
        resonant=not opts.non_resonant,
        kk_scale=opts.kk_scale,
        n_components=opts.components,
    )
    return oraclemod.RmiesConfig(iterations=opts.iterations,
                                 curve_config=curve, h_floor=opts.h_floor)


# ---------------------------------------------------------------- commands

def cmd_synth(opts):
    grid = _parse_grid(opts.grid)
    out = _outdir(opts)
    if opts.templates is not None:
        _require_paths(opts.templates)
        templates = synthmod.load_templates(opts.templates)
    else:
        templates = synthmod.default_templates(grid)
        if opts.classes > len(templates):
            raise _UsageError(
                f"--classes {opts.classes} exceeds the {len(templates)} "
                "built-in templates; provide --templates")
        templates = templates[: opts.classes]
    sampler = synthmod.DistortionSampler() if opts.noise is None else \
        synthmod.DistortionSampler(noise_sigma=opts.noise)
    dataset = synthmod.generate_dataset(templates, grid, opts.per_class,
                                        sampler, seed=opts.seed)
    sio.save_dataset_dir(dataset, out)
    synthmod.save_templates(templates, os.path.join(out, "templates.txt"))
    outputs = [os.path.join(out, n) for n in
               (sio.RAW_CUBE, sio.PURE_CUBE, sio.LABELS_CSV, "templates.txt")]
    inputs = [opts.templates] if opts.templates else []
    return inputs, outputs, {"n_spectra": len(dataset)}


def _load_reference(opts, dataset, grid):
    mode = opts.reference
    if mode == "pure-mean":
        if dataset.corrected is None:
            raise FormatError("pure-mean reference needs pure.cube")
        return Spectrum(grid, dataset.corrected_matrix().mean(axis=0)), None
    if mode == "raw-mean":
        return Spectrum(grid, dataset.raw_matrix().mean(axis=0)), None
    if mode == "class-mean":
        if dataset.corrected is None or dataset.class_labels is None:
            raise FormatError(
                "class-mean reference needs pure.cube and labels.csv")
        pure = dataset.corrected_matrix()
        refs = {int(c): Spectrum(grid, pure[dataset.class_labels == c].mean(axis=0))
                for c in np.unique(dataset.class_labels)}
        return None, refs
    _require_paths(mode)
    ref = sio.load_spectrum_csv(mode)
    if ref.grid != grid:
        raise DimensionError(
            f"reference spectrum grid does not match the dataset grid")
    return ref, None


def cmd_correct(opts):
    _require(opts, "data")
    out = _outdir(opts)
    raw_path = os.path.join(opts.data, sio.RAW_CUBE)
    _require_paths(raw_path)
    dataset = sio.load_dataset_dir(opts.data)
    grid = dataset.grid
    cfg = _rmies_config(opts)
    cube = SpectralCube.from_spectra(dataset.raw, len(dataset), 1)
    single_ref, class_refs = _load_reference(opts, dataset, grid)

    if class_refs is None:
        result = oraclemod.correct_cube(cube, single_ref, cfg,
                                        workers=opts.threads)
        corrected = result.cube
        report = result.to_dict()
    else:
        data = np.array(cube.data)
        residuals = np.full(len(dataset), np.nan)
        failures = []
        for cid, ref in class_refs.items():
            idx = np.flatnonzero(dataset.class_labels == cid)
            sub = SpectralCube(len(idx), 1, grid, cube.data[idx])
            res = oraclemod.correct_cube(sub, ref, cfg, workers=opts.threads)
            data[idx] = res.cube.data
            residuals[idx] = res.final_residuals
            failures.extend((int(idx[i]), msg) for i, msg in res.failures)
        corrected = SpectralCube(cube.width, cube.height, grid, data)
        report = oraclemod.CubeCorrectionResult(
            corrected, residuals, tuple(sorted(failures))).to_dict()

    out_cube = os.path.join(out, sio.CORRECTED_CUBE)
    sio.save_cube(corrected, out_cube)
    report_path = os.path.join(out, "correction_report.json")
    report["config"] = {
        "iterations": cfg.iterations, "h_floor": cfg.h_floor,
        "resonant": cfg.curve_config.resonant,
        "kk_scale": cfg.curve_config.kk_scale,
        "n_components": cfg.curve_config.n_components,
        "reference": opts.reference,
    }
    with open(report_path, "w") as f:
        json.dump(report, f, indent=2)
    return [raw_path], [out_cube, report_path], {
        "n_failures": report["n_failures"]}


def cmd_train(opts):
    _require(opts, "data")
    out = _outdir(opts)
    raw_path = os.path.join(opts.data, sio.RAW_CUBE)
    corr_path = os.path.join(opts.data, sio.CORRECTED_CUBE)
    _require_paths(raw_path, corr_path)
    dataset = sio.load_dataset_dir(opts.data, corrected_name=sio.CORRECTED_CUBE)
    inputs = [raw_path, corr_path]

    grid_len = len(dataset.grid)
    sizes = (grid_len,) + _parse_sizes(opts.hidden) + (grid_len,)
    config = netmod.NetworkConfig(
        layer_sizes=sizes,
        contraction_lambda=opts.contraction_lambda,
        learning_rate=opts.learning_rate,
        epochs_pretrain=opts.epochs_pretrain,
        epochs_finetune=opts.epochs_finetune,
        batch_size=opts.batch_size,
        seed=opts.seed,
    )

    pretrained = None
    if not opts.no_pretrain:
        if opts.pretrain_data:
            pre_path = os.path.join(opts.pretrain_data, sio.RAW_CUBE)
            _require_paths(pre_path)
            pre_raw = sio.load_dataset_dir(opts.pretrain_data,
                                           corrected_name=None).raw_matrix()
            inputs.append(pre_path)
        else:
            pre_raw = dataset.raw_matrix()
        pretrained = netmod.stack_pretrain(pre_raw, config)

    model = netmod.finetune_regression(pretrained, dataset, config)
    model_path = os.path.join(out, "model.json")
    netmod.save_model(model, model_path)
    trace = model.provenance.get("finetune_loss_trace", [])
    return inputs, [model_path], {
        "final_training_rmse": trace[-1] if trace else None}


def _load_raw_cube(opts):
    if opts.cube:
        _require_paths(opts.cube)
        return sio.load_cube(opts.cube), opts.cube
    _require(opts, "data")
    path = os.path.join(opts.data, sio.RAW_CUBE)
    _require_paths(path)
    return sio.load_cube(path), path


def _surrogate_cube(model, cube: SpectralCube) -> SpectralCube:
    out = np.empty_like(cube.data)
    step = 512
    for s in range(0, cube.n_pixels, step):
        out[s:s + step] = netmod.forward_matrix(model, cube.data[s:s + step])
    return SpectralCube(cube.width, cube.height, cube.grid, out)


def cmd_infer(opts):
    _require(opts, "model")
    out = _outdir(opts)
    _require_paths(opts.model)
    cube, cube_path = _load_raw_cube(opts)
    model = netmod.load_model(opts.model)
    result = _surrogate_cube(model, cube)
    out_path = os.path.join(out, sio.SURROGATE_CUBE)
    sio.save_cube(result, out_path)
    return [opts.model, cube_path], [out_path], {"n_spectra": cube.n_pixels}


def cmd_uncertainty(opts):
    _require(opts, "model", "data")
    out = _outdir(opts)
    _require_paths(opts.model)
    raw_path = os.path.join(opts.data, sio.RAW_CUBE)
    _require_paths(raw_path)
    model = netmod.load_model(opts.model)
    dataset = sio.load_dataset_dir(opts.data, corrected_name=sio.CORRECTED_CUBE)
    inputs = [opts.model, raw_path]
    outputs = []
    extra = {"passes": opts.passes, "dropout_p": opts.dropout_p}

    if not opts.summary and opts.index is None:
        opts.index = 0
    if opts.index is not None:
        if not 0 <= opts.index < len(dataset):
            raise _UsageError(f"--index {opts.index} outside the dataset")
        result = uncmod.mc_dropout_predict(
            model, dataset.raw[opts.index], passes=opts.passes,
            dropout_p=opts.dropout_p, z=opts.z,
            seed=_item_seed(opts.seed, opts.index))
        path = os.path.join(out, f"uncertainty_{opts.index}.csv")
        uncmod.save_uncertainty_csv(result, path)
        outputs.append(path)

    if opts.summary:
        if dataset.corrected is None:
            raise FormatError("--summary needs corrected.cube for the "
                              "error-alignment analysis")
        results = [
            uncmod.mc_dropout_predict(model, s, passes=opts.passes,
                                      dropout_p=opts.dropout_p, z=opts.z,
                                      seed=_item_seed(opts.seed, i))
            for i, s in enumerate(dataset.raw)]
        rho = uncmod.uncertainty_error_alignment(results, dataset.corrected)
        abs_err = np.mean([np.abs(r.mean.absorbance - o.absorbance)
                           for r, o in zip(results, dataset.corrected)], axis=0)
        mean_std = np.mean([r.std for r in results], axis=0)
        pooled = os.path.join(out, "uncertainty_pooled.csv")
        with open(pooled, "w", newline="") as f:
            f.write("wavenumber,mean_abs_error,mean_std\n")
            for w, e, s in zip(dataset.grid.values, abs_err, mean_std):
                f.write("%.17g,%.17g,%.17g\n" % (w, e, s))
        summary = os.path.join(out, "uncertainty_summary.json")
        extra["spearman_error_vs_std"] = rho
        with open(summary, "w") as f:
            json.dump({"spearman_error_vs_std": rho, "n": len(results),
                       "passes": opts.passes, "dropout_p": opts.dropout_p},
                      f, indent=2)
        outputs.extend([pooled, summary])
        inputs.append(os.path.join(opts.data, sio.CORRECTED_CUBE))

    return inputs, outputs, extra


def cmd_eval(opts):
    _require(opts, "data")
    out = _outdir(opts)
    oracle_path = os.path.join(opts.data, sio.CORRECTED_CUBE)
    surrogate_path = os.path.join(opts.data, sio.SURROGATE_CUBE)
    _require_paths(oracle_path, surrogate_path)
    oracle_cube = sio.load_cube(oracle_path)
    surrogate_cube = sio.load_cube(surrogate_path)
    if oracle_cube.n_pixels != surrogate_cube.n_pixels:
        raise DimensionError("corrected and surrogate cubes disagree in size")
    oracle_spectra = [oracle_cube.spectrum(i)
                      for i in range(oracle_cube.n_pixels)]
    surrogate_spectra = [surrogate_cube.spectrum(i)
                         for i in range(surrogate_cube.n_pixels)]
    inputs = [oracle_path, surrogate_path]

    report = {"rmse": evalmod.rmse_dataset(surrogate_spectra,
                                           oracle_spectra).to_dict()}

    train_dir = opts.train_data or opts.data
    cls_corr = os.path.join(train_dir, sio.CORRECTED_CUBE)
    cls_labels = os.path.join(train_dir, sio.LABELS_CSV)
    outputs = []
    if os.path.exists(cls_corr) and os.path.exists(cls_labels):
        train_cube = sio.load_cube(cls_corr)
        labels = sio.load_labels_csv(cls_labels)
        classifier = evalmod.train_downstream(
            [train_cube.spectrum(i) for i in range(train_cube.n_pixels)],
            labels)
        agreement = evalmod.downstream_agreement(
            classifier, oracle_spectra, surrogate_spectra)
        report["downstream_agreement"] = agreement.to_dict()
        confusion_path = os.path.join(out, "confusion.csv")
        evalmod.save_confusion_csv(agreement, confusion_path)
        outputs.append(confusion_path)
        inputs.extend([cls_corr, cls_labels])

    window = _parse_window(opts.window)
    shifts = []
    skipped = 0
    for a, b in zip(oracle_spectra, surrogate_spectra):
        try:
            shifts.append(evalmod.band_shift(a, b, window))
        except PeakOnBoundary:
            skipped += 1
    if shifts:
        shifts_arr = np.asarray(shifts)
        report["band_shift"] = {
            "window": list(window),
            "n": len(shifts),
            "n_peak_on_boundary": skipped,
            "mean": float(shifts_arr.mean()),
            "median": float(np.median(shifts_arr)),
            "max_abs": float(np.abs(shifts_arr).max()),
        }

    report_path = os.path.join(out, "eval_report.json")
    with open(report_path, "w") as f:
        json.dump(report, f, indent=2)
    outputs.insert(0, report_path)
    extra = {"rmse_mean": report["rmse"]["mean"]}
    if "downstream_agreement" in report:
        extra["agreement"] = report["downstream_agreement"]["accuracy"]
    return inputs, outputs, extra


def cmd_bench(opts):
    out = _outdir(opts)
    cube, cube_path = _load_raw_cube(opts)
    inputs = [cube_path]
    cfg = _rmies_config(opts)

    if opts.reference == "raw-mean":
        reference = Spectrum(cube.grid, cube.data.mean(axis=0))
    else:
        _require_paths(opts.reference)
        reference = sio.load_spectrum_csv(opts.reference)
        inputs.append(opts.reference)

    def oracle_corrector(c):
        result = oraclemod.correct_cube(c, reference, cfg,
                                        workers=opts.threads)
        if result.failures:
            pixel, msg = result.failures[0]
            raise BenchError(f"oracle failed at pixel {pixel}: {msg}")
        return result.cube

    single = opts.threads <= 1
    suffix = "" if single else f"[workers={opts.threads}]"
    reports = [benchmod.run_bench(
        oracle_corrector, f"oracle-{cfg.iterations}it{suffix}", cube,
        runs=opts.runs, single_thread=single)]

    if opts.model:
        _require_paths(opts.model)
        model = netmod.load_model(opts.model)
        inputs.append(opts.model)
        reports.append(benchmod.run_bench(
            lambda c: _surrogate_cube(model, c), "surrogate", cube,
            runs=opts.runs, single_thread=single))

    comparisons = benchmod.compare(reports) if len(reports) > 1 else []
    json_path = os.path.join(out, "bench_report.json")
    benchmod.save_reports_json(reports, comparisons, json_path)
    table = benchmod.format_table(reports)
    table_path = os.path.join(out, "bench_table.txt")
    with open(table_path, "w") as f:
        f.write(table)
    sys.stdout.write(table)
    extra = {}
    if comparisons:
        extra["speedup"] = comparisons[0]["speedup"]
        sys.stdout.write("speedup (%s vs %s): %.2fx ± %.2f\n" % (
            comparisons[0]["slow"], comparisons[0]["fast"],
            comparisons[0]["speedup"], comparisons[0]["speedup_std"]))
    return inputs, [json_path, table_path], extra


def cmd_plot(opts):
    out = _outdir(opts)
    window = _parse_window(opts.window)
    if opts.kind == "ci":
        _require(opts, "input")
        _require_paths(opts.input)
        table = plotting.read_uncertainty_csv(opts.input)
        svg = os.path.join(out, "ci.svg")
        csv = os.path.join(out, "ci.csv")
        plotting.plot_ci_band(table["wavenumber"], table["mean"],
                              table["ci_low"], table["ci_high"], svg, csv,
                              title="MC-dropout confidence band")
        zoom_svg = os.path.join(out, "ci_zoom.svg")
        zoom_csv = os.path.join(out, "ci_zoom.csv")
        plotting.plot_ci_band(table["wavenumber"], table["mean"],
                              table["ci_low"], table["ci_high"], zoom_svg,
                              zoom_csv, title="confidence band (window)",
                              xlim=window)
        return [opts.input], [svg, csv, zoom_svg, zoom_csv], {}

    _require(opts, "data")
    idx = opts.index
    series = {}
    inputs = []
    for label, name in (("raw", sio.RAW_CUBE),
                        ("corrected", sio.CORRECTED_CUBE),
                        ("surrogate", sio.SURROGATE_CUBE)):
        path = os.path.join(opts.data, name)
        if os.path.exists(path):
            cube = sio.load_cube(path)
            if not 0 <= idx < cube.n_pixels:
                raise _UsageError(f"--index {idx} outside the cube")
            series[label] = cube.pixel(idx)
            grid = cube.grid
            inputs.append(path)
    if not series:
        raise FileNotFoundError(f"no cubes found under {opts.data}")

    if opts.kind == "overlay":
        svg = os.path.join(out, f"overlay_{idx}.svg")
        csv = os.path.join(out, f"overlay_{idx}.csv")
        plotting.plot_series(grid.values, series, svg, csv,
                             title=f"spectrum {idx}")
        return inputs, [svg, csv], {}

    if opts.kind == "bandshift":
        for needed in ("corrected", "surrogate"):
            if needed not in series:
                raise FileNotFoundError(
                    f"bandshift plot needs {needed} spectra under {opts.data}")
        pair = {k: series[k] for k in ("corrected", "surrogate")}
        shift = evalmod.band_shift(Spectrum(grid, pair["corrected"]),
                                   Spectrum(grid, pair["surrogate"]), window)
        svg = os.path.join(out, f"bandshift_{idx}.svg")
        csv = os.path.join(out, f"bandshift_{idx}.csv")
        plotting.plot_series(grid.values, pair, svg, csv,
                             title=f"spectrum {idx}: band shift "
                                   f"{shift:+.2f} cm$^{{-1}}$",
                             xlim=window)
        return inputs, [svg, csv], {"band_shift_cm1": shift}

    raise _UsageError(f"unknown plot kind {opts.kind!r}")


_COMMANDS = {
    "synth": cmd_synth,
    "correct": cmd_correct,
    "train": cmd_train,
    "infer": cmd_infer,
    "uncertainty": cmd_uncertainty,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "plot": cmd_plot,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs, defaults = _build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _resolve(args, subs.choices[args.command], defaults[args.command])
        started = time.time()
        inputs, outputs, extra = _COMMANDS[args.command](opts)
        if opts.out:
            _write_manifest(opts.out, opts, inputs, outputs,
                            time.time() - started, extra)
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _USAGE_ERRORS as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MieSurrogateError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
