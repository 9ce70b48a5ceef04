"""Command line entry point: ``csihdfm <command> [options]``.

Every command takes ``--config FILE`` with ``key = value`` lines whose keys are
the long option names (dashes or underscores). Explicit flags override the
file. Outputs go only under ``--out``. Exit status is 0 on success, 2 for
usage errors and 1 for data or runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .classify import ClassifierSpec, classify, read_features, write_features, write_predictions
from .factor import SyntheticSpec, decompose, default_p_max, fit_from_decomposition, generate_synthetic, select_factor_count
from .ingest import (
    AMPLITUDE,
    RAW_PHASE,
    assemble_matrix,
    consistent_frames,
    load_dataset,
    read_log_file,
    read_manifest,
    read_matrix_csv,
    scale_csi,
    write_matrix_csv,
)
from .mp import DEFAULT_SPIKE_MARGIN, MpLaw, density_overlay
from .phase import INDEX_SETS, calibrate_matrix, index_set
from .pipeline import ArmResult, FeatureConfig, build_features, compare_pipelines, run_arm, sample_channels
from .synthetic import ActivitySpec, synthetic_activity_dataset

logger = logging.getLogger("csihdfm")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    return repr(float(v))


def read_config(path: str | Path) -> dict[str, str]:
    """Parse ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _frames_for(path: str, scaled: bool):
    res = read_log_file(path)
    frames = consistent_frames(res.frames)
    if len(frames) < 2:
        raise ValueError(f"{path}: fewer than 2 usable frames")
    return [scale_csi(f) for f in frames] if scaled else frames


def _load_matrix(path: str, channel: str, flavor: str, scaled: bool):
    if path.endswith(".csv"):
        return read_matrix_csv(path)
    frames = _frames_for(path, scaled)
    if channel == "amplitude":
        return assemble_matrix(frames, AMPLITUDE)
    return calibrate_matrix(assemble_matrix(frames, RAW_PHASE), index_set(flavor))


def fit_report(sel, n: int, t: int, p_max: int, margin: float) -> str:
    lines = [
        f"p_star = {sel.p_star}",
        f"converged = {str(sel.converged).lower()}",
        f"n = {n}",
        f"t = {t}",
        f"p_max = {p_max}",
        f"spike_margin = {margin!r}",
        "",
        "p,spikes,ks_distance,sigma2_hat,spike_threshold",
    ]
    for f in sel.fits:
        lines.append(f"{f.p},{f.n_spikes},{_fmt(f.ks_distance)},{_fmt(f.sigma2_hat)},{_fmt(f.fit.spike_threshold)}")
    return "\n".join(lines) + "\n"


# commands -------------------------------------------------------------------


def cmd_parse(args) -> int:
    res = read_log_file(args.input)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    keys = ["timestamp_low", "bfee_count", "n_rx", "n_tx", "rssi_a", "rssi_b", "rssi_c", "noise", "agc", "rate_flags"]
    rows = []
    for i, f in enumerate(res.frames):
        md = f.metadata()
        rows.append([i] + [md[k] for k in keys] + ["".join(map(str, f.antenna_perm))])
    _write_table(out / "frames.csv", ["frame"] + keys + ["antenna_perm"], rows)
    if args.raw_csi:
        csi_rows = []
        for i, f in enumerate(res.frames):
            for s in range(f.csi.shape[0]):
                for t in range(f.n_tx):
                    for r in range(f.n_rx):
                        v = f.csi[s, t, r]
                        csi_rows.append([i, s, t, r, int(v.real), int(v.imag)])
        _write_table(out / "csi.csv", ["frame", "subcarrier", "tx", "rx", "real", "imag"], csi_rows)
    configs = sorted({(f.n_tx, f.n_rx) for f in res.frames})
    summary = [
        f"frames = {len(res.frames)}",
        f"antenna_configurations = {' '.join(f'{t}x{r}' for t, r in configs) or 'none'}",
        f"skipped_records = {res.skipped_records}",
        f"malformed_records = {res.malformed_records}",
        f"truncated_bytes = {res.truncated_bytes}",
        f"invalid_perm = {res.invalid_perm}",
        f"warnings = {res.warning_count}",
    ]
    text = "\n".join(summary) + "\n"
    (out / "summary.txt").write_text(text)
    print(text, end="")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frames = _frames_for(args.input, not args.raw_amplitude)
    amp = assemble_matrix(frames, AMPLITUDE)
    raw = assemble_matrix(frames, RAW_PHASE)
    cal = calibrate_matrix(raw, index_set(args.index_set))
    write_matrix_csv(amp, out / "amplitude.csv")
    write_matrix_csv(raw, out / "raw_phase.csv")
    write_matrix_csv(cal, out / "calibrated_phase.csv")
    print(f"wrote {amp.shape[0]} x {amp.shape[1]} matrices to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    freqs = tuple(float(x) for x in args.frequencies.split(",")) if args.frequencies else None
    spec = SyntheticSpec(args.n, args.t, args.p_true, freqs, args.seed)
    data, _ = generate_synthetic(spec)
    dec = decompose(data)
    n, t = dec.shape
    p_max = default_p_max(n, t) if args.p_max is None else args.p_max
    p_max = max(p_max, args.p_true)
    sel = select_factor_count(data, p_max, args.spike_margin)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fits = {f.p: f for f in sel.fits}
    for p in range(max(args.p_true, sel.p_star) + 1):
        fit = fits.get(p) or fit_from_decomposition(dec, p, args.spike_margin)
        _write_table(out / f"eigenvalues_p{p}.csv", ["index", "eigenvalue"], [[i, _fmt(v)] for i, v in enumerate(fit.residual_spectrum)])
        law_table = density_overlay(MpLaw(n / t, fit.sigma2_hat))
        _write_table(out / f"mp_overlay_p{p}.csv", ["x", "density"], [[_fmt(x), _fmt(y)] for x, y in law_table])
    (out / "summary.txt").write_text(fit_report(sel, n, t, p_max, args.spike_margin))
    rows = [[f.p, f.n_spikes, _fmt(f.ks_distance), _fmt(f.sigma2_hat)] for f in sel.fits]
    _write_table(out / "summary.csv", ["p", "spikes", "ks_distance", "sigma2_hat"], rows)
    print(f"p_star = {sel.p_star} (spikes per p: {sel.spike_counts})")
    return EXIT_OK


def cmd_fit(args) -> int:
    data = _load_matrix(args.input, args.channel, args.index_set, not args.raw_amplitude)
    n, t = data.shape
    p_max = default_p_max(n, t) if args.p_max is None else args.p_max
    sel = select_factor_count(data, p_max, args.spike_margin)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fit_report.txt").write_text(fit_report(sel, n, t, p_max, args.spike_margin))
    print(f"p_star = {sel.p_star}, converged = {sel.converged}")
    return EXIT_OK


def _dataset(args):
    if getattr(args, "synthetic", False):
        return synthetic_activity_dataset(ActivitySpec(n_per_class=args.per_class, seed=args.seed))
    if not args.manifest:
        raise UsageError("give --manifest or --synthetic")
    if not Path(args.manifest).is_file():
        raise UsageError(f"manifest {args.manifest} not found")
    samples, errors = load_dataset(read_manifest(args.manifest), scaled=not args.raw_amplitude)
    for path, msg in errors:
        logger.warning("skipped %s: %s", path, msg)
    if not samples:
        raise ValueError("no sample could be loaded from the manifest")
    flavor = index_set(args.index_set)
    return [sample_channels(s, args.channels, flavor, sample_id=Path(s.path).name) for s in samples]


def _feature_config(args, arm: str) -> FeatureConfig:
    if arm == "hdfm":
        return FeatureConfig(None, args.pool_length, args.p_max, args.spike_margin)
    return FeatureConfig(args.p, args.pool_length, args.p_max, args.spike_margin)


def _classifier(args) -> ClassifierSpec:
    return ClassifierSpec(args.classifier, args.k, args.epochs, args.learning_rate)


def _write_diagnostics(path: Path, diagnostics) -> None:
    rows = []
    for d in diagnostics:
        for p, (s, ks, s2) in enumerate(zip(d.spike_counts, d.ks_distances, d.sigma2_hat)):
            rows.append([d.sample_id, d.channel, d.p_star, str(d.converged).lower(), p, s, _fmt(ks), _fmt(s2)])
    _write_table(path, ["sample_id", "channel", "p_star", "converged", "p", "spikes", "ks_distance", "sigma2_hat"], rows)


def cmd_features(args) -> int:
    samples = _dataset(args)
    fs, counts, diag = build_features(samples, _feature_config(args, args.arm))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_features(fs, out / "features.csv")
    if diag:
        _write_diagnostics(out / "diagnostics.csv", diag)
    print(f"{len(fs)} samples, {fs.dim} features, factors per channel {counts}")
    return EXIT_OK


def cmd_classify(args) -> int:
    fs = read_features(args.features)
    report, rows = classify(fs, _classifier(args), args.test_fraction, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(report.to_text())
    report.write_csv(out / "report.csv")
    write_predictions(rows, out / "predictions.csv")
    print(report.to_text(), end="")
    return EXIT_OK


def _write_arm(out: Path, arm: ArmResult) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_features(arm.features, out / "features.csv")
    (out / "report.txt").write_text(arm.report.to_text())
    arm.report.write_csv(out / "report.csv")
    write_predictions(arm.predictions, out / "predictions.csv")
    if arm.diagnostics:
        _write_diagnostics(out / "diagnostics.csv", arm.diagnostics)


RUN_KEYS = (
    "manifest", "synthetic", "per_class", "channels", "index_set", "raw_amplitude", "p", "p_max",
    "spike_margin", "pool_length", "classifier", "k", "epochs", "learning_rate", "test_fraction", "seed",
)


def _write_metadata(out: Path, command: str, args) -> None:
    lines = [f"# reproduce with: csihdfm {command} --config {out / 'run_metadata.txt'} --out DIR"]
    if command == "run":
        lines.append(f"arm = {args.arm}")
    for key in RUN_KEYS:
        value = getattr(args, key, None)
        if value is None or value is False:
            continue
        if value is True:
            value = "true"
        lines.append(f"{key} = {value}")
    (out / "run_metadata.txt").write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    out = Path(args.out)
    samples = _dataset(args)
    out.mkdir(parents=True, exist_ok=True)
    _write_metadata(out, args.command, args)
    partial = out / "PARTIAL"
    partial.write_text("run incomplete\n")
    clf = _classifier(args)
    arm = "compare" if args.command == "compare" else args.arm
    if arm == "compare":
        cmp = compare_pipelines(samples, clf, _feature_config(args, "hdfm"), _feature_config(args, "pca"), args.seed, args.test_fraction)
        _write_arm(out / "hdfm", cmp.hdfm)
        _write_arm(out / "pca", cmp.pca)
        summary = [
            f"hdfm_accuracy = {_fmt(cmp.hdfm.report.accuracy)}",
            f"hdfm_factors = {' '.join(map(str, cmp.hdfm.feature_p))}",
            f"pca_accuracy = {_fmt(cmp.pca.report.accuracy)}",
            f"pca_factors = {' '.join(map(str, cmp.pca.feature_p))}",
            f"delta = {_fmt(cmp.delta)}",
        ]
    else:
        res = run_arm(samples, _feature_config(args, arm), clf, args.seed, args.test_fraction)
        _write_arm(out / arm, res)
        summary = [f"{arm}_accuracy = {_fmt(res.report.accuracy)}", f"{arm}_factors = {' '.join(map(str, res.feature_p))}"]
    text = "\n".join(summary) + "\n"
    (out / "summary.txt").write_text(text)
    partial.unlink()
    print(text, end="")
    return EXIT_OK


# argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bool(s: str) -> bool:
    if isinstance(s, bool):
        return s
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {s!r}")


def _add_fit_opts(p):
    p.add_argument("--p-max", type=int, default=None)
    p.add_argument("--spike-margin", type=float, default=DEFAULT_SPIKE_MARGIN)


def _add_source_opts(p):
    p.add_argument("--manifest")
    p.add_argument("--synthetic", action="store_true", help="use the seeded synthetic activity dataset")
    p.add_argument("--per-class", type=int, default=60, help="synthetic recordings per activity")
    p.add_argument("--channels", choices=("amplitude", "phase", "both"), default="both")
    p.add_argument("--index-set", choices=sorted(INDEX_SETS), default="standard_ng2")
    p.add_argument("--raw-amplitude", action="store_true", help="skip RSSI/AGC scaling of CSI")
    p.add_argument("--pool-length", type=int, default=50)
    p.add_argument("--p", type=int, default=1, help="factor count of the PCA arm")
    _add_fit_opts(p)


def _add_classifier_opts(p):
    p.add_argument("--classifier", choices=("knn", "linear"), default="knn")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--test-fraction", type=float, default=0.25)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csihdfm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config")
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    p = command("parse", cmd_parse, "decode a capture log into a frame table")
    p.add_argument("--input", required=True)
    p.add_argument("--raw-csi", action="store_true", help="also dump raw CSI integers")

    p = command("calibrate", cmd_calibrate, "amplitude, raw and calibrated phase matrices of a capture")
    p.add_argument("--input", required=True)
    p.add_argument("--index-set", choices=sorted(INDEX_SETS), default="standard_ng2")
    p.add_argument("--raw-amplitude", action="store_true")

    p = command("synth", cmd_synth, "factor-removal experiment on synthetic sinusoidal factors")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--t", type=int, default=1000)
    p.add_argument("--p-true", type=int, default=3)
    p.add_argument("--frequencies", help="comma-separated cycles/sample, one per factor")
    _add_fit_opts(p)

    p = command("fit", cmd_fit, "select the factor count of one capture or matrix file")
    p.add_argument("--input", required=True)
    p.add_argument("--channel", choices=("amplitude", "phase"), default="amplitude")
    p.add_argument("--index-set", choices=sorted(INDEX_SETS), default="standard_ng2")
    p.add_argument("--raw-amplitude", action="store_true")
    _add_fit_opts(p)

    p = command("features", cmd_features, "extract HDFM or PCA features for a dataset")
    _add_source_opts(p)
    p.add_argument("--arm", choices=("hdfm", "pca"), default="hdfm")

    p = command("classify", cmd_classify, "train and evaluate a classifier on a feature file")
    p.add_argument("--features", required=True)
    _add_classifier_opts(p)

    for name, help in (("run", "end-to-end pipeline for one arm or both"), ("compare", "HDFM versus fixed-p PCA")):
        p = command(name, cmd_run, help)
        _add_source_opts(p)
        _add_classifier_opts(p)
        if name == "run":
            p.add_argument("--arm", choices=("hdfm", "pca", "compare"), default="compare")
    return parser


def _apply_config(parser, argv):
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        cfg = read_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in cfg.items():
        if key in ("command", "config", "out"):
            continue
        if key not in actions:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = _bool(raw)
        elif act.type is not None:
            try:
                defaults[key] = act.type(raw)
            except ValueError:
                raise UsageError(f"bad value for {key}: {raw!r}") from None
        else:
            defaults[key] = raw
        if act.choices is not None and defaults[key] not in act.choices:
            raise UsageError(f"{key} must be one of {sorted(act.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"csihdfm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"csihdfm: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"csihdfm: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
