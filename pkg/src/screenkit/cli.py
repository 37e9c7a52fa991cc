"""Command-line pipeline: curate, split, featurize, train, predict, evaluate, tune.

Every command writes ``<output>.provenance.json`` beside its main output,
holding the command configuration and SHA-256 digests of every input and
output file.  Passing ``--verify`` re-runs the command and fails unless the
fresh hashes match the recorded ones.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .chem import SmilesError
from .curation import (ACTIVITY_THRESHOLD, ingest, label_activity, load_sources, merge_and_dedup,
                       read_dataset, summarize, write_dataset)
from .features import DEFAULT_RADIUS, DEFAULT_WIDTH, FEATURE_MODES, drop_zero_variance, featurize, load_matrix, \
    save_matrix, standardize
from .metrics import (DEFAULT_TOP_FRACTIONS, Undefined, active_mae, ef_curve, evaluate, make_records,
                      read_predictions, sha256_file, write_fraction_table, write_predictions)
from .models import (ArtifactError, ForestConfig, RandomForestModel, RandomPredictorModel, load_file,
                     random_predict, rf_predict, rf_train, save_file)
from .sampling import (DEFAULT_FRACTIONS, WeightedTrainingSet, compute_weights, oversample_to_balance,
                       read_manifest, stratified_split, write_manifest)
from .synth import SynthBenchSpec, generate, write_bench
from .tuning import RF_SEARCH_SPACE, random_search

WEIGHTING = ("none", "sample-weight", "oversample")


class CommandError(Exception):
    """A user-facing failure; reported without a traceback."""


class Run:
    """Collects the inputs and outputs of one command for its provenance record."""

    def __init__(self, args: argparse.Namespace, main_output):
        self.args = args
        self.main_output = Path(main_output)
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    def input(self, path) -> Path:
        path = Path(path)
        if not path.is_file():
            raise CommandError(f"input file not found: {path}")
        self.inputs.append(path)
        return path

    def output(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(path)
        return path

    @property
    def provenance_path(self) -> Path:
        return self.main_output.with_name(self.main_output.name + ".provenance.json")

    def record(self) -> dict:
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "verify")}
        config = json.loads(json.dumps(config))  # tuples become lists, as when read back
        return {
            "command": self.args.command,
            "config": config,
            "inputs": {str(p): sha256_file(p) for p in self.inputs},
            "outputs": {str(p): sha256_file(p) for p in self.outputs},
            "toolkit_version": __version__,
        }


def _fractions(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    return values


def _labels(records, threshold: float) -> np.ndarray:
    return np.array([label_activity(r.pic50, threshold) for r in records], dtype=bool)


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def _load_stage(run: Run, dataset, manifest=None):
    records = read_dataset(run.input(dataset))
    if not records:
        raise CommandError(f"{dataset}: dataset is empty")
    if manifest is None:
        return records, None, {}
    man, weights = read_manifest(run.input(manifest))
    run.input(Path(manifest).with_suffix(".json"))
    if len(man.assignment) != len(records):
        raise CommandError(f"{manifest} has {len(man.assignment)} rows but {dataset} has {len(records)}")
    return records, man, weights


def _load_features(run: Run, path, records):
    m = load_matrix(run.input(path))
    if m.n_rows != len(records):
        raise CommandError(f"{path} has {m.n_rows} rows but the dataset has {len(records)}")
    if m.row_ids and tuple(r.smiles for r in records) != m.row_ids:
        raise CommandError(f"{path}: row ids do not match the dataset SMILES order")
    return m


# -- commands ---------------------------------------------------------------

def cmd_synth_bench(args, run: Run) -> None:
    spec = SynthBenchSpec(args.n, args.prevalence, args.effect, args.noise, args.seed)
    compounds = generate(spec)
    write_bench(compounds, run.output(args.out))
    print(f"wrote {len(compounds)} compounds ({sum(c.has_motif for c in compounds)} with motif) to {args.out}")


def cmd_curate(args, run: Run) -> int:
    sources = load_sources(run.input(args.sources))
    for s in sources:
        run.input(s.path)
    records, diagnostics = ingest(sources)
    curated, more = merge_and_dedup(records, canonical_keys=not args.raw_keys)
    diagnostics += more
    out = Path(args.out)
    diag_path = run.output(_sibling(out, ".diagnostics.jsonl"))
    with diag_path.open("w", encoding="utf-8") as fh:
        for d in diagnostics:
            fh.write(d.to_json() + "\n")
    if not curated:
        print(f"error: no records survived curation ({len(diagnostics)} diagnostics in {diag_path})",
              file=sys.stderr)
        return 1
    write_dataset(curated, run.output(out))
    summary = summarize(curated, args.threshold)
    run.output(_sibling(out, ".summary.json")).write_text(
        json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    hist = run.output(_sibling(out, ".histogram.csv"))
    with hist.open("w", encoding="utf-8") as fh:
        fh.write("low,high,count\n")
        for lo, hi, c in summary.histogram:
            fh.write(f"{lo!r},{hi!r},{c}\n")
    if not args.no_plots:
        from .plotting import plot_histogram
        plot_histogram(summary, run.output(_sibling(out, ".histogram.png")))
    print(f"curated {len(curated)} compounds from {len(records)} records; "
          f"{summary.n_active} active ({100 * summary.prevalence:.3f}%); {len(diagnostics)} diagnostics")
    return 0


def cmd_split(args, run: Run) -> None:
    records, _, _ = _load_stage(run, args.dataset)
    labels = _labels(records, args.threshold)
    manifest = stratified_split(labels, args.fractions, args.seed, args.threshold)
    weights = None
    train = manifest.indices("train")
    if labels[train].any() and not labels[train].all():
        weights = WeightedTrainingSet.from_manifest(manifest, labels)
    sidecar = write_manifest(manifest, run.output(args.out), weights)
    run.output(sidecar)
    counts = manifest.sidecar()["counts"]
    print("split " + ", ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_featurize(args, run: Run) -> None:
    records = read_dataset(run.input(args.dataset))
    smiles = [r.smiles for r in records]
    m = featurize(smiles, args.feature_mode, args.radius, args.width, row_ids=smiles)
    if args.manifest:
        _, man, _ = _load_stage(run, args.dataset, args.manifest)
        fit_rows = man.indices("train")
        m, dropped = drop_zero_variance(m, fit_rows)
        scale = args.standardize == "yes" or (args.standardize == "auto" and args.feature_mode != "fingerprints")
        if scale:
            m = standardize(m, fit_rows)
        print(f"dropped {len(dropped)} zero-variance columns; standardized={scale}")
    elif args.standardize == "yes":
        raise CommandError("--standardize yes needs --manifest to fit on training rows only")
    save_matrix(m, run.output(args.out))
    print(f"wrote {m.n_rows} x {len(m.column_names)} feature matrix to {args.out}")


def _training_rows(records, man, weighting: str, threshold: float, seed: int):
    labels = _labels(records, threshold)
    train = man.indices("train")
    if weighting == "none":
        return train, None
    if weighting == "sample-weight":
        return train, compute_weights(labels[train])
    return oversample_to_balance(train, labels, seed), None


def _forest_config(args) -> ForestConfig:
    params = {}
    if args.params:
        study = json.loads(Path(args.params).read_text(encoding="utf-8"))
        params = study.get("best_params", study)
    return ForestConfig(
        n_estimators=args.trees if args.trees is not None else params.get("n_estimators", 100),
        max_depth=args.max_depth if args.max_depth is not None else params.get("max_depth", 20),
        min_samples_leaf=args.min_samples_leaf,
        features_per_split=(args.features_per_split if args.features_per_split is not None
                            else params.get("features_per_split", 1 / 3)),
    )


def cmd_train_rf(args, run: Run) -> None:
    records, man, _ = _load_stage(run, args.dataset, args.manifest)
    if args.params:
        run.input(args.params)
    m = _load_features(run, args.features, records)
    rows, w = _training_rows(records, man, args.weighting, args.threshold, args.seed)
    y = np.array([r.pic50 for r in records])
    config = _forest_config(args)
    model = rf_train(m.take_rows(rows), y[rows], w, config, args.seed, args.n_jobs)
    model = RandomForestModel(model.trees, model.config, model.feature_schema, model.seed, model.training_hash,
                              {"weighting": args.weighting, "threshold": args.threshold, "n_train_rows": len(rows)})
    save_file(model, run.output(args.out))
    print(f"trained {config.n_estimators} trees on {len(rows)} rows; wrote {args.out}")


def cmd_train_random(args, run: Run) -> None:
    records, man, _ = _load_stage(run, args.dataset, args.manifest)
    y = np.array([r.pic50 for r in records])[man.indices("train")]
    model = RandomPredictorModel.fit(y, args.seed)
    save_file(model, run.output(args.out))
    print(f"random predictor on [{model.low}, {model.high}]; wrote {args.out}")


def cmd_predict(args, run: Run) -> None:
    model = load_file(run.input(args.model))
    if args.features:
        m = load_matrix(run.input(args.features))
        ids = list(m.row_ids)
    elif args.dataset:
        m = None
        ids = [r.smiles for r in read_dataset(run.input(args.dataset))]
    else:
        raise CommandError("predict needs --features or --dataset")
    rows = np.arange(len(ids))
    if args.manifest:
        man, _ = read_manifest(run.input(args.manifest))
        if len(man.assignment) != len(ids):
            raise CommandError(f"{args.manifest} has {len(man.assignment)} rows but inputs have {len(ids)}")
        rows = man.indices(args.split)
    if isinstance(model, RandomForestModel):
        if m is None:
            raise CommandError("a forest model needs --features")
        preds = rf_predict(model, m.take_rows(rows))
    else:
        preds = random_predict(model, len(rows))
    write_predictions([ids[i] for i in rows], preds, run.output(args.out))
    print(f"wrote {len(rows)} predictions to {args.out}")


def cmd_evaluate(args, run: Run) -> None:
    truth = run.input(args.truth) if args.truth else None
    records = read_predictions(run.input(args.predictions), truth, args.threshold)
    if not records:
        raise CommandError(f"{args.predictions}: no predictions")
    provenance = {"predictions_sha256": sha256_file(args.predictions)}
    if truth:
        provenance["truth_sha256"] = sha256_file(truth)
    report = evaluate(records, args.top_fractions, args.threshold, provenance)
    out = run.output(args.out)
    out.write_text(report.to_json(), encoding="utf-8")
    write_fraction_table(report, run.output(_sibling(out, ".fractions.csv")))
    curve = [(x, None if isinstance(ef, Undefined) else ef) for x, ef in ef_curve(records)]
    with run.output(_sibling(out, ".ef_curve.csv")).open("w", encoding="utf-8") as fh:
        fh.write("fraction,ef\n")
        for x, ef in curve:
            fh.write(f"{x!r},{'' if ef is None else repr(ef)}\n")
    if not args.no_plots:
        from .plotting import plot_ef_curve
        plot_ef_curve({Path(args.predictions).stem: curve}, run.output(_sibling(out, ".ef_curve.png")))
    d = report.to_dict()
    auc = d["auc_roc"] if not isinstance(d["auc_roc"], dict) else "undefined"
    ef1 = report.ef.get(0.01)
    print(f"n={report.n} prevalence={report.prevalence:.4f} auc={auc} "
          f"EF@1%={'undefined' if ef1 is None or isinstance(ef1, Undefined) else f'{ef1:.3f}'}")


def cmd_tune(args, run: Run) -> None:
    records, man, _ = _load_stage(run, args.dataset, args.manifest)
    m = _load_features(run, args.features, records)
    rows, w = _training_rows(records, man, args.weighting, args.threshold, args.seed)
    y = np.array([r.pic50 for r in records])
    val = man.indices("val")
    if val.size == 0:
        raise CommandError("the manifest has no validation rows")
    X_train, X_val = m.take_rows(rows), m.take_rows(val)
    val_ids = [records[i].smiles for i in val]

    def objective(params):
        model = rf_train(X_train, y[rows], w, ForestConfig(**params), args.seed, args.n_jobs)
        score = active_mae(make_records(val_ids, y[val], rf_predict(model, X_val), args.threshold))
        if isinstance(score, Undefined):
            raise ValueError(score.reason)
        return score

    out = Path(args.out)
    log = run.output(args.log) if args.log else run.output(_sibling(out, ".jsonl"))
    study = random_search(RF_SEARCH_SPACE, objective, args.budget, args.seed, log_path=log)
    run.output(out).write_text(json.dumps(study.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"best trial {study.best_trial}: active MAE {study.best.objective:.4f} with {study.best.params}")


# -- parser -----------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, seed: bool = False, threshold: bool = True) -> None:
    if seed:
        p.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    if threshold:
        p.add_argument("--threshold", type=float, default=ACTIVITY_THRESHOLD,
                       help="pIC50 at or above which a compound is active (default 6.0)")
    p.add_argument("--verify", action="store_true",
                   help="re-run and check outputs against the existing provenance record")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="screenkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-bench", help="generate a synthetic motif benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--prevalence", type=float, default=0.021)
    p.add_argument("--effect", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.2)
    _add_common(p, seed=True, threshold=False)
    p.set_defaults(func=cmd_synth_bench)

    p = sub.add_parser("curate", help="merge assay sources into one SMILES,pIC50 dataset")
    p.add_argument("--sources", required=True, help="JSON source list")
    p.add_argument("--out", required=True)
    p.add_argument("--raw-keys", action="store_true", help="deduplicate on raw SMILES text (audit mode)")
    p.add_argument("--no-plots", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="stratified train/val/test manifest")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fractions", type=_fractions, default=DEFAULT_FRACTIONS, help="train,val,test")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("featurize", help="fingerprint and/or descriptor matrix")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help=".npz or .csv")
    p.add_argument("--feature-mode", choices=FEATURE_MODES, default="fingerprints")
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS)
    p.add_argument("--width", type=int, default=DEFAULT_WIDTH)
    p.add_argument("--manifest", help="fit column filtering/scaling on its train rows")
    p.add_argument("--standardize", choices=("auto", "yes", "no"), default="auto")
    _add_common(p, threshold=False)
    p.set_defaults(func=cmd_featurize)

    for name, func, text in (("train-rf", cmd_train_rf, "train a random forest"),
                             ("train-random", cmd_train_random, "fit the uniform random baseline")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--dataset", required=True)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
        if name == "train-rf":
            p.add_argument("--features", required=True)
            p.add_argument("--trees", type=int)
            p.add_argument("--max-depth", type=int)
            p.add_argument("--min-samples-leaf", type=int, default=1)
            p.add_argument("--features-per-split", type=float)
            p.add_argument("--params", help="study JSON from `tune`; explicit flags take precedence")
            p.add_argument("--weighting", choices=WEIGHTING, default="none")
            p.add_argument("--n-jobs", type=int, default=1)
        _add_common(p, seed=True, threshold=name == "train-rf")
        p.set_defaults(func=func)

    p = sub.add_parser("predict", help="score compounds with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--features")
    p.add_argument("--dataset", help="ids for the random baseline when no features are given")
    p.add_argument("--manifest")
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", required=True)
    _add_common(p, threshold=False)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="regression and screening metrics for a predictions CSV")
    p.add_argument("--predictions", required=True, help="id,y_true,y_pred or SMILES,pred_pIC50")
    p.add_argument("--truth", help="curated dataset to join SMILES,pred_pIC50 predictions against")
    p.add_argument("--out", required=True, help="report JSON")
    p.add_argument("--top-fractions", type=_fractions, default=DEFAULT_TOP_FRACTIONS)
    p.add_argument("--no-plots", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="random search over forest hyperparameters (validation active MAE)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True, help="study result JSON")
    p.add_argument("--log", help="trial log JSONL (default <out>.jsonl)")
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--weighting", choices=WEIGHTING, default="none")
    p.add_argument("--n-jobs", type=int, default=1)
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_tune)
    return parser


def _verify(previous: dict, current: dict) -> list[str]:
    problems = []
    for kind in ("inputs", "outputs"):
        for path, digest in previous.get(kind, {}).items():
            now = current[kind].get(path)
            if now != digest:
                problems.append(f"{kind[:-1]} {path}: recorded {digest[:12]}, now {str(now)[:12]}")
    if previous.get("config") != current["config"]:
        problems.append("configuration differs from the recorded run")
    return problems


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    run = Run(args, args.out)
    previous = None
    if args.verify:
        if not run.provenance_path.is_file():
            print(f"error: --verify needs an existing {run.provenance_path}", file=sys.stderr)
            return 2
        previous = json.loads(run.provenance_path.read_text(encoding="utf-8"))
    try:
        status = args.func(args, run) or 0
    except (CommandError, ValueError, OSError, RuntimeError, SmilesError, ArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if status:
        return status
    record = run.record()
    if previous is not None:
        problems = _verify(previous, record)
        if problems:
            for line in problems:
                print(f"verify: {line}", file=sys.stderr)
            return 3
        print(f"verify: {len(record['inputs'])} inputs and {len(record['outputs'])} outputs match")
    run.provenance_path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
