"""Command-line surface: train, continue, infer, react, eval, layout, plot.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 training
diverged.  The environment variable AFFECT_SEED, when set, overrides the
training seed from the config file.  All runs with fixed seeds are
bit-reproducible in every numeric output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evaluation, inference, training
from .data import SignalDataset, StateAssignment, dataset_from_idx, synth_gaussian_dataset
from .errors import TrainingDivergedError
from .manifold import ManifoldSpec, canonical_margins, embeddability_check
from .network import default_layers, forward, init_network

# printed matrices carry 3-4 significant digits, so the CLI judges
# embeddability at print precision rather than the library's strict default
PRINT_PRECISION_REL_TOL = 0.02


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="affectmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a manifold from a JSON run config")
    p.add_argument("--config", required=True)

    p = sub.add_parser("continue", help="resume training an existing model")
    p.add_argument("--model", required=True)
    p.add_argument("--config", required=True)

    p = sub.add_parser("infer", help="infer states for CSV signal rows")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)

    p = sub.add_parser("react", help="react with every manifold of a mind")
    p.add_argument("--mind", required=True)
    p.add_argument("--input", required=True)

    p = sub.add_parser("eval", help="margin-reproduction report for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None)

    p = sub.add_parser("layout", help="print a canonical margin matrix")
    p.add_argument("--which", required=True,
                   choices=["love_linear", "love_nonlinear", "joy"])

    p = sub.add_parser("plot", help="render the 2-D embedding space as SVG")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    return parser


def _load_json(path):
    with open(path) as f:
        return json.load(f)


def _resolve_dataset(source):
    """Build a SignalDataset from a dataset-source document.

    Either {"synthetic": {states, per_state, dim, separation, seed}} or
    {"idx": {images, labels, assignment}}, optionally followed by
    {"holdout": {fraction, seed, part}} to take one side of a split.
    """
    if "synthetic" in source:
        cfg = source["synthetic"]
        ds = synth_gaussian_dataset(
            cfg["states"], cfg["per_state"], cfg["dim"],
            cfg.get("separation", 1.0), cfg.get("seed", 0),
        )
    elif "idx" in source:
        cfg = source["idx"]
        ds = dataset_from_idx(
            cfg["images"], cfg["labels"], StateAssignment(cfg["assignment"])
        )
    else:
        raise ValueError("dataset source must contain 'synthetic' or 'idx'")
    holdout = source.get("holdout")
    if holdout:
        train_ds, test_ds = evaluation.train_test_split(
            ds, holdout.get("fraction", 0.2), holdout.get("seed", 0)
        )
        part = holdout.get("part", "train")
        if part not in ("train", "test"):
            raise ValueError(f"holdout part must be 'train' or 'test', got {part!r}")
        ds = train_ds if part == "train" else test_ds
    return ds


def _load_dataset_arg(path):
    if path.endswith(".csv"):
        return SignalDataset.from_csv(path)
    return _resolve_dataset(_load_json(path))


def _train_config(doc):
    cfg = training.TrainConfig.from_dict(doc.get("train", {}))
    env_seed = os.environ.get("AFFECT_SEED")
    if env_seed:
        cfg = training.TrainConfig.from_dict(
            {**doc.get("train", {}), "seed": int(env_seed)}
        )
    return cfg


def _read_signal_rows(path, width=None):
    """Rows of comma-separated floats; a single leading header line is allowed."""
    rows = []
    with open(path) as f:
        for i, ln in enumerate(f):
            ln = ln.strip()
            if not ln:
                continue
            parts = ln.split(",")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                if i == 0:
                    continue  # header line
                raise ValueError(f"{path}, line {i + 1}: not a numeric signal row")
    if not rows:
        raise ValueError(f"no signal rows found in {path}")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have inconsistent widths")
    x = np.asarray(rows, dtype=float)
    if width is not None and x.shape[1] != width:
        raise ValueError(f"{path}: rows have width {x.shape[1]}, expected {width}")
    return x


def _emit(doc, out=None):
    text = json.dumps(doc, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _cmd_train(args):
    run = _load_json(args.config)
    spec = ManifoldSpec.load(run["spec"])
    dataset = _resolve_dataset(run["data"])
    cfg = _train_config(run)
    net_doc = run.get("network", {})
    layers = default_layers(
        spec.input_dim, spec.embedding_dim,
        hidden=tuple(net_doc.get("hidden", (256, 128, 64))),
        dropout_rate=net_doc.get("dropout_rate", 0.1),
    )
    net = init_network(layers, cfg.seed)
    model = training.train(dataset, spec, cfg, net)
    out_dir = Path(run.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    inference.save_model(model, out_dir / "model.json")
    training.write_loss_csv(model.history, out_dir / "loss.csv")
    print(f"wrote {out_dir / 'model.json'} and {out_dir / 'loss.csv'}")
    return 0


def _cmd_continue(args):
    run = _load_json(args.config)
    model = inference.load_model(args.model)
    dataset = _resolve_dataset(run["data"])
    cfg = _train_config(run)
    continued = training.continue_train(model, dataset, cfg)
    out_dir = Path(run.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    inference.save_model(continued, out_dir / "model.json")
    training.write_loss_csv(continued.history, out_dir / "loss.csv")
    print(f"wrote {out_dir / 'model.json'} and {out_dir / 'loss.csv'}")
    return 0


def _cmd_infer(args):
    model = inference.load_model(args.model)
    signals = _read_signal_rows(args.input, model.spec.input_dim)
    results = [
        inference.infer_state(model, x).to_dict(model.spec.name) for x in signals
    ]
    _emit(results)
    return 0


def _cmd_react(args):
    mind = inference.load_mind(args.mind)
    signals = _read_signal_rows(args.input)
    out = []
    for x in signals:
        reactions = inference.mind_react(mind, x)
        out.append({
            name: result.to_dict(name) for name, result in reactions.items()
        })
    _emit(out)
    return 0


def _cmd_eval(args):
    model = inference.load_model(args.model)
    dataset = _load_dataset_arg(args.data)
    report = evaluation.evaluate(model, dataset)
    _emit(report.to_dict(), args.out)
    return 0


def _cmd_layout(args):
    margins = canonical_margins(args.which)
    for row in margins.entries:
        print(" ".join(f"{v:g}" for v in row))
    report = embeddability_check(margins, 2, rel_tol=PRINT_PRECISION_REL_TOL)
    print(f"embeddable in 2D: {str(report.embeddable).lower()}")
    print("gram eigenvalues: " + " ".join(f"{v:.6g}" for v in report.eigenvalues))
    return 0


def _cmd_plot(args):
    model = inference.load_model(args.model)
    dataset = _load_dataset_arg(args.data)
    if dataset.dim != model.spec.input_dim:
        raise ValueError(
            f"dataset width {dataset.dim} != manifold input_dim "
            f"{model.spec.input_dim}"
        )
    emb, _ = forward(model.network, dataset.signals, mode="eval")
    evaluation.render_scatter_svg(
        emb, dataset.state_labels, model.spec.state_names, args.out
    )
    print(f"wrote {args.out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "continue": _cmd_continue,
    "infer": _cmd_infer,
    "react": _cmd_react,
    "eval": _cmd_eval,
    "layout": _cmd_layout,
    "plot": _cmd_plot,
}


def cli_main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except TrainingDivergedError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
