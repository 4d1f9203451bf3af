"""
Command-line entry point: `unlearning-lab <subcommand>`.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import ValidationError
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .config import ExperimentConfig, SweepSpec, UnlearnRun
from .cost import cost_table, efficiency_ratio, method_kind
from .errors import UnlearningLabError
from .harness import (
    evaluate_model,
    prepare_seed,
    reference_target,
    run_experiment,
    search_learning_rate,
    sweep,
    train_retrained,
    train_vanilla,
    unlearn_method,
    write_json_model,
)
from .lm import Arch, Role, load_checkpoint, save_checkpoint
from .schemas import MetricsReport
from .unlearn import newton_unlearn_bigram

logger = logging.getLogger("UnlearningLab.CLI")
console = Console()


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(name)s: %(message)s",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig.from_yaml(args.config) if args.config else ExperimentConfig.get_default_config()
    updates = {}
    if args.output_dir:
        updates["output_dir"] = args.output_dir
    if args.seed is not None:
        updates["seeds"] = [args.seed]
    if updates:
        cfg = ExperimentConfig.model_validate({**cfg.model_dump(), **updates})
    return cfg


def first_seed(cfg: ExperimentConfig) -> int:
    return cfg.seeds[0]


def reports_table(reports: Sequence[MetricsReport], title: str) -> Table:
    table = Table(title=title, box=box.ROUNDED)
    for column in ("model", "seed", "forget ppl", "retain ppl", "general ppl", "MIA AUC", "type-I", "type-II", "FLOPs"):
        table.add_column(column, justify="left" if column == "model" else "right")
    for r in reports:
        general = r.splits.get("general")
        behavioral = r.behavioral
        table.add_row(
            r.provenance.method or r.provenance.model_role,
            str(r.provenance.seed),
            f"{r.splits['forget'].perplexity:.4f}",
            f"{r.splits['retain'].perplexity:.4f}",
            f"{general.perplexity:.4f}" if general else "-",
            f"{r.mia.best_auc:.4f}" if r.mia else "-",
            f"{behavioral.type1:.4g}" if behavioral and behavioral.type1 is not None else "-",
            f"{behavioral.type2:.4g}" if behavioral and behavioral.type2 is not None else "-",
            r.flops_text or "-",
        )
    return table


# Subcommands
def cmd_gen_corpus(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    for seed in cfg.seeds:
        ctx = prepare_seed(cfg, seed)
        s = ctx.text_splits
        console.print(
            f"seed {seed}: |D|={len(s.train)} |U|={len(s.forget_indices)} |R|={len(s.retain_sample_indices)} "
            f"|G|={len(s.general_indices)} |A|={len(s.approximate)} -> {ctx.run_dir}"
        )
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    ctx = prepare_seed(cfg, first_seed(cfg))
    vanilla = train_vanilla(ctx)
    path = save_checkpoint(vanilla, ctx.run_dir / "checkpoints" / "vanilla.npz", ctx.vocab)
    console.print(f"vanilla {vanilla.arch.value} P={vanilla.param_count} -> {path}")
    return 0


def cmd_retrain(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    ctx = prepare_seed(cfg, first_seed(cfg))
    retrained = train_retrained(ctx)
    path = save_checkpoint(retrained, ctx.run_dir / "checkpoints" / "retrained.npz", ctx.vocab)
    console.print(f"retrained {retrained.arch.value} P={retrained.param_count} -> {path}")
    return 0


def _vanilla_for(args: argparse.Namespace, ctx):
    path = Path(args.checkpoint) if args.checkpoint else ctx.run_dir / "checkpoints" / "vanilla.npz"
    if path.exists():
        model, _ = load_checkpoint(path)
        return model
    logger.info(f"[CLI] no checkpoint at {path}; training the vanilla model first")
    vanilla = train_vanilla(ctx)
    save_checkpoint(vanilla, path, ctx.vocab)
    return vanilla


def cmd_unlearn(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    ctx = prepare_seed(cfg, first_seed(cfg))
    vanilla = _vanilla_for(args, ctx)
    target = reference_target(ctx, vanilla)

    if args.newton:
        if vanilla.arch != Arch.BIGRAM:
            raise UnlearningLabError("--newton needs a bigram checkpoint")
        unlearned = newton_unlearn_bigram(vanilla, ctx.splits.train, ctx.splits.forget, args.damping)
        report = evaluate_model(ctx, unlearned, target=target, method="newton")
        name = "newton"
    else:
        updates = {"method": args.method}
        if args.lr is not None:
            updates["learning_rate"] = args.lr
        if args.steps is not None:
            updates["steps"] = args.steps
        if args.stop_rule:
            updates["stop_rule"] = args.stop_rule
        run = UnlearnRun(**updates)
        if args.search_lr:
            run = run.model_copy(
                update={"learning_rate": search_learning_rate(ctx, vanilla, run, target, cfg.lr_search)}
            )
        unlearned, summary = unlearn_method(ctx, vanilla, run, target)
        name = run.method.name
        report = evaluate_model(
            ctx, unlearned, target=target, method=name, summary=summary,
            learning_rate=run.learning_rate, steps=run.steps, flops_kind=method_kind(run.method),
        )
    save_checkpoint(unlearned, ctx.run_dir / "checkpoints" / f"{name}.npz", ctx.vocab)
    write_json_model(ctx.run_dir / "reports" / f"{name}.json", report)
    console.print(reports_table([report], f"unlearning: {name}"))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    ctx = prepare_seed(cfg, first_seed(cfg), write=False)
    retrained = None
    if args.retrained:
        retrained, _ = load_checkpoint(args.retrained)
    vanilla = None
    reports: List[MetricsReport] = []
    for path in args.checkpoints:
        model, vocab = load_checkpoint(path)
        if vocab is not None and vocab != ctx.vocab:
            raise UnlearningLabError(f"{path} was trained on a different vocabulary")
        if model.role == Role.VANILLA:
            vanilla = model
        target = reference_target(ctx, vanilla) if vanilla is not None else None
        report = evaluate_model(ctx, model, retrained=retrained, target=target, method=Path(path).stem)
        reports.append(report)
        if args.report_dir:
            write_json_model(Path(args.report_dir) / f"{Path(path).stem}.json", report)
    console.print(reports_table(reports, f"evaluation, seed {ctx.seed}"))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    spec = cfg.sweep or SweepSpec()
    updates = {}
    if args.axis:
        updates["axis"] = args.axis
    if args.grid:
        updates["grid"] = [float(v) for v in args.grid.split(",")]
    if args.fixed is not None:
        updates["fixed"] = args.fixed
    if args.methods:
        updates["methods"] = args.methods.split(",")
    if updates:
        spec = SweepSpec.model_validate({**spec.model_dump(), **updates})
    table, _ = sweep(cfg, spec)
    view = Table(title=f"sweep over {spec.axis}", box=box.ROUNDED)
    columns = ["method", "point", "seed", "forget_ppl", "retain_ppl", "mia_auc", "instability"]
    for column in columns:
        view.add_column(column, justify="left" if column == "method" else "right")
    for record in table.to_dict("records"):
        view.add_row(*[f"{record[c]:.4g}" if isinstance(record[c], float) else str(record[c]) for c in columns])
    console.print(view)
    console.print(f"sweep.csv -> {Path(cfg.output_dir) / 'sweep.csv'}")
    return 0


def cmd_cost_table(args: argparse.Namespace) -> int:
    frame = cost_table(args.params, args.training_tokens, args.forget_tokens, args.epochs)
    table = Table(title="Estimated FLOPs", box=box.ROUNDED)
    table.add_column("method")
    table.add_column("kind")
    table.add_column("FLOPs", justify="right")
    for record in frame.to_dict("records"):
        table.add_row(record["method"], record["kind"], record["flops_text"])
    console.print(table)
    ratio = efficiency_ratio(args.params, args.training_tokens, args.forget_tokens, args.epochs)
    console.print(f"retraining / gradient ascent = {ratio:.3g}")
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.csv, index=False)
    return 0


def cmd_full_experiment(args: argparse.Namespace) -> int:
    cfg = load_config(args)
    results = run_experiment(cfg)
    reports = [r for state in results.values() for r in state.get("reports", [])]
    console.print(reports_table(reports, "full experiment"))
    failed = {seed: state["manifest"].failures for seed, state in results.items() if not state["manifest"].invariants_ok}
    for seed, failures in failed.items():
        for failure in failures:
            console.print(f"[red]seed {seed} {failure.stage}{f' ({failure.method})' if failure.method else ''}: {failure.error}")
    return 0 if not failed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment YAML (defaults apply when omitted)")
    common.add_argument("--seed", type=int, default=None, help="Run this seed only")
    common.add_argument("--output-dir", default=None, help="Root of the run directories")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="unlearning-lab", description="Desk-scale machine unlearning lab")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-corpus", parents=[common], help="Generate D and its splits").set_defaults(func=cmd_gen_corpus)
    sub.add_parser("train", parents=[common], help="Train the vanilla model").set_defaults(func=cmd_train)
    sub.add_parser("retrain", parents=[common], help="Train the retrain oracle on D∖U").set_defaults(func=cmd_retrain)

    p = sub.add_parser("unlearn", parents=[common], help="Unlearn U from a vanilla checkpoint")
    p.add_argument("--checkpoint", help="Vanilla checkpoint (trained on the fly when missing)")
    p.add_argument("--method", default="gradient-ascent", help="Method preset name")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--stop-rule", choices=["fixed-steps", "reach-forget-ppl-target"], default=None)
    p.add_argument("--search-lr", action="store_true", help="Pick the lr with the two-phase search")
    p.add_argument("--newton", action="store_true", help="One damped Newton step (bigram only)")
    p.add_argument("--damping", type=float, default=None)
    p.set_defaults(func=cmd_unlearn)

    p = sub.add_parser("eval", parents=[common], help="Evaluate checkpoints on the seed's splits")
    p.add_argument("checkpoints", nargs="+")
    p.add_argument("--retrained", help="Retrained checkpoint for the type-I measure")
    p.add_argument("--report-dir", help="Write one JSON report per checkpoint here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="Learning-rate or step sweep")
    p.add_argument("--axis", choices=["learning-rate", "optimization-steps"], default=None)
    p.add_argument("--grid", help="Comma-separated, strictly increasing grid")
    p.add_argument("--fixed", type=float, default=None, help="Value of the other axis")
    p.add_argument("--methods", help="Comma-separated preset names")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost-table", parents=[common], help="FLOPs of retraining and every method")
    p.add_argument("--params", default="6e9", help="Model parameter count P")
    p.add_argument("--training-tokens", default="3e12")
    p.add_argument("--forget-tokens", default=str(2000 * 4096))
    p.add_argument("--epochs", default="1")
    p.add_argument("--csv", help="Also write the table as CSV")
    p.set_defaults(func=cmd_cost_table)

    sub.add_parser(
        "full-experiment", parents=[common], help="Vanilla, every method and the retrain oracle for every seed"
    ).set_defaults(func=cmd_full_experiment)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.func(args)
    except (UnlearningLabError, ValidationError, ValueError) as e:
        logger.error(f"[CLI] {args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
