import argparse
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from . import config
from .bounds import (
    BoundInput,
    BoundResult,
    TailBound,
    alt_bennett_bound,
    bennett_tail,
    bernstein_bound,
    hoeffding_bound,
    optimal_rate_bound,
    rademacher_bound_bennett,
    rademacher_bound_hoeffding,
)
from .complexity import rademacher_expected, uen_enumerated, uen_estimate
from .config import CONFIG_FILE, load_document
from .deviation import run_deviation_suite, run_symmetrization_suite
from .display import (
    console,
    display_bound_results,
    display_config_panel,
    display_curve,
    display_files,
    display_findings,
    display_key_values,
    display_logo,
    display_step,
    display_tail_reports,
)
from .divergence import discrepancy_distance, h_delta_h, ipm, weighted_ipm
from .domains import (
    DiscreteDomainSpec,
    DomainDataset,
    DomainId,
    DomainSpec,
    MultiSourceBundle,
    domain_spec_from_dict,
    load_domain_spec,
    read_dataset_csv,
    sample_discrete,
    synthesize_domain,
    write_dataset_csv,
)
from .errors import ConfigError, RepdaError, ValidationError
from .experiment import ExperimentConfig, analyze_curve, run_convergence_experiment
from .hypotheses import FiniteHypothesisClass, LossFunction, load_hypothesis_class
from .reports import emit_report, emit_tail_reports, read_curve_csv, write_json
from .risk import (
    MixtureWeights,
    combined_risk,
    optimal_parameters,
    solve_weighted_least_squares,
)
from .utils import setup_logging
from .verbose import vlog, vlog_json, vtimer

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_SUITE_FAILED = 3


@dataclass
class RunContext:
    """Settings of one invocation after flags override the configured values."""

    seed: int
    threads: int
    out_dir: Path
    fmt: str
    document: Dict[str, Any]
    base: Path

    def path(self, value: str) -> Path:
        """Resolve a path from the instance document relative to its directory."""
        path = Path(value).expanduser()
        return path if path.is_absolute() else self.base / path

    def require(self, key: str) -> Any:
        if key not in self.document:
            raise ConfigError(f"The instance document needs '{key}'")
        return self.document[key]


def _weights(document: Dict[str, Any], sizes: Sequence[int]) -> MixtureWeights:
    if "w" in document or "tau" in document:
        if "w" not in document:
            raise ConfigError("Give both 'tau' and 'w', or neither for the optimal weights")
        return MixtureWeights(document.get("tau", 0.0), document["w"])
    return optimal_parameters(sizes)


def _load_class(ctx: RunContext, value: Any) -> FiniteHypothesisClass:
    if isinstance(value, dict):
        return FiniteHypothesisClass.from_dict(value)
    return load_hypothesis_class(ctx.path(value))


def _load_spec(ctx: RunContext, value: Any) -> DomainSpec:
    if isinstance(value, dict):
        return domain_spec_from_dict(value)
    return load_domain_spec(ctx.path(value))


def _load_distribution(ctx: RunContext, value: Any, domain_id: DomainId) -> Any:
    """A discrete spec (inline or .json) or an empirical dataset (.csv)."""
    if isinstance(value, str) and value.lower().endswith(".csv"):
        return read_dataset_csv(ctx.path(value), domain_id)
    spec = _load_spec(ctx, value)
    if not isinstance(spec, DiscreteDomainSpec):
        raise ConfigError("Divergences need discrete specs or dataset CSVs, not gaussian specs")
    return spec


def cmd_synthesize(ctx: RunContext) -> int:
    spec = _load_spec(ctx, ctx.require("spec"))
    n = int(ctx.require("n"))
    domain_id = DomainId.parse(ctx.document.get("domain", "target"))
    replicate = int(ctx.document.get("replicate", 0))
    if isinstance(spec, DiscreteDomainSpec):
        dataset = sample_discrete(spec, n, ctx.seed, domain_id, replicate)
    else:
        dataset = synthesize_domain(spec, n, ctx.seed, domain_id, replicate)
    name = str(domain_id).replace(":", "-")
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    path = write_dataset_csv(dataset, ctx.out_dir / f"dataset-{name}.csv")
    display_key_values(
        "Dataset", {"domain": str(domain_id), "samples": dataset.size, "dim": dataset.dim}
    )
    display_files([path], ctx.out_dir)
    return EXIT_OK


def cmd_erm(ctx: RunContext) -> int:
    target = read_dataset_csv(ctx.path(ctx.require("target")), DomainId.target())
    sources = tuple(
        read_dataset_csv(ctx.path(p), DomainId.source(k))
        for k, p in enumerate(ctx.require("sources"), 1)
    )
    bundle = MultiSourceBundle(sources, target)
    weights = _weights(ctx.document, bundle.sizes)
    h = solve_weighted_least_squares(
        bundle,
        weights,
        ridge=ctx.document.get("ridge"),
        fit_intercept=bool(ctx.document.get("fit_intercept", True)),
    )
    loss = LossFunction.unclamped()
    target_values = loss(h.predict_many(target.inputs), target.labels) if target.size else [0.0]
    source_values = [loss(h.predict_many(s.inputs), s.labels) for s in sources]
    report = combined_risk(target_values, source_values, weights)
    display_key_values("Combined risk", report.to_dict())
    paths = [
        write_json(
            ctx.out_dir / "hypothesis.json",
            {"hypothesis": h.to_dict(), "weights": weights.to_dict(), "risk": report.to_dict()},
            kind="erm",
        )
    ]
    display_files(paths, ctx.out_dir)
    return EXIT_OK


def cmd_divergence(ctx: RunContext) -> int:
    hclass = _load_class(ctx, ctx.require("class"))
    kind = ctx.document.get("kind", "ipm")
    target = _load_distribution(ctx, ctx.require("target"), DomainId.target())
    if kind == "weighted_ipm":
        sources = [
            _load_distribution(ctx, s, DomainId.source(k))
            for k, s in enumerate(ctx.require("sources"), 1)
        ]
        if "w" in ctx.document:
            weights = MixtureWeights(0.0, ctx.document["w"])
        else:
            weights = MixtureWeights.uniform(len(sources))
        value = weighted_ipm(hclass, sources, target, weights)
    else:
        source = _load_distribution(ctx, ctx.require("source"), DomainId.source(1))
        handlers: Dict[str, Callable[[], Any]] = {
            "ipm": lambda: ipm(hclass, source, target),
            "discrepancy": lambda: discrepancy_distance(hclass, source, target, ctx.threads),
            "hdh": lambda: h_delta_h(hclass, source, target, threads=ctx.threads),
        }
        if kind not in handlers:
            raise ConfigError(f"Unknown divergence kind {kind!r}")
        value = handlers[kind]()
    display_key_values("Divergence", value.to_dict())
    paths = [write_json(ctx.out_dir / "divergence.json", value.to_dict(), kind="divergence")]
    display_files(paths, ctx.out_dir)
    return EXIT_OK


def cmd_complexity(ctx: RunContext) -> int:
    doc = ctx.document
    hclass = _load_class(ctx, ctx.require("class"))
    target = _load_spec(ctx, ctx.require("target"))
    if doc.get("kind") == "rademacher":
        estimate = rademacher_expected(
            hclass,
            target,
            int(ctx.require("n")),
            int(doc.get("data_trials", 20)),
            int(doc.get("sigma_trials", 1000)),
            ctx.seed,
            ctx.threads,
        )
    else:
        sources = [_load_spec(ctx, s) for s in ctx.require("sources")]
        sizes = [int(n) for n in ctx.require("sizes")]
        weights = _weights(doc, sizes)
        radius = float(doc.get("radius", 0.05))
        discrete = all(isinstance(s, DiscreteDomainSpec) for s in (target, *sources))
        if discrete and doc.get("enumerate", True):
            estimate = uen_enumerated(
                hclass, target, sources, sizes, weights, radius, exact=bool(doc.get("exact", False))
            )
        else:
            estimate = uen_estimate(
                hclass,
                target,
                sources,
                sizes,
                weights,
                radius,
                int(doc.get("redraws", 20)),
                ctx.seed,
                ctx.threads,
            )
    display_key_values("Complexity", estimate.to_dict())
    paths = [write_json(ctx.out_dir / "complexity.json", estimate.to_dict(), kind="complexity")]
    display_files(paths, ctx.out_dir)
    return EXIT_OK


BOUND_KINDS: Dict[str, Callable[[BoundInput, Dict[str, Any]], Any]] = {
    "hoeffding": lambda inp, doc: hoeffding_bound(inp),
    "optimal_rate": lambda inp, doc: optimal_rate_bound(inp),
    "bernstein": lambda inp, doc: bernstein_bound(inp),
    "alt_bennett": lambda inp, doc: alt_bennett_bound(inp),
    "bennett_tail": lambda inp, doc: bennett_tail(inp, float(doc["xi"]), doc.get("space", "log")),
    "rademacher_hoeffding": lambda inp, doc: rademacher_bound_hoeffding(inp),
    "rademacher_bennett": lambda inp, doc: rademacher_bound_bennett(
        inp, bool(doc.get("allow_out_of_range", False))
    ),
}


def cmd_bound(ctx: RunContext) -> int:
    doc = dict(ctx.document)
    kinds = doc.pop("kind", "hoeffding")
    kinds = [kinds] if isinstance(kinds, str) else list(kinds)
    extra = {k: doc.pop(k) for k in ("xi", "space", "allow_out_of_range") if k in doc}
    inp = BoundInput.from_dict(doc)
    vlog_json("Bound input", inp.to_dict())
    results = []
    for kind in kinds:
        if kind not in BOUND_KINDS:
            raise ConfigError(f"Unknown bound kind {kind!r} (known: {', '.join(BOUND_KINDS)})")
        if kind == "bennett_tail" and "xi" not in extra:
            raise ConfigError("bennett_tail needs 'xi'")
        results.append(BOUND_KINDS[kind](inp, extra))
    display_bound_results([r for r in results if isinstance(r, BoundResult)])
    for tail in (r for r in results if isinstance(r, TailBound)):
        display_key_values(
            "Bennett-type tail", {"kind": tail.kind, "value": tail.value, "raw": tail.raw}
        )
    paths = emit_report(results, ctx.out_dir, ctx.fmt)
    display_files(paths, ctx.out_dir)
    return EXIT_OK


def _run_suite(ctx: RunContext, name: str, runner: Callable[..., List[Any]], instances: int) -> int:
    doc = ctx.document
    trials = int(doc.get("trials", 10_000))
    instances = int(doc.get("instances", instances))
    message = f"  [dim]Running {instances} {name} instances ({trials} trials each)...[/dim]"
    with console.status(message), vtimer(f"{name} suite"):
        reports = runner(instances=instances, trials=trials, seed=ctx.seed, threads=ctx.threads)
    display_tail_reports(reports, title=f"{name.capitalize()} suite")
    paths = emit_tail_reports(reports, ctx.out_dir / name, ctx.fmt, name)
    display_files(paths, ctx.out_dir)
    if not all(r.passed for r in reports):
        console.print(f"[bold red]{name} suite failed[/bold red]")
        return EXIT_SUITE_FAILED
    console.print(f"[bold green]{name} suite passed[/bold green]")
    return EXIT_OK


def cmd_deviate(ctx: RunContext) -> int:
    return _run_suite(ctx, "deviation", run_deviation_suite, 10)


def cmd_symmetrize(ctx: RunContext) -> int:
    return _run_suite(ctx, "symmetrization", run_symmetrization_suite, 5)


def cmd_experiment(ctx: RunContext, seed_flag: Optional[int]) -> int:
    doc = dict(ctx.document)
    doc.setdefault("seed", ctx.seed)
    experiment = ExperimentConfig.from_dict(doc)
    if seed_flag is not None:
        experiment = dataclasses.replace(experiment, seed=seed_flag)
    vlog_json("Experiment", experiment.to_dict())

    total_steps = 2
    display_step(1, total_steps, "RUNNING CONVERGENCE EXPERIMENT", "in_progress")
    done: List[int] = []
    with (
        console.status("  [dim]Starting repeats...[/dim]", spinner="dots") as status,
        vtimer("Convergence experiment"),
    ):

        def progress(repeat: int):
            done.append(repeat)
            status.update(f"  [dim]Repeat {len(done)}/{experiment.repeats} finished[/dim]")

        curve = run_convergence_experiment(experiment, ctx.threads, progress)
    display_step(1, total_steps, "RUNNING CONVERGENCE EXPERIMENT", "success", update=True)

    display_step(2, total_steps, "WRITING REPORTS", "in_progress")
    paths = emit_report(curve, ctx.out_dir, ctx.fmt)
    display_step(2, total_steps, "WRITING REPORTS", "success", update=True)
    display_curve(curve)
    display_findings(analyze_curve(curve))
    display_files(paths, ctx.out_dir)
    return EXIT_OK


def cmd_analyze(ctx: RunContext) -> int:
    curve = read_curve_csv(ctx.path(ctx.require("curve")))
    findings = analyze_curve(curve, int(ctx.document.get("n_target_fit", 100)))
    display_curve(curve)
    display_findings(findings)
    paths = [write_json(ctx.out_dir / "findings.json", findings.to_dict(), kind="findings")]
    display_files(paths, ctx.out_dir)
    return EXIT_OK


COMMANDS = {
    "synthesize": "Draw a dataset from a domain spec",
    "erm": "Fit weighted least squares on target and source datasets",
    "divergence": "Compute an IPM, discrepancy or HΔH-divergence over a finite class",
    "complexity": "Estimate the uniform entropy number or Rademacher complexity",
    "bound": "Evaluate generalization bounds from a bound input document",
    "deviate": "Validate the deviation inequalities by Monte Carlo",
    "symmetrize": "Validate the symmetrization inequality by Monte Carlo",
    "experiment": "Run the weighted least-squares convergence experiment",
    "analyze": "Summarize a convergence curve CSV",
}


BOUND_INPUT_KEYS = (
    "sizes",
    "tau",
    "w",
    "confidence",
    "range",
    "divergence",
    "ln_uen",
    "uen_radius",
    "rademacher_sources",
    "rademacher_target",
    "eta",
    "c1",
    "c2",
    "x",
)

# experiment documents are checked by ExperimentConfig.from_dict
DOCUMENT_KEYS: Dict[str, Tuple[str, ...]] = {
    "synthesize": ("spec", "n", "domain", "replicate"),
    "erm": ("target", "sources", "tau", "w", "ridge", "fit_intercept"),
    "divergence": ("class", "kind", "source", "sources", "target", "w"),
    "complexity": (
        "class",
        "kind",
        "target",
        "sources",
        "sizes",
        "tau",
        "w",
        "radius",
        "exact",
        "enumerate",
        "redraws",
        "n",
        "data_trials",
        "sigma_trials",
    ),
    "bound": (*BOUND_INPUT_KEYS, "kind", "xi", "space", "allow_out_of_range"),
    "deviate": ("instances", "trials"),
    "symmetrize": ("instances", "trials"),
    "analyze": ("curve", "n_target_fit"),
}


def check_document_keys(command: str, document: Dict[str, Any]):
    allowed = DOCUMENT_KEYS.get(command)
    if allowed is None:
        return
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ConfigError(
            f"Unknown key(s) for {command}: {', '.join(unknown)} (known: {', '.join(allowed)})"
        )


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON instance document for the subcommand")
    common.add_argument("--seed", type=int, help=f"Master seed (default {config.SEED})")
    common.add_argument("--threads", type=int, help=f"Worker threads (default {config.THREADS})")
    common.add_argument("--out", type=Path, help=f"Output directory (default {config.OUT_DIR})")
    common.add_argument("--format", choices=config.FORMATS, help="Report format")
    common.add_argument("--verbose", "-v", action="store_true", help="Verbose logging")

    parser = argparse.ArgumentParser(
        prog="repda",
        description="Representative domain adaptation: bounds, estimators and experiments.",
        epilog=(
            f"Settings file: {CONFIG_FILE}. Priority: environment / .env > config file > default."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)
    for name, help_text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def _context(args: argparse.Namespace) -> RunContext:
    document: Dict[str, Any] = {}
    base = Path.cwd()
    if args.config is not None:
        document = load_document(args.config)
        base = args.config.resolve().parent
    threads = args.threads if args.threads is not None else config.THREADS
    if threads < 1:
        raise ValidationError(f"--threads must be >= 1, got {threads}")
    return RunContext(
        seed=args.seed if args.seed is not None else config.SEED,
        threads=threads,
        out_dir=args.out if args.out is not None else config.OUT_DIR,
        fmt=args.format or config.FORMAT,
        document=document,
        base=base,
    )


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one subcommand; returns the process exit code."""
    args = build_parser().parse_args(argv)
    if args.verbose:
        config.VERBOSE = True
    setup_logging()

    try:
        ctx = _context(args)
        display_logo()
        display_config_panel(
            {
                "Command": args.command,
                "Seed": ctx.seed,
                "Threads": ctx.threads,
                "Output": ctx.out_dir,
                "Format": ctx.fmt,
                "Instance": args.config,
            }
        )
        vlog(f"Instance document keys: {sorted(ctx.document)}")
        check_document_keys(args.command, ctx.document)
        if args.command == "experiment":
            return cmd_experiment(ctx, args.seed)
        handler = globals()[f"cmd_{args.command}"]
        return handler(ctx)
    except RepdaError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        return EXIT_ERROR


def main():
    """Synchronous entry point for CLI."""
    sys.exit(run())
