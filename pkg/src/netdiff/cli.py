"""
Two-sample tests for populations of networks.

Subcommands:
    simulate             Monte Carlo study over a grid of scenarios, sample sizes and sparsities
    test-global          global max-type test on two stacks of observed networks
    test-links           link-level test with estimated-FDP thresholding
    test-links-enhanced  link-level test with auxiliary-statistic weighting
    convert              convert a stack between csv-stack and binary-stack

Every subcommand accepts --config FILE with yaml values for its options, flags take precedence.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from attr import define

from ._typedparser import ConfigFileArgs, TypedCommandParser, VerboseQuietArgs, add_argument
from .errors import EXIT_OK, NetdiffInputError, exit_code_for
from .harness import METHODS, REPORT_FORMATS, analyze_real_data, emit_report, run_replications
from .netdata import STACK_FORMATS, TRANSFORMS, load_stack, write_stack
from .power_gap import GapConfig
from .simgen import FAMILIES, FAMILY_DEFAULTS, ScenarioSpec, fraction_to_kq

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class KeyValueAction(argparse.Action):
    """Collect repeated KEY=VALUE options into a dict of floats."""

    def __call__(self, parser, namespace, values, option_string=None):
        key, sep, value = values.partition("=")
        if not sep or not key:
            parser.error(f"{option_string} expects KEY=VALUE, got '{values}'")
        try:
            number = float(value)
        except ValueError:
            parser.error(f"{option_string} expects a number after '=', got '{value}'")
        items = dict(getattr(namespace, self.dest) or {})
        items[key] = number
        setattr(namespace, self.dest, items)


@define(slots=False)
class GapArgs:
    k_groups: int = add_argument(type=int, default=3, help="Number of auxiliary groups K")
    storey_lambda: float = add_argument(
        type=float, default=0.5, help="p-value threshold of the per-group alternative proportion"
    )
    epsilon: float = add_argument(
        type=float, default=1e-5, help="Clamp of the per-group alternative proportion"
    )
    n_grid: Optional[int] = add_argument(
        type=int, help="Grid points per sqrt(log q), default gives a spacing of about 0.1"
    )
    c1: Optional[float] = add_argument(type=float, help="Lower grid bound in sqrt(log q) units")
    c2: Optional[float] = add_argument(type=float, help="Upper grid bound in sqrt(log q) units")

    def gap_config(self, alpha: float) -> GapConfig:
        return GapConfig(
            k_groups=self.k_groups,
            c1=self.c1,
            c2=self.c2,
            n_grid=self.n_grid,
            epsilon=self.epsilon,
            storey_lambda=self.storey_lambda,
            alpha=alpha,
        )


@define(slots=False)
class SimulateArgs(VerboseQuietArgs, ConfigFileArgs, GapArgs):
    families: List[str] = add_argument(
        nargs="+", choices=FAMILIES, default=["bernoulli"], help="Data distributions"
    )
    sample_sizes: List[int] = add_argument(
        nargs="+", type=int, default=[100], help="Samples per group, n1 = n2"
    )
    kq_fractions: List[float] = add_argument(
        nargs="+", type=float, default=[0.2, 0.15, 0.1], help="Sparsity k_q as a fraction of q"
    )
    methods: List[str] = add_argument(
        nargs="+", choices=METHODS, default=["baseline", "enhanced"], help="Testing procedures"
    )
    p: int = add_argument(type=int, default=68, help="Number of nodes")
    alpha: float = add_argument(type=float, default=0.05, help="Level of every test")
    reps: int = add_argument(type=int, default=100, help="Replications per scenario")
    seed: Optional[int] = add_argument(type=int, help="Master seed, required")
    family_params: Optional[Dict[str, float]] = add_argument(
        "--family-param",
        dest="family_params",
        action=KeyValueAction,
        metavar="KEY=VALUE",
        help="Override a family parameter, repeatable",
    )
    workers: int = add_argument(type=int, default=1, help="Parallel processes")
    format: str = add_argument(choices=REPORT_FORMATS, default="table", help="Report format")
    out: Optional[Path] = add_argument(type=Path, help="Report file, stdout if not given")


@define(slots=False)
class RealDataArgs(VerboseQuietArgs, ConfigFileArgs):
    group1: Path = add_argument(positional=True, type=Path, help="Stack of group 1")
    group2: Path = add_argument(positional=True, type=Path, help="Stack of group 2")
    stack_format: Optional[str] = add_argument(
        choices=STACK_FORMATS, help="Format of both stacks, inferred from the file if not given"
    )
    alpha: float = add_argument(type=float, default=0.05, help="Level of the test")
    transform: str = add_argument(
        choices=TRANSFORMS, default="none", help="Entrywise transform applied before testing"
    )
    out: Path = add_argument(type=Path, default=Path("netdiff_out"), help="Output directory")


@define(slots=False)
class EnhancedArgs(RealDataArgs, GapArgs):
    pass


@define(slots=False)
class ConvertArgs(VerboseQuietArgs, ConfigFileArgs):
    source: Path = add_argument(positional=True, type=Path, help="Input stack")
    target: Path = add_argument(positional=True, type=Path, help="Output stack")
    to_format: str = add_argument(
        choices=STACK_FORMATS, default="binary-stack", help="Format of the output"
    )
    from_format: Optional[str] = add_argument(
        choices=STACK_FORMATS, help="Format of the input, inferred if not given"
    )


def _family_params_for(family: str, overrides: Dict[str, float]) -> Dict[str, float]:
    return {key: value for key, value in overrides.items() if key in FAMILY_DEFAULTS[family]}


def run_simulate(args: SimulateArgs) -> int:
    if args.seed is None:
        raise NetdiffInputError("simulate needs a master seed: pass --seed or set seed in --config")
    overrides = args.family_params or {}
    unused = sorted(
        key for key in overrides if not any(key in FAMILY_DEFAULTS[f] for f in args.families)
    )
    if unused:
        raise NetdiffInputError(f"Family parameters {unused} do not apply to {args.families}")
    gap_config = args.gap_config(args.alpha)
    reports = []
    for family in args.families:
        for n in args.sample_sizes:
            for fraction in args.kq_fractions:
                spec = ScenarioSpec(
                    family,
                    n,
                    n,
                    fraction_to_kq(fraction, args.p),
                    p=args.p,
                    family_params=_family_params_for(family, overrides),
                    seed=args.seed,
                )
                for method in args.methods:
                    reports.append(
                        run_replications(
                            spec,
                            method,
                            alpha=args.alpha,
                            reps=args.reps,
                            gap_config=gap_config,
                            workers=args.workers,
                        )
                    )
    text = emit_report(reports, args.out, args.format)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def _run_real_data(args: RealDataArgs, method: str, gap_config: Optional[GapConfig]) -> int:
    result = analyze_real_data(
        args.group1,
        args.group2,
        method=method,
        alpha=args.alpha,
        config=gap_config,
        transform=args.transform,
        out_dir=args.out,
        stack_format=args.stack_format,
    )
    glob = result.global_result
    print(
        f"global: M_n={glob.m_n:.4f} threshold={glob.threshold:.4f} p={glob.pvalue:.4g} "
        f"reject={glob.reject}"
    )
    if result.link_result is not None:
        print(f"{method}: {result.link_result.n_rejections} of {result.statistics.q} links rejected")
    if result.baseline_result is not None and method == "enhanced":
        print(f"baseline: {result.baseline_result.n_rejections} links rejected")
    return EXIT_OK


def run_test_global(args: RealDataArgs) -> int:
    return _run_real_data(args, "global", None)


def run_test_links(args: RealDataArgs) -> int:
    return _run_real_data(args, "baseline", None)


def run_test_links_enhanced(args: EnhancedArgs) -> int:
    return _run_real_data(args, "enhanced", args.gap_config(args.alpha))


def run_convert(args: ConvertArgs) -> int:
    stack = load_stack(args.source, args.from_format)
    write_stack(stack, args.target, args.to_format)
    logger.info(f"Wrote {args.to_format} {args.target} (p={stack.p}, n={stack.n})")
    return EXIT_OK


COMMANDS: Dict[str, Callable] = {
    "simulate": run_simulate,
    "test-global": run_test_global,
    "test-links": run_test_links,
    "test-links-enhanced": run_test_links_enhanced,
    "convert": run_convert,
}


def build_parser() -> TypedCommandParser:
    parser = TypedCommandParser.create_parser(description=__doc__, prog="netdiff")
    parser.add_command("simulate", SimulateArgs, "Monte Carlo study of the testing procedures")
    parser.add_command("test-global", RealDataArgs, "Global test of equal network means")
    parser.add_command("test-links", RealDataArgs, "Link-level test, estimated-FDP threshold")
    parser.add_command(
        "test-links-enhanced", EnhancedArgs, "Link-level test with auxiliary-statistic weights"
    )
    parser.add_command("convert", ConvertArgs, "Convert a stack between file formats")
    return parser


def setup_logging(level: int) -> None:
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging(logging.INFO)
    try:
        command, args = build_parser().parse_args(argv)
        setup_logging(args.log_level())
        return COMMANDS[command](args)
    except Exception as e:  # pylint: disable=broad-except
        code = exit_code_for(e)
        if code is None:
            raise
        logger.error(f"{type(e).__name__}: {e}")
        return code


if __name__ == "__main__":
    sys.exit(main())
