import argparse
from pathlib import Path
from typing import List, Optional

import pytest
from attrs import define, fields_dict

from netdiff._typedparser import (
    ConfigFileArgs,
    TypedParser,
    VerboseQuietArgs,
    add_argument,
    config_to_defaults,
    load_yaml_config,
    parse_typed_args,
)
from netdiff.errors import NetdiffInputError

# ********** Test for TypedParser **********

testdata1 = []  # config_class,inputs,outputs,strict,expected_error
testids1 = []


@define
class StudyArgs:
    family: str = add_argument(default="bernoulli", type=str, help="Family")
    seed: Optional[int] = add_argument(type=int, help="Seed")
    quick: bool = add_argument(shortcut="-k", action="store_true", help="Few replications")
    reps: int = add_argument("reps", type=int, help="Replications")
    sizes: List[int] = add_argument("sizes", type=int, nargs="+", help="Sample sizes")


inputs1 = ("--family", "poisson", "-k", "10", "25", "100")
outputs1 = {"family": "poisson", "seed": None, "quick": True, "reps": 10, "sizes": [25, 100]}
testdata1 += [
    (StudyArgs, inputs1, outputs1, False, None),
    (StudyArgs, inputs1, outputs1, True, None),
]
testids1 += ["correct_args_nonstrict", "correct_args_strict"]


@define
class WrongDefaultArgs:
    # error: default None is not compatible with type str
    family: str = add_argument(type=str, help="Family")


testdata1 += [
    (WrongDefaultArgs, [], {"family": None}, False, None),
    (WrongDefaultArgs, [], {"family": None}, True, TypeError),
]
testids1 += ["incorrect_args_nonstrict", "incorrect_args_strict"]


@define
class UntypedArgs:
    family = add_argument(default="poisson", type=str, help="Family")


testdata1 += [
    (UntypedArgs, [], {"family": "poisson"}, False, None),
    (UntypedArgs, [], {"family": "poisson"}, True, TypeError),
]
testids1 += ["untyped_args_nonstrict", "untyped_args_strict"]


@define
class PositionalArgs:
    group1: Path = add_argument(type=Path, positional=True, help="First stack")


testdata1 += [
    (PositionalArgs, ["g1.bin"], {"group1": Path("g1.bin")}, False, None),
    (PositionalArgs, ["g1.bin"], {"group1": Path("g1.bin")}, True, None),
]
testids1 += ["positional_args_nonstrict", "positional_args_strict"]


@pytest.mark.parametrize(
    "config_class,inputs,outputs,strict,expected_error", testdata1, ids=testids1
)
def test_typedparser(config_class, inputs, outputs, strict, expected_error):
    parser = TypedParser.create_parser(config_class, strict=strict)
    if expected_error is not None:
        with pytest.raises(expected_error):
            parser.parse_args(inputs)
        return
    args = parser.parse_args(inputs)
    for key, value in outputs.items():
        assert getattr(args, key) == value


def test_field_name_becomes_flag():
    @define
    class GridArgs:
        n_grid: Optional[int] = add_argument(type=int, help="Grid points")

    parser = TypedParser.create_parser(GridArgs)
    assert parser.parse_args(["--n-grid", "12"]).n_grid == 12


def test_list_defaults_are_not_shared():
    @define
    class ListArgs:
        methods: List[str] = add_argument(nargs="+", default=["baseline"], help="Methods")

    first, second = ListArgs(), ListArgs()
    first.methods.append("enhanced")
    assert second.methods == ["baseline"]


@pytest.mark.parametrize(
    "kwargs",
    [
        pytest.param(dict(shortcut="--k"), id="long_shortcut"),
        pytest.param(dict(shortcut="k"), id="no_dash"),
    ],
)
def test_add_argument_shortcut(kwargs):
    with pytest.raises(AssertionError):
        add_argument(help="x", **kwargs)


def test_positional_with_flags():
    @define
    class BadArgs:
        stack: str = add_argument("--stack", positional=True, help="Stack")

    with pytest.raises(ValueError):
        TypedParser.create_parser(BadArgs)


def test_parse_typed_args_strict():
    args = argparse.Namespace(family="poisson", seed=None, quick=False, reps=1, sizes=[2], extra=1)
    with pytest.raises(KeyError):
        parse_typed_args(args, StudyArgs, strict=True)
    typed = parse_typed_args(args, StudyArgs, strict=False)
    assert typed.family == "poisson"


@define(slots=False)
class ConfiguredArgs(VerboseQuietArgs, ConfigFileArgs):
    alpha: float = add_argument(type=float, default=0.05, help="Level")
    methods: List[str] = add_argument(nargs="+", default=["baseline"], help="Methods")


def test_apply_config(tmp_path):
    config = tmp_path / "c.yaml"
    config.write_text("alpha: 0.1\nmethods: [enhanced]\n")
    parser = TypedParser.create_parser(ConfiguredArgs)
    parser.apply_config(config)
    args = parser.parse_args([])
    assert (args.alpha, args.methods) == (0.1, ["enhanced"])
    assert parser.parse_args(["--alpha", "0.2"]).alpha == 0.2
    assert set(fields_dict(ConfiguredArgs)) == {"verbose", "quiet", "config", "alpha", "methods"}


@pytest.mark.parametrize(
    "content",
    [
        pytest.param("alpha: [0.1\n", id="invalid_yaml"),
        pytest.param("- 0.1\n", id="not_a_mapping"),
        pytest.param("alpha: high\n", id="wrong_type"),
        pytest.param("beta: 0.1\n", id="unknown_key"),
    ],
)
def test_bad_config(tmp_path, content):
    config = tmp_path / "c.yaml"
    config.write_text(content)
    with pytest.raises(NetdiffInputError):
        config_to_defaults(ConfiguredArgs, load_yaml_config(config))


def test_empty_config(tmp_path):
    config = tmp_path / "c.yaml"
    config.write_text("")
    assert load_yaml_config(config) == {}
    assert config_to_defaults(ConfiguredArgs, {}) == {}
