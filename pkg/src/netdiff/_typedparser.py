# from __future__ import annotations  # do not use here, attrs field types are read at runtime

import argparse
import logging
import sys
from dataclasses import dataclass, field as dataclass_field
from functools import partial
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Type

import yaml
from attr import field, define, AttrsInstance
from attrs import Factory, has, fields_dict

from ._typedattr import attrs_from_dict
from .custom_format import CustomArgparseFmt
from .errors import NetdiffInputError
from .objects import AttrsClass, get_attr_names

logger = logging.getLogger(__name__)


def add_argument(
    *name_or_flags: str, shortcut: Optional[str] = None, positional: bool = False, **kwargs
):
    """
    Declare an attrs field that is also a command line argument.
    Interface matches ArgumentParser.add_argument:
    https://docs.python.org/3/library/argparse.html#argparse.ArgumentParser.add_argument

    Args:
        *name_or_flags: If not given, argument will become "--field-name" (underscores of the
            attribute name turned into dashes, stored under the attribute name).
            If given, must be either a name or a list of names, e.g. "foo" or "-f", "--foo".
        shortcut: Shortcut for the argument including leading single dash.
            Cannot be used if name_or_flags are given.
        positional: If True, will be added as a positional argument.
        **kwargs: will be passed to argparse parser.add_argument
    """
    assert "name_or_flags" not in kwargs, "Pass name_or_flags as positional arguments"
    if shortcut is not None:
        assert shortcut.startswith("-"), f"Shortcut {shortcut} must start with '-'"
        assert not shortcut.startswith("--"), f"Shortcut {shortcut} must not start with '--'"
    default = kwargs.get("default")
    action = kwargs.get("action")
    if default is None and action == "store_true":
        default = False
    elif default is None and action == "store_false":
        default = True
    if isinstance(default, list):
        # attrs must not share a mutable default between instances
        default = Factory(partial(list, default))

    return field(
        metadata={
            "name_or_flags": name_or_flags,
            "shortcut": shortcut,
            "positional": positional,
            **kwargs,
        },
        kw_only=True,
        default=default,
    )


def add_typed_args(parser: argparse.ArgumentParser, typed_args_class: AttrsClass) -> None:
    """
    Add the arguments to the parser given the types.

    Args:
        parser: the argparser
        typed_args_class: a class decorated with @attrs.define where the arguments are stored
            as fields with netdiff.add_argument().
    """
    assert isinstance(
        parser, argparse.ArgumentParser
    ), f"'{parser}' is not an argparse.ArgumentParser"
    assert has(typed_args_class), f"'{typed_args_class}' is not an attrs class. Decorate with @define"

    for field_name, att in fields_dict(typed_args_class).items():
        field_metadata = dict(att.metadata)
        name_or_flags = field_metadata.pop("name_or_flags", None)
        if name_or_flags is None:
            # this is a field that was not added using add_argument, ignore it
            continue
        shortcut = field_metadata.pop("shortcut", None)
        positional = field_metadata.pop("positional", False)
        if (shortcut is not None or positional) and len(name_or_flags) > 0:
            raise ValueError(
                f"Argument '{field_name}' invalid. With shortcut='{shortcut}' or "
                f"positional='{positional}' the argument name is inferred from the field name, "
                f"but got {name_or_flags}."
            )

        if len(name_or_flags) == 0:
            if positional:
                name_or_flags = [field_name]
            else:
                name_or_flags = [] if shortcut is None else [shortcut]
                name_or_flags.append(f"--{field_name.replace('_', '-')}")
                field_metadata.setdefault("dest", field_name)

        try:
            parser.add_argument(*name_or_flags, **field_metadata)
        except TypeError as e:
            raise TypeError(
                f"Error adding argument {field_name} to parser, maybe passed keyword argument "
                f"that is incompatible with parser.add_argument(). "
                f"Original error was {type(e).__name__}: {e}"
            ) from e


def parse_typed_args(
    args: argparse.Namespace, typed_args_class: AttrsClass, strict: bool = True
) -> AttrsInstance:
    """
    Given output arguments of argparse, create a typed instance of the args class.

    Args:
        args: output arguments from argparse
        typed_args_class: a class decorated with @attrs.define where the arguments are stored
            as fields with netdiff.add_argument().
        strict: if True, typechecker will raise errors

    Returns:
        instance of typed_args_class with the fields set by the input arguments
    """
    args_dict = vars(args)
    fields_keys = get_attr_names(typed_args_class)
    missing_args = set(args_dict.keys()) - set(fields_keys)
    if missing_args and strict:
        args_desc = {k: args_dict[k] for k in sorted(missing_args)}
        raise KeyError(
            f"Arguments received from argparse {args_desc} "
            f"are missing from argument definition '{typed_args_class.__name__}'. "
            f"Available keys in '{typed_args_class.__name__}': {fields_keys}."
        )
    kwargs = {f: args_dict[f] for f in fields_keys if f in args_dict}
    return attrs_from_dict(typed_args_class, kwargs, strict=strict)


def load_yaml_config(config_file: Path) -> Dict[str, Any]:
    """Read a yaml mapping from disk, raising NetdiffInputError on anything else."""
    try:
        with Path(config_file).open("r", encoding="utf-8") as fh:
            content = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise NetdiffInputError(f"Config file {config_file} is not valid yaml: {e}") from e
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise NetdiffInputError(
            f"Config file {config_file} must contain a mapping, got {type(content).__name__}"
        )
    return content


def config_to_defaults(typed_args_class: AttrsClass, config: Dict[str, Any]) -> Dict[str, Any]:
    """
    Typecheck a config mapping against the argument class and return it as parser defaults.
    Keys use the attribute names of the class, i.e. the flag names with dashes as underscores.
    """
    normalized = {str(k).replace("-", "_"): v for k, v in config.items()}
    try:
        typed = attrs_from_dict(typed_args_class, normalized, strict=True)
    except TypeError as e:
        raise NetdiffInputError(f"Invalid config for {typed_args_class.__name__}: {e}") from e
    return {k: getattr(typed, k) for k in normalized}


@dataclass
class TypedParser:
    parser: argparse.ArgumentParser
    typed_args_class: Any
    strict: bool = False

    def __post_init__(self):
        add_typed_args(self.parser, self.typed_args_class)

    @classmethod
    def create_parser(
        cls,
        typed_args_class: AttrsClass,
        strict: bool = True,
        description: Optional[str] = None,
        formatter_class: Type = CustomArgparseFmt,
        **kwargs,
    ):
        parser = argparse.ArgumentParser(
            description=description, formatter_class=formatter_class, **kwargs
        )
        return cls(parser, typed_args_class, strict=strict)

    def apply_config(self, config_file: Optional[Path]) -> None:
        """Use the values of a yaml config file as defaults, so explicit flags still win."""
        if config_file is None:
            return
        defaults = config_to_defaults(self.typed_args_class, load_yaml_config(config_file))
        logger.debug(f"Defaults from config {config_file}: {sorted(defaults)}")
        self.parser.set_defaults(**defaults)

    def parse_args(self, args=None, namespace=None):
        args = self.parser.parse_args(args, namespace)
        return parse_typed_args(args, self.typed_args_class, strict=self.strict)


@dataclass
class TypedCommandParser:
    """
    A parser with one TypedParser per subcommand. Every subcommand gets a --config option,
    values from the config file act as defaults for that subcommand's flags.

    The top level parser only selects the command, everything after the command name is parsed
    by the command's own TypedParser.
    """

    parser: argparse.ArgumentParser
    subparsers: Any
    commands: Dict[str, TypedParser] = dataclass_field(default_factory=dict)

    @classmethod
    def create_parser(cls, description: Optional[str] = None, prog: Optional[str] = None):
        parser = argparse.ArgumentParser(
            prog=prog, description=description, formatter_class=CustomArgparseFmt
        )
        subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
        return cls(parser, subparsers)

    def add_command(self, name: str, typed_args_class: AttrsClass, help_str: str) -> TypedParser:
        # listed in the top level help only, -h after the name goes to the command's parser
        self.subparsers.add_parser(name, help=help_str, add_help=False)
        typed_parser = TypedParser.create_parser(
            typed_args_class, strict=True, description=help_str, prog=f"{self.parser.prog} {name}"
        )
        self.commands[name] = typed_parser
        return typed_parser

    def parse_args(self, args: Optional[Sequence[str]] = None) -> Tuple[str, AttrsInstance]:
        args = list(sys.argv[1:] if args is None else args)
        namespace, _ = self.parser.parse_known_args(args)
        command = namespace.command
        command_args = args[args.index(command) + 1 :]
        typed_parser = self.commands[command]
        config_file = getattr(typed_parser.parser.parse_args(command_args), "config", None)
        typed_parser.apply_config(config_file)
        return command, typed_parser.parse_args(command_args)


@define(slots=False)  # slots false to allow multi inheritance
class VerboseQuietArgs:
    verbose: bool = add_argument(shortcut="-v", help="Debug logging", action="store_true")
    quiet: bool = add_argument(shortcut="-q", help="Only log warnings and errors", action="store_true")

    def log_level(self) -> int:
        if self.verbose:
            return logging.DEBUG
        if self.quiet:
            return logging.WARNING
        return logging.INFO


@define(slots=False)  # slots false to allow multi inheritance
class ConfigFileArgs:
    config: Optional[Path] = add_argument(
        type=Path, help="Yaml file with values for any of the options, flags take precedence"
    )
