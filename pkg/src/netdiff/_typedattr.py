from __future__ import annotations

import logging
from functools import partial
from inspect import isclass
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Optional,
    Tuple,
    Type,
    Union,
    get_args,
    get_origin,
    get_type_hints,
)

import attrs
from attr import has, AttrsInstance
from attrs import define, fields, fields_dict

from .objects import check_object_equality, AttrsClass

try:
    from types import UnionType
except ImportError:
    UnionType = None

logger = logging.getLogger(__name__)

# conversions applied instead of raising errors when the value type does not match the annotation
# syntax: ((source_type1, source_type2, ...), target_type, conversion_function)
# if conversion_function is none, use target_type as conversion function
conversion_type = List[Tuple[Tuple[Type, ...], Type, Optional[Callable]]]
default_conversions: conversion_type = [
    ((str,), Path, None),
    ((int,), float, None),
    ((Path,), str, Path.as_posix),
]


def _parse_bool_text(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise TypeError(f"Cannot interpret '{value}' as bool")


# for values read back from text files (tsv cells), where every leaf arrives as str
text_conversions: conversion_type = default_conversions + [
    ((str,), bool, _parse_bool_text),
    ((str,), int, int),
    ((str,), float, float),
]


def definenumpy(maybe_cls: Union[bool, Type] = False, **kwargs):
    """
    @attrs.define decorator with an equality check that understands numpy arrays.

    Use @definenumpy for mutable or @definenumpy(True) for frozen classes.
    """
    if isclass(maybe_cls):
        # decorator was used without brackets: call it one more time with brackets
        return definenumpy()(maybe_cls)

    frozen = maybe_cls

    def wrap(cls):
        attrs_cls = define(frozen=frozen, eq=False, **kwargs)(cls)
        attrs_cls.__eq__ = check_object_equality
        return attrs_cls

    return wrap


class NamedTupleMixin:
    """
    Make an attrs class behave more like a named tuple.

    Example:

    @define
    class ReplicationRecord(NamedTupleMixin):
        fdp: float
        power: float
    """

    def __iter__(self):
        return (getattr(self, att.name) for att in fields(type(self)))

    def __getitem__(self, index_or_slice: int):
        return tuple(self)[index_or_slice]

    def __len__(self) -> int:
        return len(fields(type(self)))


def attrs_from_dict(
    cls: AttrsClass,
    input_dict: Dict[str, Any],
    strict: bool = True,
    conversions: Optional[conversion_type] = None,
) -> AttrsInstance:
    """
    Create a typechecked attrs instance from a (nested) dictionary.

    Args:
        cls: class decorated with @attrs.define
        input_dict: data source, e.g. the content of a yaml config file
        strict: whether to typecheck and convert. In strict mode unknown keys raise a TypeError,
            unless the class sets _allow_extra_keys = True.
        conversions: custom conversions, e.g. if target is annotated as Path and value
            is given as str, then convert to Path instead of raising a TypeError.
            default converts int to float and str to Path.
            pass empty list to disable all conversions.

    Returns:
        Instance of cls with values from input_dict
    """
    return _attrs_from_dict(
        cls,
        input_dict,
        strict=strict,
        conversions=default_conversions if conversions is None else conversions,
        more_error_info=f"Parsing class {cls.__name__} from input {input_dict}",
        current_position=[],
    )


def _attrs_from_dict(
    cls: AttrsClass,
    input_dict: Any,
    strict: bool,
    conversions: conversion_type,
    more_error_info: str,
    current_position: List[str],
):
    if has(type(input_dict)):
        input_dict = {k: getattr(input_dict, k) for k in fields_dict(type(input_dict))}
    if not isinstance(input_dict, dict):
        raise TypeError(
            f"Expected a dictionary or attrs instance, got type '{type(input_dict)}' "
            f"value '{input_dict}' at position '{'.'.join(current_position)}' (root "
            f"if empty).\n\nError context: {more_error_info}."
        )

    # check whether input and class match
    all_atts = fields(cls)
    all_att_names = set(att.name for att in all_atts)
    matching_input = {k: v for k, v in input_dict.items() if k in all_att_names}
    nonmatching_input = sorted(k for k in input_dict if k not in all_att_names)
    if nonmatching_input and strict and not getattr(cls, "_allow_extra_keys", False):
        raise TypeError(
            f"Keys in input {nonmatching_input} not defined "
            f"for class {cls.__name__} with attributes {sorted(all_att_names)}"
        )

    # typecheck and unfold nested values before creating the instance,
    # so that attrs validators only ever see converted values
    type_hints = get_type_hints(cls)
    parsed_input = {}
    for name, value in matching_input.items():
        parsed_input[name] = _parse_nested(
            name,
            value,
            type_hints.get(name),
            strict=strict,
            conversions=conversions,
            more_error_info=more_error_info,
            current_position=current_position + [name],
        )

    # split into positional and keyword arguments
    in_args, in_kwargs = [], {}
    for att in all_atts:
        if att.name not in parsed_input:
            continue
        try:
            is_positional = bool(att.default == attrs.NOTHING) and not att.kw_only
        except ValueError:
            # some field defaults, e.g. numpy arrays do not have comparison defined here
            # but that means that the default is set and the field is not positional
            is_positional = False
        if is_positional:
            in_args.append(parsed_input[att.name])
        else:
            in_kwargs[att.name if att.alias is None else att.alias] = parsed_input[att.name]

    try:
        return cls(*in_args, **in_kwargs)  # noqa
    except TypeError as e:
        raise TypeError(
            f"Failed creating instance of {cls.__name__} with args {in_args} and kwargs "
            f"{in_kwargs}. Error occurred at: {'.'.join(current_position)}. {e}"
            f"\n\nError context: {more_error_info}."
        ) from e


def _parse_nested(
    name: str,
    value: Any,
    typ: Any,
    strict: bool,
    conversions: conversion_type,
    more_error_info: str,
    current_position: List[str],
):
    parse_recursive = partial(
        _parse_nested,
        conversions=conversions,
        more_error_info=more_error_info,
        current_position=current_position,
    )
    origin = get_origin(typ)
    args = get_args(typ)

    target_type_name = typ.__name__ if hasattr(typ, "__name__") else str(typ)
    err_msg = (
        f"Could not parse {name}={value} (type {type(value).__name__}) as type "
        f"{target_type_name} with strict={strict}"
    )

    def maybe_raise_typeerror(full_err_msg):
        if strict:
            raise TypeError(full_err_msg)
        logger.debug(f"Caught: {full_err_msg}. Returning as is.")
        return value

    # resolve nested attrclass
    if has(typ):
        return _attrs_from_dict(
            typ,
            value,
            strict=strict,
            conversions=conversions,
            more_error_info=more_error_info,
            current_position=current_position,
        )

    if typ is None or typ is Any:
        if strict and typ is None:
            raise TypeError(f"Untyped fields not allowed in strict mode. {err_msg}")
        return value

    # resolve unions (mostly "optional")
    if origin == Union or (UnionType is not None and isinstance(typ, UnionType)):
        collected_errors = []
        for new_typ in args:
            try:
                # force strict parsing and catch errors to try all different types
                return parse_recursive(name, value, new_typ, strict=True)
            except TypeError as e:
                collected_errors.append(f"{e}")
        collected_error_str = "\n".join(collected_errors)
        return maybe_raise_typeerror(
            f"No type in Union matches. Errors per type:\n{collected_error_str}\n"
            f"Final error: {err_msg}"
        )

    if typ is type(None):
        if value is None:
            return value
        return maybe_raise_typeerror(f"{err_msg}. Expect None.")

    if origin is dict:
        if not isinstance(value, dict):
            return maybe_raise_typeerror(f"{err_msg}. Expect a mapping, got {type(value)}")
        key_type, value_type = args if args else (Any, Any)
        return {
            parse_recursive(f"{name}/dict_key_type", k, key_type, strict=strict): parse_recursive(
                f"{name}/{k}", v, value_type, strict=strict
            )
            for k, v in value.items()
        }

    if origin in (list, tuple):
        if not isinstance(value, (list, tuple)):
            return maybe_raise_typeerror(f"{err_msg}. Expect a sequence, got {type(value)}")
        if origin is tuple and not (len(args) == 2 and args[1] is Ellipsis):
            if len(value) != len(args):
                return maybe_raise_typeerror(
                    f"{err_msg}. Expect a sequence with length {len(args)}, got length {len(value)}"
                )
            return tuple(
                parse_recursive(name, item, item_type, strict=strict)
                for item, item_type in zip(value, args)
            )
        item_type = args[0] if args else Any
        items = [parse_recursive(name, item, item_type, strict=strict) for item in value]
        return origin(items)

    # regular type (float, str, ...): no further inspection
    if isclass(typ) and isinstance(value, typ):
        return value

    # explicit conversions
    for convert_source, convert_target, convert_callable in conversions:
        if not isclass(typ):
            continue
        if issubclass(typ, convert_target) and isinstance(value, convert_source):
            if convert_callable is None:
                convert_callable = convert_target
            try:
                return convert_callable(value)
            except (TypeError, ValueError) as e:
                return maybe_raise_typeerror(f"{err_msg}. Conversion failed: {e}")

    return maybe_raise_typeerror(f"{err_msg}. Wrong type or type not supported.")
