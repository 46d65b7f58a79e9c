"""
Generic utilities for nested python objects: comparison, flattening and inversion.
"""

from __future__ import annotations

import math
from abc import ABCMeta, abstractmethod
from typing import Any, Dict, List, Type

import numpy as np
from attr import has, AttrsInstance
from attrs import fields

AttrsClass = Type[AttrsInstance]


def get_attr_names(cls: AttrsClass) -> List[str]:
    """Get all attribute names of an attrs class."""
    return [att.name for att in fields(cls)]  # noqa


def is_standard_mapping(d: Any) -> bool:
    return isinstance(d, (dict,))


def is_standard_iterable(d: Any) -> bool:
    return isinstance(d, (list, tuple, set, frozenset))


class RecursorInterface(metaclass=ABCMeta):
    @abstractmethod
    def is_iterable_fn(self, d: Any) -> bool:
        pass

    @abstractmethod
    def is_mapping_fn(self, d: Any) -> bool:
        pass


class StrictRecursor(RecursorInterface):
    """Recurses only into standard iterables and mappings"""

    def is_iterable_fn(self, d: Any) -> bool:
        return is_standard_iterable(d)

    def is_mapping_fn(self, d: Any) -> bool:
        return is_standard_mapping(d)


def flatten_dict(
    d: Dict[str, Any],
    separator_for_dict: str = "/",
    recursor_class: Type[RecursorInterface] = StrictRecursor,
) -> Dict[str, Any]:
    """
    Flatten a nested dict by joining nested keys with a separator. Lists are kept as leaves.

    Args:
        d: dict to flatten
        separator_for_dict: separator to use for nested dict keys
        recursor_class: which recursor to use for mapping checks

    Examples:
        >>> flatten_dict({'family': 'bernoulli', 'family_params': {'low': 0.5}})
        {'family': 'bernoulli', 'family_params/low': 0.5}

    Returns:
        Flat dict.
    """
    recursor = recursor_class()

    def _flatten_leaf(d_inner, prefix):
        if not recursor.is_mapping_fn(d_inner):
            return [(prefix, d_inner)]
        items_inner = []
        for k_inner, v_inner in d_inner.items():
            k_inner_str = str(k_inner)
            assert separator_for_dict not in k_inner_str, (
                f"Separator '{separator_for_dict}' not allowed in key '{k_inner_str}' "
                f"when flattening dict."
            )
            items_inner.extend(
                _flatten_leaf(v_inner, prefix=f"{prefix}{separator_for_dict}{k_inner_str}")
            )
        return items_inner

    items = []
    for k, v in d.items():
        items.extend(_flatten_leaf(v, prefix=f"{k}"))
    return dict(items)


def unflatten_dict(flat: Dict[str, Any], separator_for_dict: str = "/") -> Dict[str, Any]:
    """
    Inverse of flatten_dict.

    Examples:
        >>> unflatten_dict({'family': 'bernoulli', 'family_params/low': 0.5})
        {'family': 'bernoulli', 'family_params': {'low': 0.5}}
    """
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        *parents, leaf = key.split(separator_for_dict)
        node = nested
        for parent in parents:
            node = node.setdefault(parent, {})
            if not isinstance(node, dict):
                raise KeyError(f"Key '{key}' collides with a leaf at '{parent}'")
        node[leaf] = value
    return nested


def invert_list_of_dict(list_of_dict: List[Dict[str, Any]]) -> Dict[str, List[Any]]:
    """
    Invert a list of dictionaries, i.e. turn records into columns.

    Args:
        list_of_dict: list of {field1: value1, field2: value2, ...}

    Returns:
        Dictionary of {field1: [value1, value2, ...], ...}
    """
    dict_of_list: Dict[str, List[Any]] = {}
    for value_dict in list_of_dict:
        for field, value in value_dict.items():
            dict_of_list.setdefault(field, []).append(value)
    return dict_of_list


def compare_nested_objects(
    d1_outer: Any,
    d2_outer: Any,
    recursor_class: Type[RecursorInterface] = StrictRecursor,
    exact: bool = True,
    rtol: float = 1.0e-5,
    atol: float = 1.0e-8,
) -> List[str]:
    """
    Compare two nested objects (dicts, lists, attrs instances, numpy arrays) and return a list of
    str describing all differences. NaN compares equal to NaN.

    Args:
        d1_outer: object 1
        d2_outer: object 2
        recursor_class: recursor definition to find nested content
        exact: compare numbers and arrays bit for bit instead of with a tolerance
        rtol: see numpy.allclose, only used if exact is False
        atol: see numpy.allclose, only used if exact is False

    Returns:
        List of strings describing the differences between the two objects.
        Empty list means the objects are identical.
    """
    recursor = recursor_class()

    def _compare_nested_objects(d1, d2, prefix=""):
        if type(d1) != type(d2):  # noqa  # pylint: disable=unidiomatic-typecheck
            return [f"{prefix} Type mismatch: {type(d1)} != {type(d2)}"]

        if isinstance(d1, str):
            return [] if d1 == d2 else [f"{prefix} {d1} != {d2}"]

        if recursor.is_mapping_fn(d1):
            all_errors = []
            for k, v in d1.items():
                if k not in d2:
                    all_errors.append(f"{prefix} Key {k} missing in second dict")
                    continue
                all_errors.extend(_compare_nested_objects(v, d2[k], prefix=f"{prefix}.{k}"))
            for k in d2.keys():
                if k not in d1:
                    all_errors.append(f"{prefix} Key {k} missing in first dict")
            return all_errors

        if recursor.is_iterable_fn(d1):
            if len(d1) != len(d2):
                return [f"{prefix} Length mismatch: {len(d1)} != {len(d2)}"]
            all_errors = []
            for i, (v1, v2) in enumerate(zip(d1, d2)):
                all_errors.extend(_compare_nested_objects(v1, v2, prefix=f"{prefix}[{i}]"))
            return all_errors

        if has(type(d1)):
            all_errors = []
            for att in fields(type(d1)):
                if not att.eq:
                    continue
                all_errors.extend(
                    _compare_nested_objects(
                        getattr(d1, att.name), getattr(d2, att.name), prefix=f"{prefix}.{att.name}"
                    )
                )
            return all_errors

        return _compare_leaf(d1, d2, exact=exact, rtol=rtol, atol=atol, prefix=prefix)

    return _compare_nested_objects(d1_outer, d2_outer)


def _compare_leaf(d1: Any, d2: Any, exact=True, rtol=1.0e-5, atol=1.0e-8, prefix="") -> List[str]:
    # at this point the 2 leaves are guaranteed to be the same type
    if isinstance(d1, np.ndarray):
        if d1.shape != d2.shape or d1.dtype != d2.dtype:
            return [f"{prefix} Array mismatch: {big_obj_to_short_str(d1)} {d1.dtype} != "
                    f"{big_obj_to_short_str(d2)} {d2.dtype}"]
        if exact:
            comp = np.array_equal(d1, d2, equal_nan=d1.dtype.kind == "f")
        else:
            comp = np.allclose(d1, d2, rtol=rtol, atol=atol, equal_nan=True)
    elif isinstance(d1, float):
        if math.isnan(d1) or math.isnan(d2):
            comp = math.isnan(d1) and math.isnan(d2)
        else:
            comp = d1 == d2 if exact else math.isclose(d1, d2, rel_tol=rtol, abs_tol=atol)
    else:
        comp = d1 == d2
    if not comp:
        return [f"{prefix} {d1} != {d2}"]
    return []


def check_object_equality(
    d1: Any, d2: Any, recursor_class: Type[RecursorInterface] = StrictRecursor
) -> bool:
    """
    Compare two nested objects exactly and return equality as boolean.
    """
    return len(compare_nested_objects(d1, d2, recursor_class)) == 0


def big_obj_to_short_str(d: Any) -> str:
    """
    Args:
        d: any big object e.g. a dict or a numpy array

    Returns:
        A hopefully short and representative string representation of the object.
    """
    if d is None:
        return str(None)
    class_name = type(d).__name__
    if hasattr(d, "shape"):
        return f"{class_name} shape {d.shape}"
    try:
        return f"{class_name} len {len(d)}"
    except TypeError:
        return f"Object of type {class_name}"
