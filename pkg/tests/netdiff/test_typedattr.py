from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pytest
from attrs import Factory, define

from netdiff._typedattr import NamedTupleMixin, attrs_from_dict, definenumpy, text_conversions


@define
class Record(NamedTupleMixin):
    index: int
    fdp: float
    rejected: bool = False


@define
class Design:
    family: str
    n1: int
    params: Dict[str, float] = Factory(dict)
    seed: Optional[int] = None
    out: Optional[Path] = None
    sizes: Tuple[int, ...] = ()
    label: Union[int, str] = 0


@define
class Study:
    design: Design
    records: List[Record] = Factory(list)


@pytest.mark.parametrize(
    "input_dict, expected",
    [
        pytest.param(
            {"family": "poisson", "n1": 10},
            Design("poisson", 10),
            id="defaults",
        ),
        pytest.param(
            {"family": "poisson", "n1": 10, "params": {"low": 1}, "seed": 3},
            Design("poisson", 10, params={"low": 1.0}, seed=3),
            id="int_to_float",
        ),
        pytest.param(
            {"family": "poisson", "n1": 10, "out": "results/a", "sizes": [1, 2]},
            Design("poisson", 10, out=Path("results/a"), sizes=(1, 2)),
            id="str_to_path_and_tuple",
        ),
        pytest.param(
            {"family": "poisson", "n1": 10, "label": "first"},
            Design("poisson", 10, label="first"),
            id="union",
        ),
    ],
)
def test_attrs_from_dict(input_dict, expected):
    assert attrs_from_dict(Design, input_dict) == expected


@pytest.mark.parametrize(
    "input_dict",
    [
        pytest.param({"family": "poisson", "n1": "10"}, id="str_for_int"),
        pytest.param({"family": "poisson", "n1": 10, "nodes": 5}, id="unknown_key"),
        pytest.param({"family": "poisson", "n1": 10, "params": [1.0]}, id="list_for_dict"),
        pytest.param({"family": "poisson", "n1": 10, "sizes": 3}, id="int_for_tuple"),
    ],
)
def test_attrs_from_dict_errors(input_dict):
    with pytest.raises(TypeError):
        attrs_from_dict(Design, input_dict)


def test_nonstrict_keeps_values():
    design = attrs_from_dict(Design, {"family": "poisson", "n1": "10", "nodes": 5}, strict=False)
    assert design.n1 == "10"


def test_nested_classes():
    study = attrs_from_dict(
        Study,
        {
            "design": {"family": "bernoulli", "n1": 25},
            "records": [{"index": 0, "fdp": 0}, {"index": 1, "fdp": 0.5, "rejected": True}],
        },
    )
    assert study.design == Design("bernoulli", 25)
    assert study.records == [Record(0, 0.0), Record(1, 0.5, True)]


@pytest.mark.parametrize(
    "text, expected",
    [
        pytest.param("true", True, id="true"),
        pytest.param("0", False, id="zero"),
        pytest.param("Yes", True, id="yes"),
    ],
)
def test_text_conversions(text, expected):
    record = attrs_from_dict(
        Record, {"index": "4", "fdp": "0.25", "rejected": text}, conversions=text_conversions
    )
    assert record == Record(4, 0.25, expected)


def test_text_conversions_bad_bool():
    with pytest.raises(TypeError):
        attrs_from_dict(
            Record, {"index": "4", "fdp": "1", "rejected": "maybe"}, conversions=text_conversions
        )


def test_named_tuple_mixin():
    record = Record(3, 0.5, True)
    index, fdp, rejected = record
    assert (index, fdp, rejected) == (3, 0.5, True)
    assert record[1] == 0.5
    assert record[:2] == (3, 0.5)
    assert len(record) == 3


@definenumpy
class Links:
    values: np.ndarray
    name: str = "links"


@definenumpy(True)
class FrozenLinks:
    values: np.ndarray


def test_definenumpy():
    assert Links(np.arange(3.0)) == Links(np.arange(3.0))
    assert Links(np.arange(3.0)) != Links(np.arange(3.0), name="other")
    assert Links(np.arange(3.0)) != Links(np.arange(3))
    frozen = FrozenLinks(np.zeros(2))
    assert frozen == FrozenLinks(np.zeros(2))
    with pytest.raises(AttributeError):
        frozen.values = np.ones(2)
