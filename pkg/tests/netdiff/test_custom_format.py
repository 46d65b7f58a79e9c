import argparse
from pathlib import Path

from netdiff.custom_format import CustomArgparseFmt


def test_custom_argparse_fmt():
    parser = argparse.ArgumentParser(formatter_class=CustomArgparseFmt, prog="netdiff")
    parser.add_argument("--alpha", type=float, default=0.05, help="Level of the test")
    parser.add_argument("--transform", choices=["none", "log1p"], default="none", help="Transform")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")

    help_output = parser.format_help()
    assert "--alpha float" in help_output
    assert "(default: 0.05)" in help_output
    assert "{none,log1p}" in help_output
    assert "--out Path" in help_output
    assert "(default: False)" not in help_output
    assert "(default: None)" not in help_output


def test_description_keeps_newlines():
    parser = argparse.ArgumentParser(
        description="line one\n    line two", formatter_class=CustomArgparseFmt
    )
    assert "line one\n    line two" in parser.format_help()
