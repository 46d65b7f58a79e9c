import argparse
import shutil


class CustomArgparseFmt(argparse.RawDescriptionHelpFormatter):
    """
    Help formatter for the netdiff command line.

    Usage:
        parser = argparse.ArgumentParser(description=__doc__, formatter_class=CustomArgparseFmt)

    Format changes:
        No removal of newlines from descriptions
        Show default values and choices for every option, also when no help text is given
        Metavars are the type names (float, int, Path) or the choices
        Wider default max_help_position
    """

    def __init__(self, prog, indent_increment=2, max_help_position=None, width=None):
        if width is None:
            width = min(shutil.get_terminal_size().columns - 2, 120)
        if max_help_position is None:
            max_help_position = min(width // 2, 40)
        super().__init__(
            prog,
            indent_increment=indent_increment,
            max_help_position=max_help_position,
            width=width,
        )

    def _get_help_string(self, action):
        help_str = action.help or ""
        if action.help == argparse.SUPPRESS:
            help_str = ""
        if "%(default)" in help_str or action.default is argparse.SUPPRESS:
            return help_str
        if action.default is None or isinstance(action.default, bool):
            return help_str
        if action.option_strings or action.nargs in (argparse.OPTIONAL, argparse.ZERO_OR_MORE):
            help_str = f"{help_str} (default: %(default)s)".strip()
        return help_str

    def _metavar_from_type(self, action):
        if action.choices is not None:
            return "{" + ",".join(str(choice) for choice in action.choices) + "}"
        try:
            return action.type.__name__
        except AttributeError:
            return "str"

    def _get_default_metavar_for_optional(self, action):
        return self._metavar_from_type(action)

    def _get_default_metavar_for_positional(self, action):
        return self._metavar_from_type(action)
