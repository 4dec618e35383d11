"""Error taxonomy, mirroring the trainer's conventions.

InputError: a value the caller chose is unusable (empty log, mismatched
seeds, bad window). FormatError: a file's content does not match its
declared shape. UsageError: the command line itself is malformed.
"""


class PlotError(Exception):
    pass


class InputError(PlotError, ValueError):
    pass


class FormatError(PlotError, ValueError):
    pass


class UsageError(PlotError, ValueError):
    pass
