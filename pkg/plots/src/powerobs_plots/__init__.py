"""Figure rendering for powerobs trajectory CSV logs."""

from .render import (
    EmptyData,
    FigureSpec,
    MalformedRow,
    MissingColumn,
    PlotsError,
    build_figure,
    read_log,
    render,
)

__version__ = "0.1.0"
