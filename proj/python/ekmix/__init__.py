"""Multicomponent Euler-Korteweg relaxation and high-friction limits."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
