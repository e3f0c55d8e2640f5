from ._adlgen import *  # noqa: F401,F403
