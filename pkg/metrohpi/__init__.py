#!/usr/bin/python

"""Integration, jump and contagion analysis for metropolitan house prices."""

__version__ = (0, 1)
version_string = ".".join([str(x) for x in __version__])
