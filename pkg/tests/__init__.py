"""
Tests package for dfbsim.

This package contains unit tests for the simulator, the analysis toolkit
and the command-line front end.
"""
