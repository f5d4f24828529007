"""resadapt: context-aware mobile video resolution analysis toolkit.

Computes SI/TI video-complexity indices, ingests viewing-study logs,
reproduces the study's statistical models, trains resolution predictors,
and simulates adaptive playback for energy comparison.
"""

__version__ = "0.1.0"
