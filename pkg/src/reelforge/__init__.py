"""reelforge: generate, validate, render, and judge animated chart data reels."""

__version__ = "0.1.0"
