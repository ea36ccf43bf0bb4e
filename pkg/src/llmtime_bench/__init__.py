"""Forecasting workbench: a CSS-fitted ARIMA baseline and an LLMTIME-style
digit-serialisation pipeline, with synthetic signals and a benchmark runner."""

__version__ = "0.1.0"
