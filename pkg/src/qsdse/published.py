"""Bundled measurements and models calibrated on them."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from pathlib import Path

from .cli_io import parse_accuracy_csv, parse_hw_csv
from .errors import DenominatorVanishes
from .explorer import SurrogateModels
from .surrogates import fit_accuracy, fit_latency, fit_power


def data_path(name: str) -> Path:
    """Filesystem path of a bundled CSV (``table2.csv``, ``published_accuracy.csv``, ...)."""
    return Path(str(resources.files("qsdse") / "data" / name))


def fit_accuracy_robust(samples, refine=False):
    """Full rational fit, falling back to the separable form when the full one has a pole.

    Samples that cover only two bit widths (the bundled published points)
    leave the full seven-coefficient fit degenerate.
    """
    try:
        return fit_accuracy(samples, refine=refine, form="full")
    except DenominatorVanishes:
        return fit_accuracy(samples, form="separable")


@lru_cache(maxsize=1)
def published_models() -> SurrogateModels:
    acc, _ = fit_accuracy_robust(parse_accuracy_csv(data_path("published_accuracy.csv")))
    hw = parse_hw_csv(data_path("table2.csv"))
    power, _ = fit_power(hw)
    latency, _ = fit_latency(hw)
    return SurrogateModels(acc, power, latency)
