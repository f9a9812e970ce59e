"""Bootstrap MCMC fitting of categorical-judgment rating models."""

import json as _json

from ._core import (
    Parameters,
    fix_parameters,
    gof,
    log_likelihood,
    make_template,
    read_counts,
    read_parameter_file,
    report_text,
    response_matrix,
    sample,
    simulate,
    write_counts,
    write_parameter_file,
)
from ._core import fit as _fit

__all__ = [
    "Parameters",
    "fit",
    "fix_parameters",
    "gof",
    "log_likelihood",
    "make_template",
    "read_counts",
    "read_parameter_file",
    "report_text",
    "response_matrix",
    "sample",
    "simulate",
    "write_counts",
    "write_parameter_file",
]


def fit(counts, variant, template=None, restarts=3, n_e=4000, seed=1, workers=0, generating=None):
    """Fit a model to counts; returns the report as a dict."""
    return _json.loads(
        _fit(counts, variant, template, restarts, n_e, seed, workers, generating)
    )
