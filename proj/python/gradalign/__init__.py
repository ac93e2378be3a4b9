"""Training-free neural-architecture scoring laboratory."""

from gradalign._core import (
    Dataset,
    ProbeSet,
    build_probe,
    count_regions,
    gen_space,
    gradalign1,
    gradalign2,
    gradnorm,
    gradsign,
    kendall_tau,
    make_dataset,
    naswot,
    one_step_bound,
    param_count,
    per_sample_gradients,
    perturb_sensitivity,
    score,
    train,
)

__all__ = [
    "Dataset",
    "ProbeSet",
    "build_probe",
    "count_regions",
    "gen_space",
    "gradalign1",
    "gradalign2",
    "gradnorm",
    "gradsign",
    "kendall_tau",
    "make_dataset",
    "naswot",
    "one_step_bound",
    "param_count",
    "per_sample_gradients",
    "perturb_sensitivity",
    "score",
    "train",
]

__version__ = "0.1.0"
