"""OOD benchmark toolkit: NIfTI I/O, MRI artifacts, uncertainty scores, metrics."""

from ._oodbench import (
    OodbenchError,
    apply_artifact,
    artifact_kinds,
    auroc,
    dice,
    dum_score,
    gate,
    msp_score,
    percentile,
    phantom,
    read_nifti,
    read_prob,
    variance_score,
    write_nifti,
    write_prob,
)

__all__ = [
    "OodbenchError",
    "apply_artifact",
    "artifact_kinds",
    "auroc",
    "dice",
    "dum_score",
    "gate",
    "msp_score",
    "percentile",
    "phantom",
    "read_nifti",
    "read_prob",
    "variance_score",
    "write_nifti",
    "write_prob",
]
