"""Intensity histogram features for OOD detection on 3D medical scans."""

from ._ihfood import (
    DataError,
    Error,
    FitError,
    FormatError,
    IhfDetector,
    IoError,
    PcaModel,
    PreconditionError,
    Volume,
    VolumePredictor,
    auroc,
    corrupt,
    entropy_score,
    fechner_correlation,
    fit_ihf,
    fit_pca,
    fpr_at_tpr,
    histogram,
    load_volume,
    make_phantom,
    preprocess,
    run_challenge,
    save_volume,
    uncertainty_score,
)

__all__ = [name for name in dir() if not name.startswith("_")]
