"""File formats: NIfTI-1 volumes, VOXF feature maps and JSON configs."""

from ..config import load_config, save_config
from .featfile import FeatureFile, read_feat, write_feat
from .nifti import NiftiImage, read_nifti, write_nifti

__all__ = ["FeatureFile", "NiftiImage", "load_config", "read_feat", "read_nifti",
           "save_config", "write_feat", "write_nifti"]
