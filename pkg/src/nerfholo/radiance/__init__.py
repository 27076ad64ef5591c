"""Trainable radiance fields: voxel grid (default) or small MLP, volume rendering, fitting."""

from .camera import CameraPose, PosedDataset, convert_transforms, read_pose_file, write_pose_file
from .checkpoint import load_checkpoint, save_checkpoint
from .encoding import EncodingConfig, positional_encode
from .fields import MlpField, RadianceGrid, sigmoid, softplus
from .render import (RayBatch, RenderOptions, backward_rays, loss, normalize_depth, render_depth,
                     render_ray, render_rays, render_view, render_view_and_depth)
from .train import Adam, DivergenceError, FitOptions, FitReport, batch_loss_and_grads, fit

__all__ = [
    "Adam", "CameraPose", "DivergenceError", "EncodingConfig", "FitOptions", "FitReport", "MlpField",
    "PosedDataset", "RadianceGrid", "RayBatch", "RenderOptions", "backward_rays", "batch_loss_and_grads",
    "convert_transforms", "fit", "load_checkpoint", "loss", "normalize_depth", "positional_encode",
    "read_pose_file", "render_depth", "render_ray", "render_rays", "render_view", "render_view_and_depth",
    "save_checkpoint", "sigmoid", "softplus", "write_pose_file",
]
