"""Swept-source OCT simulation, spectral reconstruction, and learned restoration."""

__version__ = "0.1.0"

from .forward_model import (FringeFrame, NoiseConfig, Phantom, Reflector, SweepConfig,
                            background_column, max_imaging_depth, synthesize_fringe,
                            synthesize_volume, time_from_wavenumber, to_wavenumbers,
                            uniform_k_grid, wavelength_grid)
from .pipeline import (BScan, average_bscans, classic_reconstruct, hann_window,
                       idft_columns, lambda_space_image, magnitude_db, psf_fwhm,
                       resample_to_linear_k, subtract_background, truncate_conjugate)
from .autodiff import Tensor
from .model import AttentionUNet, ModelConfig
from .optim import Adam
from .training import TrainConfig, network_reconstruct, train_dataset
from .metrics import display_map, mse, psnr, ssim

__all__ = [
    "__version__",
    "FringeFrame", "NoiseConfig", "Phantom", "Reflector", "SweepConfig",
    "background_column", "max_imaging_depth", "synthesize_fringe", "synthesize_volume",
    "time_from_wavenumber", "to_wavenumbers", "uniform_k_grid", "wavelength_grid",
    "BScan", "average_bscans", "classic_reconstruct", "hann_window", "idft_columns",
    "lambda_space_image", "magnitude_db", "psf_fwhm", "resample_to_linear_k",
    "subtract_background", "truncate_conjugate",
    "Tensor", "AttentionUNet", "ModelConfig", "Adam",
    "TrainConfig", "network_reconstruct", "train_dataset",
    "display_map", "mse", "psnr", "ssim",
]
