"""Simulation and BPF reconstruction for multiple source-translation CT (mSTCT)."""

from .errors import MstctError
from .geometry import ScanGeometry, fov_radius, ray_of, reference_geometry
from .phantom import ImageGrid, Phantom, VoxelGrid, builtin_phantom, load_phantom, rasterize
from .pipeline import ReconImage, ReconJob, reconstruct_2d, reconstruct_3d, run_sweep
from .projector import Sinogram, add_poisson_noise, simulate

__version__ = "0.1.0"

__all__ = [
    "ImageGrid",
    "MstctError",
    "Phantom",
    "ReconImage",
    "ReconJob",
    "ScanGeometry",
    "Sinogram",
    "VoxelGrid",
    "add_poisson_noise",
    "builtin_phantom",
    "fov_radius",
    "load_phantom",
    "rasterize",
    "ray_of",
    "reconstruct_2d",
    "reconstruct_3d",
    "run_sweep",
    "simulate",
    "reference_geometry",
]
