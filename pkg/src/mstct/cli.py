"""Command-line entry point: ``mstct {simulate,reconstruct,evaluate,sweep,profile,preview}``.

Every failure prints one ``ErrorClass: message`` line on stderr and exits 1.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _backend, rawio
from .errors import ConfigError, MstctError
from .geometry import GEOMETRY_KEYS, ScanGeometry, fov_radius
from .metrics import disc_mask, evaluate, report_row, write_reports
from .phantom import BUILTIN, ImageGrid, Phantom, VoxelGrid, builtin_phantom, load_phantom, rasterize
from .pipeline import ReconJob, extract_profile, load_recon, normalize_algo, run_sweep, write_profile, write_sweep
from .projector import export_sinogram, import_sinogram

log = logging.getLogger("mstct")

RUN_KEYS = GEOMETRY_KEYS + (
    "phantom",
    "out_dir",
    "algorithm",
    "dimensionality",
    "noise_i0",
    "seed",
    "grid_size",
    "grid_pitch_mm",
    "p0",
    "rows",
    "row_pitch_mm",
)


def resolve_phantom(spec: str, base: Path | None = None) -> Phantom:
    """``builtin:<name>`` or a CSV path (relative paths resolve against ``base``)."""
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN:
            raise ConfigError(f"unknown builtin phantom {name!r}; choose from {', '.join(BUILTIN)}")
        return builtin_phantom(name)
    path = Path(spec)
    if base is not None and not path.is_absolute():
        path = base / path
    return load_phantom(path)


@dataclass
class RunConfig:
    geometry: ScanGeometry
    phantom: str | None = None
    out_dir: str = "out"
    algorithm: str = "d-bpf"
    dimensionality: int = 2
    noise_i0: float | None = None
    seed: int = 0
    grid_size: int = 256
    grid_pitch_mm: float | None = None
    p0: int | None = None
    rows: int | None = None
    row_pitch_mm: float | None = None
    base: Path = field(default_factory=Path.cwd)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a flat key/value object")
        unknown = sorted(set(doc) - set(RUN_KEYS))
        if unknown:
            raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
        cfg = cls(ScanGeometry.from_dict(doc), base=path.parent)
        for key in RUN_KEYS[len(GEOMETRY_KEYS) :]:
            if key in doc and doc[key] is not None:
                setattr(cfg, key, doc[key])
        cfg.validate()
        return cfg

    def validate(self) -> None:
        normalize_algo(self.algorithm)
        if self.dimensionality not in (2, 3):
            raise ConfigError("dimensionality must be 2 or 3")
        if self.dimensionality == 3 and (not self.rows or not self.row_pitch_mm):
            raise ConfigError("3D runs need rows and row_pitch_mm")
        if int(self.grid_size) < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.grid_pitch_mm is not None and not float(self.grid_pitch_mm) > 0:
            raise ConfigError("grid_pitch_mm must be positive")
        if self.noise_i0 is not None and not float(self.noise_i0) > 0:
            raise ConfigError("noise_i0 must be positive")
        if self.phantom is not None and not str(self.phantom).startswith("builtin:"):
            p = Path(self.phantom)
            p = p if p.is_absolute() else self.base / p
            if not p.exists():
                raise FileNotFoundError(f"phantom file not found: {p}")

    def load_phantom(self) -> Phantom:
        if self.phantom is None:
            raise ConfigError("config has no phantom")
        return resolve_phantom(str(self.phantom), self.base)

    def job(self, phantom: Phantom | None = None) -> ReconJob:
        three_d = self.dimensionality == 3
        return ReconJob(
            geometry=self.geometry,
            phantom=phantom if phantom is not None else Phantom(()),
            algo=normalize_algo(self.algorithm),
            size=int(self.grid_size),
            pitch=None if self.grid_pitch_mm is None else float(self.grid_pitch_mm),
            p0=None if self.p0 is None else int(self.p0),
            i0=None if self.noise_i0 is None else float(self.noise_i0),
            seed=int(self.seed),
            rows=int(self.rows) if three_d else None,
            row_pitch=float(self.row_pitch_mm) if three_d else None,
        )


def _config(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required for this command")
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "n", None):
        cfg.geometry = cfg.geometry.with_sources(args.n)
    if getattr(args, "algo", None):
        cfg.algorithm = args.algo
    cfg.validate()
    return cfg


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    out = Path(args.out) if args.out else Path(cfg.out_dir if cfg else ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _reference(grid_like, phantom: Phantom, values: np.ndarray) -> np.ndarray:
    if values.ndim == 3:
        return rasterize(phantom, VoxelGrid(values.shape[-1], grid_like, values.shape[0]))
    return rasterize(phantom, ImageGrid(values.shape[-1], grid_like))


# -- commands ------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _config(args)
    job = cfg.job(cfg.load_phantom())
    sino = job.acquire()
    path = export_sinogram(sino, _out_dir(args, cfg) / "sinogram")
    print(path)
    return 0


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    sino = import_sinogram(args.sinogram, cfg.geometry)
    job = cfg.job()
    img = job.run(sino)
    path = img.export(_out_dir(args, cfg) / "recon")
    if cfg.phantom is not None:
        ref = _reference(img.pitch, cfg.load_phantom(), img.values)
        mask = _fov_mask(img.values, img.pitch, fov_radius(cfg.geometry))
        rep = evaluate(img.values, ref, mask, "fov")
        log.info("RMSE=%.6g PSNR=%.4f dB", rep.rmse, rep.psnr)
        print(f"RMSE={rep.rmse:.6g}")
    print(path)
    return 0


def _fov_mask(values, pitch, radius):
    n = values.shape[-1]
    m = disc_mask(n, pitch, min(radius, n * pitch / 2))
    return np.broadcast_to(m, values.shape) if values.ndim == 3 else m


def _mask(spec: str, values, pitch, cfg: RunConfig | None):
    if spec == "all":
        return None
    if spec == "fov":
        if cfg is None:
            raise ConfigError("mask 'fov' needs --config")
        return _fov_mask(values, pitch, fov_radius(cfg.geometry))
    m = re.fullmatch(r"disc:([0-9.eE+-]+)", spec)
    if m:
        return _fov_mask(values, pitch, float(m.group(1)))
    raise ConfigError(f"bad mask {spec!r}; use all, fov or disc:<radius_mm>")


def cmd_evaluate(args) -> int:
    img = load_recon(args.recon)
    cfg = RunConfig.load(args.config) if args.config else None
    if args.reference:
        ref = load_recon(args.reference).values
        if ref.shape != img.values.shape:
            raise ConfigError(f"reference shape {ref.shape} differs from {img.values.shape}")
    else:
        spec = args.phantom or (cfg.phantom if cfg else None)
        if spec is None:
            raise ConfigError("give --phantom, --reference or a config with a phantom")
        ref = _reference(img.pitch, resolve_phantom(spec, cfg.base if cfg and not args.phantom else None), img.values)
    rep = evaluate(img.values, ref, _mask(args.mask, img.values, img.pitch, cfg), args.mask)
    path = write_reports(_out_dir(args, cfg) / "metrics.csv", [report_row(rep, algo=img.algo)])
    print(path)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    try:
        n_values = [int(v) for v in args.n_list.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --n-list {args.n_list!r}") from exc
    algos = [normalize_algo(a) for a in args.algos.split(",") if a.strip()]
    rows = run_sweep(cfg.job(cfg.load_phantom()), n_values, algos)
    path = write_sweep(_out_dir(args, cfg) / "sweep.csv", rows)
    print(path)
    return 0


def cmd_profile(args) -> int:
    img = load_recon(args.recon)
    path = write_profile(_out_dir(args) / "profile.csv", extract_profile(img.values, args.line))
    print(path)
    return 0


def parse_window(text: str | None):
    if text is None:
        return None
    m = re.fullmatch(r"\s*\[?\s*([^,\]]+)\s*,\s*([^,\]]+?)\s*\]?\s*", text)
    if not m:
        raise ConfigError(f"bad window {text!r}; use [lo,hi]")
    try:
        lo, hi = float(m.group(1)), float(m.group(2))
    except ValueError as exc:
        raise ConfigError(f"bad window {text!r}") from exc
    if not hi > lo:
        raise ConfigError("window upper bound must exceed the lower bound")
    return lo, hi


def to_uint16(values, window=None) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    lo, hi = window if window is not None else (float(v.min()), float(v.max()))
    if hi <= lo:
        return np.zeros(v.shape, dtype=np.uint16)
    scaled = np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    return np.rint(scaled * 65535.0).astype(np.uint16)


def cmd_preview(args) -> int:
    from PIL import Image

    data, _ = rawio.read_raw(args.input)
    if data.ndim == 3:
        data = data[data.shape[0] // 2]
    if data.ndim != 2:
        raise ConfigError(f"preview needs a 2D image or 3D volume, got {data.ndim} axes")
    img = Image.fromarray(to_uint16(data, parse_window(args.window)))
    path = _out_dir(args) / "preview.png"
    img.save(path)
    print(path)
    return 0


# -- parser --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="run configuration (flat JSON)")
    shared.add_argument("--out", help="output directory")
    shared.add_argument("--threads", type=int, help="worker threads for the compiled kernels")
    shared.add_argument("--seed", type=int, help="noise seed (overrides the config)")
    shared.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mstct", description="mSTCT simulation and BPF reconstruction")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[shared], help="simulate projections of the configured phantom")
    s.add_argument("--n", type=int, help="override sources per STCT")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reconstruct", parents=[shared], help="reconstruct a sinogram file")
    s.add_argument("--sinogram", required=True, help="sinogram header or base path")
    s.add_argument("--algo", help="d-bpf or s-bpf (overrides the config)")
    s.add_argument("--n", type=int, help="override sources per STCT")
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("evaluate", parents=[shared], help="RMSE/PSNR of a reconstruction")
    s.add_argument("--recon", required=True)
    s.add_argument("--phantom", help="CSV path or builtin:<name>")
    s.add_argument("--reference", help="reference image file instead of a phantom")
    s.add_argument("--mask", default="all", help="all, fov or disc:<radius_mm>")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", parents=[shared], help="RMSE/PSNR over several N")
    s.add_argument("--n-list", default="251,501,1001,2001")
    s.add_argument("--algos", default="d-bpf,s-bpf")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("profile", parents=[shared], help="write a line profile as CSV")
    s.add_argument("--recon", required=True)
    s.add_argument("--line", required=True, help="row:i, col:j or line:r0,c0,r1,c1")
    s.set_defaults(func=cmd_profile)

    s = sub.add_parser("preview", parents=[shared], help="16-bit PNG of an image file")
    s.add_argument("--input", required=True)
    s.add_argument("--window", help="display window, e.g. [0,3]; default min/max")
    s.set_defaults(func=cmd_preview)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        _backend.set_threads(args.threads)
        return args.func(args)
    except (MstctError, OSError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else ""
        print(f"{type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
