import csv
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from fracwave.core.errors import FieldFormatError
from fracwave.models.field import GridField, SpectralField, box_shape
from fracwave.models.phase import Ensemble, PhasePoint, Trajectory
from fracwave.models.profile import OdeProfile

logger = logging.getLogger(__name__)

MAGIC = b"FWF1"
HEADER = np.dtype([("d", "<u4"), ("K", "<u4")])
HERMITIAN_TOLERANCE = 1e-12
MANIFEST = "manifest.txt"

PathLike = Union[str, Path]


def _member_paths(directory: Path, index: int):
    return directory / f"member_{index:06d}_u.fwf", directory / f"member_{index:06d}_v.fwf"


class FieldIOService:
    @staticmethod
    def encode(field: SpectralField) -> bytes:
        """FWF1: magic, little-endian u32 d and K, then (re, im) f64 pairs in lexicographic mode order"""
        header = np.array([(field.dim, field.maxmode)], dtype=HEADER).tobytes()
        pairs = np.ascontiguousarray(field.coeffs, dtype=np.complex128).view(np.float64).astype("<f8")
        return MAGIC + header + pairs.tobytes()

    @staticmethod
    def decode(data: bytes) -> SpectralField:
        if data[:4] != MAGIC:
            raise FieldFormatError(f"Not an FWF1 field: magic {data[:4]!r}")
        if len(data) < 4 + HEADER.itemsize:
            raise FieldFormatError("Truncated FWF1 header")
        header = np.frombuffer(data, dtype=HEADER, count=1, offset=4)[0]
        dim, maxmode = int(header["d"]), int(header["K"])
        if dim not in (1, 2):
            raise FieldFormatError(f"FWF1 dimension must be 1 or 2, got d={dim}")
        shape = box_shape(dim, maxmode)
        expected = 4 + HEADER.itemsize + 16 * math.prod(shape)
        if len(data) != expected:
            raise FieldFormatError(f"FWF1 payload for d={dim}, K={maxmode} needs {expected} bytes, got {len(data)}")
        pairs = np.frombuffer(data, dtype="<f8", offset=4 + HEADER.itemsize).astype(np.float64)
        coeffs = pairs.view(np.complex128).reshape(shape).copy()
        field = SpectralField(dim, maxmode, coeffs)
        scale = max(1.0, float(np.max(np.abs(coeffs), initial=0.0)))
        if not field.is_hermitian(HERMITIAN_TOLERANCE * scale):
            raise FieldFormatError("FWF1 coefficients are not Hermitian: the field would not be real")
        return field

    @staticmethod
    def write(path: PathLike, field: SpectralField) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(FieldIOService.encode(field))
        return path

    @staticmethod
    def read(path: PathLike) -> SpectralField:
        return FieldIOService.decode(Path(path).read_bytes())

    @staticmethod
    def write_ensemble(directory: PathLike, ensemble: Ensemble, extra: Optional[Dict[str, str]] = None) -> Path:
        """
        One FWF1 pair per member plus a key=value manifest (seed, alpha, N, count and
        any metadata such as potential, k or acceptance-rate)
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest: Dict[str, str] = {"count": str(len(ensemble))}
        config = ensemble.config
        if config is not None and hasattr(config, "alpha"):
            manifest["alpha"] = repr(float(config.alpha))
        manifest.update(ensemble.metadata)
        manifest.update(extra or {})
        for position, member in enumerate(ensemble.members):
            path_u, path_v = _member_paths(directory, position)
            FieldIOService.write(path_u, member.u)
            FieldIOService.write(path_v, member.v)
        manifest["indices"] = ",".join(str(i) for i in ensemble.seeds)
        if ensemble.weights is not None:
            manifest["weights"] = ",".join(repr(float(w)) for w in ensemble.weights)
        lines = [f"{key} = {value}" for key, value in manifest.items()]
        (directory / MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info("Wrote %d ensemble members to %s", len(ensemble), directory)
        return directory

    @staticmethod
    def read_manifest(directory: PathLike) -> Dict[str, str]:
        manifest = {}
        for number, line in enumerate((Path(directory) / MANIFEST).read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            if "=" not in line:
                raise FieldFormatError(f"{MANIFEST} line {number}: expected key = value")
            key, value = line.split("=", 1)
            manifest[key.strip()] = value.strip()
        return manifest

    @staticmethod
    def read_ensemble(directory: PathLike) -> Ensemble:
        directory = Path(directory)
        manifest = FieldIOService.read_manifest(directory)
        try:
            count = int(manifest["count"])
        except (KeyError, ValueError) as exc:
            raise FieldFormatError(f"{MANIFEST} lacks a valid count") from exc
        members = [PhasePoint(*(FieldIOService.read(p) for p in _member_paths(directory, i))) for i in range(count)]
        indices = [int(i) for i in manifest.pop("indices").split(",")] if manifest.get("indices") else list(range(count))
        weights = np.array([float(w) for w in manifest.pop("weights").split(",")]) if manifest.get("weights") else None
        return Ensemble(members=members, config=None, seeds=indices, weights=weights, metadata=manifest)

    @staticmethod
    def write_rows(path: PathLike, columns: List[str], rows) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(columns)
            writer.writerows(rows)
        return path

    @staticmethod
    def write_trajectory(directory: PathLike, trajectory: Trajectory, snapshot_every: int = 0) -> Path:
        """trajectory.csv with one column per recorded observable, and FWF1 snapshots every `snapshot_every` records"""
        directory = Path(directory)
        names = list(trajectory.observables)
        rows = [[t] + [trajectory.observables[name][i] for name in names] for i, t in enumerate(trajectory.times)]
        path = FieldIOService.write_rows(directory / "trajectory.csv", ["time"] + names, rows)
        if snapshot_every > 0:
            for i in range(0, len(trajectory), snapshot_every):
                state = trajectory.states[i]
                FieldIOService.write(directory / "snapshots" / f"u_{i:06d}.fwf", state.u)
                FieldIOService.write(directory / "snapshots" / f"v_{i:06d}.fwf", state.v)
        return path

    @staticmethod
    def write_profile(path: PathLike, profile: OdeProfile) -> Path:
        return FieldIOService.write_rows(path, ["t", "V", "dV"], zip(profile.t, profile.V, profile.dV))

    @staticmethod
    def write_grid(path: PathLike, grid: GridField) -> Path:
        """Grid values as CSV: columns x (and y for d=2) then u"""
        nodes = GridField.nodes(grid.dim, grid.M)
        columns = ["x", "y"][: grid.dim] + ["u"]
        rows = zip(*(axis.ravel() for axis in nodes), grid.values.ravel())
        return FieldIOService.write_rows(path, columns, rows)
