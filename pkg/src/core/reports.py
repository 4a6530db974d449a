"""Deterministic report and artifact writers.

JSON is written with sorted keys and no timestamps; floats keep their repr so
reruns with the same seed produce byte-identical files.
"""

import csv
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"

IDENTITY_ANCHORS = {
    # sphere and boundary integrals
    "monomial": "orthogonality of monomials in f1, f2 and conjugates under sigma_M",
    "cap_law": "cap measure law sigma(E(eta, delta)) = delta^2",
    "pushforward": "d_M balls are pulled-back caps of measure N delta^2",
    "tube_mass": "ramification tube {|z2| < w} has mass N w^(2q)",
    "norm": "pulled-back monomial norms ||f^a||^2 = N a!/(|a|+1)!",
    "kernel_power": "shell series for int |<f(z), f(w)>|^(2k) d sigma_M = N/(k+1)",
    "sign_average": "random-sign average of int |Q|^2 d sigma_M is K N/(1+k)",
    "quasi_triangle": "d_M is a quasi-metric on dM_q with constant at most 1",
    # packings
    "packing_bound": "packing count from boundary mass, K >= N/(4 r^2)",
    "cover": "a maximal r-separated set covers dM_q at radius 2r",
    "separation": "packing centers are pairwise r-separated",
    "shells": "shell count bound #H_m <= (m+2)^2",
    "kernel_decay": "kernel decay on shells, |<f(zeta), f(w)>|^2 <= 1 - m^2 r^2",
    "doubling": "homogeneous-space constants of (dM_q, d_M, sigma_M)",
    # RW polynomials
    "mean_floor": "best sign vector meets the sign average K N/(1+k)",
    "sup_bound": "shell series bound |Q| <= Sigma, so |W| <= 1",
    "measure_adaptation": "unitary rotation of W keeps |W| <= 1 and raises int |W|^2 d mu",
    # series
    "ceiling": "partial sums stay below the target, |Q_N| < phi",
    "defect": "defect int (phi - |Q_N|)^2 d sigma_M decreases every step",
    "parseval": "pieces with disjoint degree blocks are orthogonal",
    "energy": "series energy is bounded by int phi^2 d sigma_M",
    # one-variable oracle
    "blaschke_boundary_modulus": "finite Blaschke products have modulus 1 on the circle",
    "blaschke_factorization": "a Blaschke product is the product of its factors",
    "singular_radial_modulus": "singular inner functions have radial modulus 1 off the atoms",
}
"""Named identity each reported check belongs to, keyed by check family."""


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers into JSON-able values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, Path):
        return value.as_posix()
    return value


def dumps(data: Any) -> str:
    return json.dumps(_plain(data), sort_keys=True, indent=2) + "\n"


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    logger.debug(f"Wrote {path}")
    return path


def sha256_of_file(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1024 * 1024), b""):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(output_dir: Path, files: Iterable[Path], command: str) -> Path:
    """List every emitted file with its SHA-256 in output_dir/manifest.json.

    Args:
        output_dir: Directory holding the artifacts
        files: Emitted files (inside output_dir)
        command: CLI command that produced them

    Returns:
        Path of the manifest
    """
    output_dir = Path(output_dir)
    entries = []
    for path in sorted({Path(p) for p in files}, key=lambda p: p.as_posix()):
        entries.append(
            {
                "file": path.relative_to(output_dir).as_posix(),
                "bytes": path.stat().st_size,
                "sha256": sha256_of_file(path),
            }
        )
    return write_json(output_dir / MANIFEST_NAME, {"command": command, "files": entries})
