"""
Stacks of symmetric network matrices: validation, link indexing and file formats.

Two on-disk formats are supported:

csv-stack
    A manifest text file listing one csv file per sample (paths relative to the manifest),
    each a dense p x p matrix of comma separated decimals.
binary-stack
    Magic bytes b"NTST", version byte 1, p and n as little-endian uint32, then n records of the
    q upper-triangular links as little-endian float64 in canonical link order.
"""

from __future__ import annotations

import logging
import struct
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from attrs import field, frozen

from ._typedattr import definenumpy
from .errors import NetdiffInputError, StackFormatError

logger = logging.getLogger(__name__)

STACK_FORMATS = ("csv-stack", "binary-stack")
SYMMETRY_TOLERANCE = 1e-9

BINARY_MAGIC = b"NTST"
BINARY_VERSION = 1
_BINARY_HEADER = struct.Struct("<4sBII")


@frozen
class LinkIndexMap:
    """
    Bijection between the node pairs (i, j), i < j, and flat link indices 0..q-1.
    Links are ordered row-major over the upper triangle: (0, 1), (0, 2), ..., (1, 2), ...
    """

    p: int = field()
    rows: np.ndarray = field(init=False, eq=False, repr=False)
    cols: np.ndarray = field(init=False, eq=False, repr=False)

    @p.validator
    def _check_p(self, _attribute, value):
        if int(value) < 2:
            raise NetdiffInputError(f"A network needs at least 2 nodes, got p={value}")

    def __attrs_post_init__(self):
        rows, cols = np.triu_indices(self.p, k=1)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def q(self) -> int:
        return self.p * (self.p - 1) // 2

    def flatten(self, i: int, j: int) -> int:
        """Flat index of the pair (i, j), i < j."""
        if not 0 <= i < j < self.p:
            raise NetdiffInputError(f"Expected 0 <= i < j < {self.p}, got ({i}, {j})")
        return i * (2 * self.p - i - 1) // 2 + (j - i - 1)

    def unflatten(self, k: int) -> Tuple[int, int]:
        """Node pair (i, j) of flat index k."""
        if not 0 <= k < self.q:
            raise NetdiffInputError(f"Link index {k} out of range for q={self.q}")
        return int(self.rows[k]), int(self.cols[k])

    def to_matrices(self, links: np.ndarray, diagonal: float = 0.0) -> np.ndarray:
        """Mirror link vectors of shape (..., q) into symmetric matrices of shape (..., p, p)."""
        links = np.asarray(links, dtype=np.float64)
        if links.shape[-1] != self.q:
            raise NetdiffInputError(f"Expected {self.q} links per matrix, got {links.shape[-1]}")
        matrices = np.full(links.shape[:-1] + (self.p, self.p), diagonal, dtype=np.float64)
        matrices[..., self.rows, self.cols] = links
        matrices[..., self.cols, self.rows] = links
        return matrices


def flatten_upper(matrix: np.ndarray, index_map: LinkIndexMap) -> np.ndarray:
    """
    Vector of the q off-diagonal upper-triangular entries of a p x p matrix (or of every matrix in
    an array of shape (..., p, p)) in canonical link order.
    """
    matrix = np.asarray(matrix)
    if matrix.shape[-2:] != (index_map.p, index_map.p):
        raise NetdiffInputError(
            f"Matrix of shape {matrix.shape[-2:]} does not match the link map with p={index_map.p}"
        )
    return matrix[..., index_map.rows, index_map.cols]


@definenumpy(True)
class NetworkSampleStack:
    """
    The n symmetric p x p network samples of one group.

    Construct via from_matrices to get tolerant symmetrisation, the constructor itself
    requires exactly symmetric, finite input.
    """

    group_id: int = field()
    samples: np.ndarray = field(repr=lambda a: f"array{a.shape}")

    @group_id.validator
    def _check_group_id(self, _attribute, value):
        if value not in (1, 2):
            raise NetdiffInputError(f"group_id must be 1 or 2, got {value}")

    @samples.validator
    def _check_samples(self, _attribute, value):
        if not isinstance(value, np.ndarray) or value.ndim != 3 or value.shape[1] != value.shape[2]:
            raise NetdiffInputError(
                f"Samples must be an array of shape (n, p, p), got {getattr(value, 'shape', value)}"
            )
        n, p, _ = value.shape
        if p < 2:
            raise NetdiffInputError(f"A network needs at least 2 nodes, got p={p}")
        if n < 2:
            raise NetdiffInputError(f"At least 2 samples are needed for variances, got n={n}")
        if not np.all(np.isfinite(value)):
            bad = np.argwhere(~np.isfinite(value))[0]
            raise NetdiffInputError(f"Non-finite entry in sample {bad[0]} at ({bad[1]}, {bad[2]})")
        if not np.array_equal(value, np.swapaxes(value, 1, 2)):
            raise NetdiffInputError("Samples must be exactly symmetric, use from_matrices")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def p(self) -> int:
        return self.samples.shape[1]

    @property
    def index_map(self) -> LinkIndexMap:
        return LinkIndexMap(self.p)

    def links(self) -> np.ndarray:
        """Link values of all samples, shape (n, q)."""
        return flatten_upper(self.samples, self.index_map)

    def transformed(self, transform: str) -> "NetworkSampleStack":
        """Apply an entrywise transform from TRANSFORMS."""
        if transform not in TRANSFORMS:
            raise NetdiffInputError(f"Unknown transform '{transform}', choose from {TRANSFORMS}")
        if transform == "none":
            return self
        if np.any(self.samples <= -1.0):
            raise NetdiffInputError("log1p transform needs entries > -1, e.g. counts")
        return NetworkSampleStack(self.group_id, np.log1p(self.samples))

    @classmethod
    def from_matrices(
        cls,
        matrices: Union[np.ndarray, Sequence[np.ndarray]],
        group_id: int = 1,
        tolerance: float = SYMMETRY_TOLERANCE,
    ) -> "NetworkSampleStack":
        """
        Validate and stack matrices. Asymmetries up to the absolute tolerance are removed by
        replacing every matrix M with (M + M^T) / 2.
        """
        shapes = sorted({np.shape(m) for m in matrices})
        if len(shapes) != 1:
            raise NetdiffInputError(f"Dimension mismatch across samples, found shapes {shapes}")
        samples = np.array(matrices, dtype=np.float64)
        if samples.ndim != 3 or samples.shape[1] != samples.shape[2]:
            raise NetdiffInputError(f"Samples must be square matrices, got shape {shapes[0]}")
        if not np.all(np.isfinite(samples)):
            bad = np.argwhere(~np.isfinite(samples))[0]
            raise NetdiffInputError(f"Non-finite entry in sample {bad[0]} at ({bad[1]}, {bad[2]})")
        transposed = np.swapaxes(samples, 1, 2)
        asymmetry = np.abs(samples - transposed)
        if np.any(asymmetry > tolerance):
            sample, i, j = np.unravel_index(np.argmax(asymmetry), asymmetry.shape)
            raise NetdiffInputError(
                f"Sample {sample} is not symmetric: |M[{i},{j}] - M[{j},{i}]| = "
                f"{asymmetry[sample, i, j]:.3g} exceeds the tolerance {tolerance:g}"
            )
        n_fixed = int(np.count_nonzero(asymmetry)) // 2
        if n_fixed > 0:
            logger.debug(f"Symmetrised {n_fixed} entries within tolerance {tolerance:g}")
        return cls(group_id, (samples + transposed) / 2)


TRANSFORMS = ("none", "log1p")


def _infer_format(path: Path) -> str:
    with path.open("rb") as fh:
        return "binary-stack" if fh.read(len(BINARY_MAGIC)) == BINARY_MAGIC else "csv-stack"


def load_stack(
    path: Union[str, Path], stack_format: Optional[str] = None, group_id: int = 1
) -> NetworkSampleStack:
    """
    Load a validated stack from disk.

    Args:
        path: binary stack file, or the manifest of a csv stack
        stack_format: one of STACK_FORMATS, inferred from the magic bytes if None
        group_id: group of the loaded samples

    Returns:
        The validated, exactly symmetric stack.
    """
    path = Path(path)
    if not path.is_file():
        raise NetdiffInputError(f"Stack file {path} does not exist")
    if stack_format is None:
        stack_format = _infer_format(path)
    if stack_format == "csv-stack":
        stack = _load_csv_stack(path, group_id)
    elif stack_format == "binary-stack":
        stack = _load_binary_stack(path, group_id)
    else:
        raise NetdiffInputError(f"Unknown stack format '{stack_format}', choose from {STACK_FORMATS}")
    logger.info(f"Loaded {stack_format} {path}: p={stack.p}, n={stack.n}")
    return stack


def write_stack(
    stack: NetworkSampleStack, path: Union[str, Path], stack_format: str = "binary-stack"
) -> Path:
    """
    Write a stack. Only links are stored, so diagonals read back as zero.
    For csv stacks, path is the manifest and the sample files are written next to it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if stack_format == "binary-stack":
        header = _BINARY_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, stack.p, stack.n)
        body = np.ascontiguousarray(stack.links(), dtype="<f8").tobytes()
        path.write_bytes(header + body)
    elif stack_format == "csv-stack":
        names: List[str] = []
        matrices = stack.index_map.to_matrices(stack.links())
        for num, matrix in enumerate(matrices):
            name = f"{path.stem}_{num:05d}.csv"
            np.savetxt(path.parent / name, matrix, delimiter=",", fmt="%.17g")
            names.append(name)
        path.write_text("\n".join(names) + "\n", encoding="utf-8")
    else:
        raise NetdiffInputError(f"Unknown stack format '{stack_format}', choose from {STACK_FORMATS}")
    return path


def _load_binary_stack(path: Path, group_id: int) -> NetworkSampleStack:
    data = path.read_bytes()
    if len(data) < _BINARY_HEADER.size:
        raise StackFormatError(f"{path}: file too short for the binary-stack header")
    magic, version, p, n = _BINARY_HEADER.unpack_from(data)
    if magic != BINARY_MAGIC:
        raise StackFormatError(f"{path}: bad magic bytes {magic!r}, expected {BINARY_MAGIC!r}")
    if version != BINARY_VERSION:
        raise StackFormatError(f"{path}: unsupported version {version}, expected {BINARY_VERSION}")
    if p < 2:
        raise StackFormatError(f"{path}: header declares p={p}, need at least 2 nodes")
    q = p * (p - 1) // 2
    expected = _BINARY_HEADER.size + 8 * n * q
    if len(data) != expected:
        raise StackFormatError(
            f"{path}: header declares p={p}, n={n} ({expected} bytes) but file has {len(data)} bytes"
        )
    if n < 2:
        raise StackFormatError(f"{path}: header declares n={n} samples, need at least 2")
    index_map = LinkIndexMap(p)
    links = np.frombuffer(data, dtype="<f8", offset=_BINARY_HEADER.size).reshape(n, q)
    if not np.all(np.isfinite(links)):
        raise NetdiffInputError(f"{path}: non-finite link value")
    return NetworkSampleStack(group_id, index_map.to_matrices(links.astype(np.float64)))


def _load_csv_stack(path: Path, group_id: int) -> NetworkSampleStack:
    lines = path.read_text(encoding="utf-8").splitlines()
    sample_files = [line.strip() for line in lines if line.strip() and not line.startswith("#")]
    if not sample_files:
        raise StackFormatError(f"{path}: manifest lists no sample files")
    matrices = []
    for sample_file in sample_files:
        sample_path = path.parent / sample_file
        try:
            matrix = np.loadtxt(sample_path, delimiter=",", dtype=np.float64, ndmin=2)
        except (OSError, ValueError) as e:
            raise StackFormatError(f"{path}: cannot read sample file {sample_path}: {e}") from e
        matrices.append(matrix)
    return NetworkSampleStack.from_matrices(matrices, group_id=group_id)
