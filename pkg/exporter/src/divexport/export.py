"""Export jobs: manifest in, DIVT tensors out.

Both operations hold the same two invariants — output row count equals
manifest row count, output row order equals manifest order — and write
their files atomically (temp file + rename) only after every batch has
been computed.
"""

from __future__ import annotations

import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from divexport import backends
from divexport.divt import write_divt
from divexport.errors import ExportError
from divexport.manifests import load_image_manifest, load_text_manifest


@dataclass(frozen=True)
class ExportJob:
    """One batch-export request."""

    manifest: str | os.PathLike
    out: str | os.PathLike
    model: str = "stub"
    batch_size: int = 32
    probs_out: str | os.PathLike | None = None  # images only
    seed: int = 0  # stub backend only
    replicate_channels: bool = True  # grayscale → 3 identical channels

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be ≥ 1, got {self.batch_size}")

    @property
    def is_stub(self) -> bool:
        return self.model == "stub"


def _write_atomic(path: str | os.PathLike, data: bytes) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        os.unlink(tmp)
        raise


def export_image_features(job: ExportJob) -> np.ndarray:
    """Write one feature row per manifest image; returns the feature matrix.

    When ``job.probs_out`` is set, a matching softmax probability matrix
    is written beside the features.  Undecodable images fail the whole
    job with a message listing every offending id.
    """
    rows = load_image_manifest(job.manifest)
    arrays, failures = [], []
    for sample_id, path in rows:
        try:
            array = backends.decode_image(path)
        except ExportError as exc:
            failures.append(f"{sample_id} ({exc})")
            continue
        arrays.append(backends.replicate_gray(array) if job.replicate_channels else array)
    if failures:
        raise ExportError(
            f"could not decode {len(failures)} image(s): " + "; ".join(failures)
        )

    if job.is_stub:
        features, probs = backends.stub_image_features(arrays, job.seed)
    elif job.model == "inception_v3":
        features, probs = backends.inception_image_features(arrays, job.batch_size)
    else:
        raise ExportError(f"unknown image model {job.model!r}; choose from {backends.IMAGE_MODELS}")

    _write_atomic(job.out, write_divt(features))
    if job.probs_out is not None:
        _write_atomic(job.probs_out, write_divt(probs))
    return features


def export_text_embeddings(job: ExportJob) -> np.ndarray:
    """Write one unit-norm embedding row per manifest text; returns the matrix.

    Empty texts (nothing but whitespace) produce all-zero rows and a
    single warning listing their ids, so row order and count still match
    the manifest exactly.
    """
    rows = load_text_manifest(job.manifest)
    texts = [text for _, text in rows]

    if job.is_stub:
        vectors = backends.stub_text_embeddings(texts, job.seed)
    elif job.model == "bge-m3":
        vectors = backends.bge_text_embeddings(texts, job.batch_size)
    else:
        raise ExportError(f"unknown text model {job.model!r}; choose from {backends.TEXT_MODELS}")

    empty = [i for i, text in enumerate(texts) if not text.strip()]
    if empty:
        vectors[empty] = 0.0
        ids = ", ".join(rows[i][0] for i in empty)
        warnings.warn(f"empty text for {len(empty)} sample(s): {ids}; wrote zero rows")

    _write_atomic(job.out, write_divt(vectors))
    return vectors
