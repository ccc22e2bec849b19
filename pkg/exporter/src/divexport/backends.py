"""Feature backends: pretrained models plus a deterministic stub.

The stub backend exists so the full export path runs and tests without
any model weights: every row is a random projection drawn from a
generator seeded by a keyed hash of the (preprocessed) input bytes, so
identical inputs always map to identical rows and nothing about the
output pretends to be semantic.  The real backends import their deep
learning stacks lazily and degrade to a clear error when the stack or
its weights are unavailable.
"""

from __future__ import annotations

import hashlib

import numpy as np
from PIL import Image, UnidentifiedImageError

from divexport.errors import ExportError

IMAGE_FEATURE_DIM = 2048  # pooled width of the standard image backbone
CLASS_COUNT = 1000  # classifier head width, mirrored by the stub
TEXT_EMBEDDING_DIM = 1024  # multilingual text model width, mirrored by the stub

IMAGE_MODELS = ("stub", "inception_v3")
TEXT_MODELS = ("stub", "bge-m3")


# ---------------------------------------------------------------------------
# decoding and preprocessing


def decode_image(path) -> np.ndarray:
    """Load one image as a (H, W) or (H, W, 3) uint8 array.

    Supports common raster formats via Pillow plus ``.npy`` arrays.
    Raises ``ExportError`` naming the problem; callers batch these up so
    a failing job lists every offending input at once.
    """
    suffix = str(path).lower().rsplit(".", 1)[-1]
    try:
        if suffix == "npy":
            array = np.load(path, allow_pickle=False)
        else:
            with Image.open(path) as img:
                array = np.asarray(img.convert("RGB") if img.mode not in ("L", "RGB") else img)
    except FileNotFoundError as exc:
        raise ExportError(f"file not found: {path}") from exc
    except (UnidentifiedImageError, ValueError, OSError) as exc:
        raise ExportError(f"cannot decode {path}: {exc}") from exc
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise ExportError(f"{path}: expected uint8 pixels, got {array.dtype}")
    if array.ndim == 2 or (array.ndim == 3 and array.shape[2] == 3):
        return array
    raise ExportError(f"{path}: expected (H, W) or (H, W, 3), got shape {array.shape}")


def replicate_gray(array: np.ndarray) -> np.ndarray:
    """Grayscale → 3 identical channels; 3-channel input passes through."""
    if array.ndim == 2:
        return np.repeat(array[:, :, None], 3, axis=2)
    return array


# ---------------------------------------------------------------------------
# stub backend


def _generator(seed: int, payload: bytes) -> np.random.Generator:
    digest = hashlib.blake2b(payload, digest_size=32, key=str(seed).encode()).digest()
    entropy = np.frombuffer(digest, dtype=np.uint32)
    return np.random.default_rng(np.random.SeedSequence(entropy.tolist()))


def _canonical_bytes(array: np.ndarray) -> bytes:
    head = f"{array.dtype.str}:{array.shape}".encode()
    return head + b"\x00" + np.ascontiguousarray(array).tobytes()


def stub_image_features(arrays: list[np.ndarray], seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-image pseudo-features and softmax rows, deterministic in (pixels, seed)."""
    features = np.empty((len(arrays), IMAGE_FEATURE_DIM), dtype=np.float32)
    probs = np.empty((len(arrays), CLASS_COUNT), dtype=np.float32)
    for i, array in enumerate(arrays):
        rng = _generator(seed, _canonical_bytes(array))
        features[i] = rng.standard_normal(IMAGE_FEATURE_DIM).astype(np.float32)
        logits = rng.standard_normal(CLASS_COUNT)
        shifted = np.exp(logits - logits.max())
        probs[i] = (shifted / shifted.sum()).astype(np.float32)
    return features, probs


def stub_text_embeddings(texts: list[str], seed: int) -> np.ndarray:
    """Per-text unit-norm pseudo-embeddings, deterministic in (text, seed)."""
    vectors = np.empty((len(texts), TEXT_EMBEDDING_DIM), dtype=np.float32)
    for i, text in enumerate(texts):
        rng = _generator(seed, text.encode("utf-8"))
        v = rng.standard_normal(TEXT_EMBEDDING_DIM)
        vectors[i] = (v / np.linalg.norm(v)).astype(np.float32)
    return vectors


# ---------------------------------------------------------------------------
# pretrained backends (lazy imports; weights never vendored)


def inception_image_features(
    arrays: list[np.ndarray], batch_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled backbone features plus softmax probabilities, batch by batch."""
    try:
        import torch
        from torchvision.models import Inception_V3_Weights, inception_v3
    except ImportError as exc:
        raise ExportError(
            "the inception_v3 backend needs torch and torchvision "
            "(install the 'models' extra) — or use --model stub"
        ) from exc
    try:
        weights = Inception_V3_Weights.IMAGENET1K_V1
        model = inception_v3(weights=weights)
    except Exception as exc:
        raise ExportError(f"could not load pretrained image weights: {exc}") from exc
    model.eval()
    head = model.fc
    model.fc = torch.nn.Identity()
    preprocess = weights.transforms()
    features, probs = [], []
    with torch.no_grad():
        for start in range(0, len(arrays), batch_size):
            batch = [Image.fromarray(a) for a in arrays[start : start + batch_size]]
            stacked = torch.stack([preprocess(img) for img in batch])
            pooled = model(stacked)
            features.append(pooled.numpy())
            probs.append(torch.softmax(head(pooled), dim=1).numpy())
    return (
        np.vstack(features).astype(np.float32),
        np.vstack(probs).astype(np.float32),
    )


def bge_text_embeddings(texts: list[str], batch_size: int) -> np.ndarray:
    """Unit-normalized multilingual sentence embeddings."""
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise ExportError(
            "the bge-m3 backend needs sentence-transformers "
            "(install the 'models' extra) — or use --model stub"
        ) from exc
    try:
        model = SentenceTransformer("BAAI/bge-m3")
    except Exception as exc:
        raise ExportError(f"could not load the text embedding model: {exc}") from exc
    vectors = model.encode(
        list(texts),
        batch_size=batch_size,
        normalize_embeddings=True,
        convert_to_numpy=True,
    )
    return np.asarray(vectors, dtype=np.float32)
