#!/usr/bin/env python3
"""
Checkpoint - Binary policy checkpoints: magic, version, fingerprint and named float32 tensors
"""
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Optional, Tuple

import numpy as np

from errors import (
    CheckpointError,
    CheckpointVersionError,
    CorruptCheckpointError,
    IncompatibleCheckpointError,
)
from learning.agent_policy import NetworkConfig, Policy

logger = logging.getLogger(__name__)

MAGIC = b"LVMCKPT\x00"
FORMAT_VERSION = 1
# Sections of the resolved configuration that fix the policy's inputs and shapes
MODEL_SECTIONS = ("network", "encoder")


def model_fingerprint(settings: Dict[str, Any]) -> str:
    """SHA-256 over the model-defining configuration sections"""
    subset = {section: settings.get(section, {}) for section in MODEL_SECTIONS}
    payload = json.dumps(subset, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_tensors(stream: BinaryIO, tensors: Dict[str, np.ndarray], fingerprint: str) -> None:
    fp = fingerprint.encode("ascii")
    stream.write(MAGIC)
    stream.write(struct.pack("<IH", FORMAT_VERSION, len(fp)))
    stream.write(fp)
    stream.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw_name = name.encode("utf-8")
        stream.write(struct.pack("<H", len(raw_name)))
        stream.write(raw_name)
        stream.write(struct.pack("<B", data.ndim))
        stream.write(struct.pack(f"<{data.ndim}I", *data.shape))
        stream.write(data.tobytes())


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunk = stream.read(n)
    if len(chunk) != n:
        raise CorruptCheckpointError("checkpoint is truncated")
    return chunk


def read_tensors(stream: BinaryIO) -> Tuple[Dict[str, np.ndarray], str]:
    """Returns (tensors, fingerprint)"""
    if stream.read(len(MAGIC)) != MAGIC:
        raise CorruptCheckpointError("not a label view manager checkpoint (bad magic)")
    version, fp_len = struct.unpack("<IH", _read_exact(stream, 6))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION}); "
            f"re-export it with a matching release"
        )
    fingerprint = _read_exact(stream, fp_len).decode("ascii")
    (count,) = struct.unpack("<I", _read_exact(stream, 4))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", _read_exact(stream, 2))
        name = _read_exact(stream, name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", _read_exact(stream, 1))
        shape = struct.unpack(f"<{ndim}I", _read_exact(stream, 4 * ndim))
        n_items = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(_read_exact(stream, 4 * n_items), dtype="<f4").reshape(shape)
        tensors[name] = data.astype(np.float32)
    if stream.read(1):
        raise CorruptCheckpointError("trailing bytes after the last tensor")
    return tensors, fingerprint


def save_checkpoint(policy: Policy, path: str, fingerprint: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "wb") as f:
        write_tensors(f, policy.store.state_dict(), fingerprint)
    logger.info(f"Wrote checkpoint {target}")


def load_checkpoint(path: str, network: Optional[NetworkConfig] = None,
                    expected_fingerprint: Optional[str] = None) -> Policy:
    """
    Rebuild a policy from a checkpoint.

    Raises:
        CorruptCheckpointError, CheckpointVersionError: unreadable file
        IncompatibleCheckpointError: fingerprint or tensor shapes do not match the configuration
    """
    try:
        with open(path, "rb") as f:
            tensors, fingerprint = read_tensors(f)
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    if expected_fingerprint is not None and fingerprint != expected_fingerprint:
        raise IncompatibleCheckpointError(
            f"checkpoint {path} was trained with a different network/encoder configuration "
            f"({fingerprint[:12]} != {expected_fingerprint[:12]})"
        )
    policy = Policy(network)
    try:
        policy.store.load_state_dict(tensors)
    except ValueError as e:
        raise IncompatibleCheckpointError(f"checkpoint {path} does not fit the network: {e}") from e
    logger.info(f"Loaded checkpoint {path} ({policy.store.count()} parameters)")
    return policy
