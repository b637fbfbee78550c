"""
Binary checkpoint container.

Layout:
    text header  "LMSNN 1\n" followed by "key=value\n" lines, ended by "\n"
    sections     8-byte ASCII tag, little-endian u64 payload length, payload

WEIGHTS payload: u64 n_pre, u64 n_post (little-endian), n_pre*n_post
row-major little-endian f64, then the mask as packed bits (row-major,
most significant bit first).
THETA payload: u64 n, then n little-endian f64.
"""
import hashlib
import logging
import struct
from pathlib import Path

import numpy as np

from lattice_snn.exceptions import ArtifactIOError

logger = logging.getLogger(__name__)

MAGIC = b'LMSNN 1\n'
TAG_SIZE = 8


def encode_weights(w, mask):
    n_pre, n_post = w.shape
    header = struct.pack('<QQ', n_pre, n_post)
    body = np.ascontiguousarray(w, dtype='<f8').tobytes()
    bits = np.packbits(np.asarray(mask, dtype=bool).ravel()).tobytes()
    return header + body + bits


def decode_weights(payload):
    if len(payload) < 16:
        raise ArtifactIOError('WEIGHTS section shorter than its header')
    n_pre, n_post = struct.unpack_from('<QQ', payload, 0)
    count = n_pre * n_post
    body_end = 16 + 8 * count
    bits_len = (count + 7) // 8
    if len(payload) != body_end + bits_len:
        raise ArtifactIOError(
            f"WEIGHTS section has {len(payload)} bytes, expected {body_end + bits_len} "
            f"for {n_pre}x{n_post}"
        )
    w = np.frombuffer(payload, dtype='<f8', count=count, offset=16).reshape(n_pre, n_post).astype(np.float64)
    bits = np.frombuffer(payload, dtype=np.uint8, offset=body_end)
    mask = np.unpackbits(bits, count=count).astype(bool).reshape(n_pre, n_post)
    return w, mask


def encode_vector(values):
    values = np.ascontiguousarray(values, dtype='<f8')
    return struct.pack('<Q', values.size) + values.tobytes()


def decode_vector(payload):
    if len(payload) < 8:
        raise ArtifactIOError(f"Vector section has {len(payload)} bytes, shorter than its header")
    (n,) = struct.unpack_from('<Q', payload, 0)
    if len(payload) != 8 + 8 * n:
        raise ArtifactIOError(f"Vector section has {len(payload)} bytes, expected {8 + 8 * n}")
    return np.frombuffer(payload, dtype='<f8', count=n, offset=8).astype(np.float64)


def write_container(path, metadata, sections):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        for key, value in metadata.items():
            f.write(f"{key}={value}\n".encode('utf-8'))
        f.write(b'\n')
        for tag, payload in sections.items():
            raw_tag = tag.encode('ascii')
            if len(raw_tag) > TAG_SIZE:
                raise ArtifactIOError(f"Section tag '{tag}' longer than {TAG_SIZE} bytes")
            f.write(raw_tag.ljust(TAG_SIZE, b' '))
            f.write(struct.pack('<Q', len(payload)))
            f.write(payload)
    logger.info(f"Wrote {path} ({', '.join(sections)})")


def read_container(path):
    path = Path(path)
    if not path.exists():
        raise ArtifactIOError(f"Missing artifact {path}")
    data = path.read_bytes()
    if not data.startswith(MAGIC):
        raise ArtifactIOError(f"{path} is not an LMSNN container")
    end = data.find(b'\n\n', len(MAGIC) - 1)
    if end < 0:
        raise ArtifactIOError(f"{path}: unterminated text header")
    metadata = {}
    for line in data[len(MAGIC):end].decode('utf-8').splitlines():
        if line:
            key, _, value = line.partition('=')
            metadata[key] = value
    offset = end + 2
    sections = {}
    while offset < len(data):
        if offset + TAG_SIZE + 8 > len(data):
            raise ArtifactIOError(f"{path}: truncated section header at byte {offset}")
        tag = data[offset:offset + TAG_SIZE].decode('ascii').rstrip()
        (length,) = struct.unpack_from('<Q', data, offset + TAG_SIZE)
        start = offset + TAG_SIZE + 8
        if start + length > len(data):
            raise ArtifactIOError(f"{path}: section {tag} truncated at byte {start}")
        sections[tag] = data[start:start + length]
        offset = start + length
    return metadata, sections


def weights_digest(w):
    return hashlib.sha256(np.ascontiguousarray(w, dtype='<f8').tobytes()).hexdigest()


def save_checkpoint(path, arch, config_hash='', extra=None):
    """extra: further key=value header entries, e.g. image height and width."""
    metadata = {
        'kind': arch.kind,
        'n_input': arch.n_input,
        'n_neurons': arch.n_neurons,
        'examples_seen': arch.examples_seen,
        'level': repr(float(arch.level)),
        'config_hash': config_hash,
    }
    metadata.update(extra or {})
    sections = {
        'WEIGHTS': encode_weights(arch.input_conn.w, arch.input_conn.mask),
        'THETA': encode_vector(arch.exc_group.theta),
    }
    write_container(path, metadata, sections)


def load_checkpoint(path, arch):
    """Restore weights, mask, theta and inhibition level into a freshly built arch."""
    metadata, sections = read_container(path)
    for tag in ('WEIGHTS', 'THETA'):
        if tag not in sections:
            raise ArtifactIOError(f"{path}: missing {tag} section")
    w, mask = decode_weights(sections['WEIGHTS'])
    theta = decode_vector(sections['THETA'])
    if w.shape != (arch.n_input, arch.n_neurons) or theta.size != arch.n_neurons:
        raise ArtifactIOError(
            f"{path}: checkpoint is {w.shape[0]}x{w.shape[1]}, network is "
            f"{arch.n_input}x{arch.n_neurons}"
        )
    arch.input_conn.mask = mask
    arch.input_conn.w = w
    arch.exc_group.theta = theta
    arch.examples_seen = int(metadata.get('examples_seen', 0))
    arch.set_level(float(metadata['level']), examples_seen=arch.examples_seen)
    logger.info(f"Loaded checkpoint {path} ({arch.examples_seen} examples seen)")
    return metadata
