"""
LABELS and NGRAMS sections of the artifact container.

LABELS:  u64 n_neurons, u64 n_classes, i64 labels, f64 proportions,
         f64 mean_rates (row-major)
NGRAMS:  u64 n, u64 n_classes, u64 windows, then per window n i64 neuron
         indices followed by n_classes i64 votes
"""
import struct

import numpy as np

from lattice_snn.exceptions import ArtifactIOError
from network.checkpoint import read_container, write_container

from .labeling import LabelAssignment
from .ngrams import NgramTable


def encode_labels(assign):
    n, c = assign.proportions.shape
    return b''.join([
        struct.pack('<QQ', n, c),
        np.ascontiguousarray(assign.labels, dtype='<i8').tobytes(),
        np.ascontiguousarray(assign.proportions, dtype='<f8').tobytes(),
        np.ascontiguousarray(assign.mean_rates, dtype='<f8').tobytes(),
    ])


def decode_labels(payload):
    if len(payload) < 16:
        raise ArtifactIOError('LABELS section shorter than its header')
    n, c = struct.unpack_from('<QQ', payload, 0)
    expected = 16 + 8 * n + 16 * n * c
    if len(payload) != expected:
        raise ArtifactIOError(f"LABELS section has {len(payload)} bytes, expected {expected}")
    labels = np.frombuffer(payload, dtype='<i8', count=n, offset=16).astype(np.int64)
    offset = 16 + 8 * n
    proportions = np.frombuffer(payload, dtype='<f8', count=n * c, offset=offset).reshape(n, c).astype(np.float64)
    offset += 8 * n * c
    mean_rates = np.frombuffer(payload, dtype='<f8', count=n * c, offset=offset).reshape(n, c).astype(np.float64)
    return LabelAssignment(int(c), proportions, labels, mean_rates)


def encode_ngrams(table):
    keys = sorted(table.counts)
    rows = [list(key) + table.counts[key].tolist() for key in keys]
    body = np.asarray(rows, dtype='<i8').tobytes() if rows else b''
    return struct.pack('<QQQ', table.n, table.n_classes, len(keys)) + body


def decode_ngrams(payload):
    if len(payload) < 24:
        raise ArtifactIOError('NGRAMS section shorter than its header')
    n, c, k = struct.unpack_from('<QQQ', payload, 0)
    width = n + c
    if len(payload) != 24 + 8 * k * width:
        raise ArtifactIOError(f"NGRAMS section has {len(payload)} bytes, expected {24 + 8 * k * width}")
    table = NgramTable(int(c), int(n))
    if k:
        rows = np.frombuffer(payload, dtype='<i8', offset=24).reshape(k, width)
        for row in rows:
            table.counts[tuple(int(i) for i in row[:n])] = row[n:].astype(np.int64)
    return table


def save_readout(path, assign, table=None, metadata=None):
    sections = {'LABELS': encode_labels(assign)}
    if table is not None:
        sections['NGRAMS'] = encode_ngrams(table)
    write_container(path, metadata or {}, sections)


def load_readout(path):
    """Returns (metadata, assignment, ngram table or None)."""
    metadata, sections = read_container(path)
    if 'LABELS' not in sections:
        raise ArtifactIOError(f"{path}: missing LABELS section")
    table = decode_ngrams(sections['NGRAMS']) if 'NGRAMS' in sections else None
    return metadata, decode_labels(sections['LABELS']), table
