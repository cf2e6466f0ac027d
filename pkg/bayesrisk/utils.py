import os
import json
import hashlib

import numpy as np

from .common import InputError


def generate_checksum(data):
    """
    Generate checksum of a JSON-serializable object from its canonical dump.

    :param data: object to calculate checksum of (dicts are dumped with sorted keys)
    :return: sha1 checksum
    """
    checksum = hashlib.sha1()
    checksum.update(json.dumps(data, sort_keys=True, separators=(',', ':'), cls=NumpyEncoder).encode('utf-8'))
    return checksum.hexdigest()


def stage_tag(key):
    """ Convert a stream key component (int or stage name) to a non-negative integer. """
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise InputError("Stream keys must be non-negative")
        return int(key)
    digest = hashlib.sha1(str(key).encode('utf-8')).hexdigest()
    return int(digest[:8], 16)


def stream(seed, *key):
    """
    Independent random stream derived from a seed and a key path.

    Streams are counter-based (Philox) generators seeded by a SeedSequence whose spawn key
    is the key path, so any (seed, key) pair always maps to the same stream regardless of
    the order in which streams are created.

    :param seed: 64-bit experiment seed
    :type seed: int
    :param key: key path, e.g. ('data', n, rep); strings are hashed
    :rtype: numpy.random.Generator
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(stage_tag(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


class NumpyEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.bool_):
            return bool(obj)

        return super().default(obj)


def json_safe(data):
    """ Copy of a JSON-ready structure with NaN and infinite floats replaced by None (JSON null). """
    if isinstance(data, dict):
        return {key: json_safe(value) for key, value in data.items()}
    if isinstance(data, (list, tuple, np.ndarray)):
        return [json_safe(value) for value in data]
    if isinstance(data, (float, np.floating)):
        return float(data) if np.isfinite(data) else None
    return data


def write_json(data, path):
    """
    Save JSON-serializable object in file, creating parent directories.

    Non-finite floats are written as null so the file stays strict JSON.

    :param data: object to dump
    :param path: destination file path
    """
    directory = os.path.abspath(os.path.dirname(path))
    os.makedirs(directory, exist_ok=True)

    with open(path, 'w') as output:
        json.dump(json_safe(data), output, indent=2, cls=NumpyEncoder, allow_nan=False)


def as_box(box):
    """
    Normalize decision box into a (d, 2) float array of finite, ordered bounds.

    :param box: sequence of (lo, hi) pairs, or a single (lo, hi) pair for d=1
    :rtype: numpy.ndarray
    """
    arr = np.asarray(box, dtype=float)
    if arr.ndim == 1 and arr.size == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] == 0:
        raise InputError("Box must be a nonempty sequence of (lo, hi) pairs")
    if not np.all(np.isfinite(arr)) or np.any(arr[:, 0] > arr[:, 1]):
        raise InputError("Box bounds must be finite and ordered")
    return arr


def as_points(points):
    """ Convert a finite set of points (scalars or vectors) into a (k, d) array. """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr
