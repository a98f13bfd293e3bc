"""Self-describing training checkpoints.

A checkpoint is a zip archive holding one ``.npy`` entry per array
(network weights, optimizer moments, replay memory) plus a ``meta.json``
with the format tag, epoch counter, optimizer step, buffer cursors,
network/environment shapes, config hash, and the exact state of every
RNG stream.  Restoring from it continues training bit-exactly.

Entries are written with a fixed zip timestamp so identical training runs
produce byte-identical files.
"""

import io
import json
import zipfile

import numpy as np

from .errors import CheckpointMismatch

FORMAT_TAG = "ncsched-checkpoint-v1"
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def save_archive(path, meta, arrays):
    with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
        info = zipfile.ZipInfo("meta.json", date_time=_ZIP_EPOCH)
        zf.writestr(info, json.dumps(meta, sort_keys=True, indent=1))
        for name in sorted(arrays):
            buf = io.BytesIO()
            np.lib.format.write_array(
                buf, np.ascontiguousarray(arrays[name]), allow_pickle=False
            )
            info = zipfile.ZipInfo(name + ".npy", date_time=_ZIP_EPOCH)
            zf.writestr(info, buf.getvalue())


def load_archive(path):
    with zipfile.ZipFile(path) as zf:
        names = zf.namelist()
        if "meta.json" not in names:
            raise CheckpointMismatch(f"{path}: missing meta.json")
        meta = json.loads(zf.read("meta.json"))
        if meta.get("format") != FORMAT_TAG:
            raise CheckpointMismatch(
                f"{path}: format tag {meta.get('format')!r}, expected {FORMAT_TAG!r}"
            )
        arrays = {}
        for name in names:
            if name.endswith(".npy"):
                with zf.open(name) as fh:
                    arrays[name[:-4]] = np.lib.format.read_array(fh, allow_pickle=False)
    return meta, arrays


def require(condition, message):
    if not condition:
        raise CheckpointMismatch(message)
