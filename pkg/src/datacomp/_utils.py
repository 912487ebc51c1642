import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np

# Fixed spawn keys so each pipeline stage draws from its own reproducible stream.
_STAGES = {
    "design": 1,
    "test-order": 2,
    "simulate-superset": 3,
    "simulate-teams": 4,
    "mock": 5,
}


def stage_rng(seed, stage, *extra):
    """Return a Generator for ``stage`` derived from the top-level ``seed``."""
    key = (_STAGES[stage],) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def stable_int(text):
    """Platform-independent 32-bit hash of a string (``hash`` is salted per process)."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:4], "little")


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_number(value):
    """Shortest round-tripping text for a float; empty string for None/NaN."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if np.isnan(value):
        return ""
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)
