"""Versioned checkpoint files.

Layout: a magic line ``DVKCHK <version>``, one line of JSON header, then one
binary Field block per species holding the deviation from ``offset``.
Restoring a checkpoint reproduces the state bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import Field, Grid, read_field
from .interaction import InteractionModel
from .solver import KineticState

CHECKPOINT_MAGIC = b"DVKCHK"
CHECKPOINT_VERSION = 1


def dumps(state: KineticState, model: InteractionModel | None = None, step: int = 0) -> bytes:
    header = {
        "version": CHECKPOINT_VERSION,
        "dim": state.dim,
        "n": state.grid.n,
        "c": state.c,
        "ticks": state.ticks,
        "t": state.t,
        "step": step,
        "offset": state.offset,
        "model": model.descriptor() if model is not None else None,
    }
    blocks = b"".join(Field(state.grid, d).to_bytes() for d in state.dev)
    return (CHECKPOINT_MAGIC + b" %d\n" % CHECKPOINT_VERSION
            + json.dumps(header, sort_keys=True).encode() + b"\n" + blocks)


def loads(data: bytes) -> tuple[KineticState, dict]:
    """Return ``(state, header)``."""
    first, sep, rest = data.partition(b"\n")
    if not sep or not first.startswith(CHECKPOINT_MAGIC):
        raise ValueError("not a checkpoint file")
    version = int(first.split()[1])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    line, sep, rest = rest.partition(b"\n")
    header = json.loads(line)
    grid = Grid(header["dim"], header["n"])
    ncomp = 2 if grid.dim == 1 else 6
    devs = []
    for _ in range(ncomp):
        f, rest = read_field(rest)
        if f.grid != grid:
            raise ValueError("checkpoint block grid does not match header")
        devs.append(f.values)
    if rest:
        raise ValueError("trailing bytes after checkpoint blocks")
    state = KineticState(grid, float(header["offset"]), np.stack(devs), float(header["c"]),
                         int(header["ticks"]))
    return state, header


def save(path, state: KineticState, model=None, step: int = 0):
    Path(path).write_bytes(dumps(state, model, step))


def load(path) -> tuple[KineticState, dict]:
    return loads(Path(path).read_bytes())
