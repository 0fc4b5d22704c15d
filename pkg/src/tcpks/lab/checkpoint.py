"""Binary checkpoints (little-endian) for exact restarts.

Byte layout, version 1 (all integers unsigned, all floats IEEE-754):

=========  =====================  ==========================================
offset     type                   content
=========  =====================  ==========================================
0          4 bytes                magic ``b"APKS"``
4          u32                    format version (1)
8          u32                    P, length of the parameter block
12         P bytes                SimParams as UTF-8 JSON (sorted keys)
12+P       f64                    t
           u64                    step index
           u32, u32               K+1, N_r
           complex128[K+1, N_r]   n_hat (row-major, real then imaginary)
           complex128[K+1, N_r]   w_hat
           u8                     1 if an Adams-Bashforth history follows
           complex128[2, K+1, N_r]  previous explicit tendencies (dn, dw)
           u32 + f64[...]         run monitors (count, then values)
           u32 + f64[...]         X_a^k accumulator for n (count, values)
           u32 + f64[...]         X_a^k accumulator for w
           u32 + f64[...]         recorded max n history
=========  =====================  ==========================================

The derived fields c and phi are not stored; they are re-solved on load.
The history and monitor blocks make a resumed run continue bit-for-bit.
"""

import json
import os
import struct

import numpy as np

from ..baseflow import SimParams
from ..dynamics import Simulation, State
from ..errors import CheckpointError

MAGIC = b"APKS"
VERSION = 1
_MONITORS = ("initial_max_n", "sup_max_n", "last_mass", "worst_mass_increase", "sup_n0_norm", "sup_w0_norm",
             "worst_negativity")


def _f64_block(values):
    arr = np.ascontiguousarray(values, dtype="<f8").ravel()
    return struct.pack("<I", arr.size) + arr.tobytes()


def _complex_block(arr):
    return np.ascontiguousarray(arr, dtype="<c16").tobytes()


def encode(sim):
    """Serialize a :class:`~tcpks.dynamics.Simulation` to bytes."""
    state = sim.state
    params = json.dumps(sim.params.as_dict(), sort_keys=True).encode("utf-8")
    n = state.n_hat.coeffs
    parts = [MAGIC, struct.pack("<II", VERSION, len(params)), params,
             struct.pack("<dQII", state.t, sim.step_index, n.shape[0], n.shape[1]),
             _complex_block(n), _complex_block(state.w_hat.coeffs)]
    if state.history is None:
        parts.append(b"\x00")
    else:
        parts += [b"\x01", _complex_block(np.stack(state.history))]
    parts.append(_f64_block([getattr(sim, name) for name in _MONITORS]))
    parts.append(_f64_block(sim.acc_n.state_arrays()))
    parts.append(_f64_block(sim.acc_w.state_arrays()))
    parts.append(_f64_block(sim.max_history))
    return b"".join(parts)


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def complex_array(self, shape):
        count = int(np.prod(shape))
        return np.frombuffer(self.take(16 * count), dtype="<c16").reshape(shape).astype(complex)

    def f64_block(self):
        (count,) = self.unpack("<I")
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(float)


def decode(data, diag_interval=10):
    """Rebuild a Simulation from checkpoint bytes, ready to ``advance``."""
    rd = _Reader(data)
    if rd.take(4) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    version, plen = rd.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    params = SimParams(**json.loads(rd.take(plen).decode("utf-8")))
    t, step, kp1, n_r = rd.unpack("<dQII")
    if kp1 != params.K_max + 1 or n_r != params.N_r:
        raise CheckpointError("array dimensions do not match the stored parameters")
    n = rd.complex_array((kp1, n_r))
    w = rd.complex_array((kp1, n_r))
    (has_history,) = rd.unpack("<B")
    history = None
    if has_history:
        h = rd.complex_array((2, kp1, n_r))
        history = (h[0], h[1])
    monitors = rd.f64_block()
    acc_n, acc_w, max_hist = rd.f64_block(), rd.f64_block(), rd.f64_block()
    if rd.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")

    sim = Simulation(params, diag_interval=diag_interval)
    base = sim.stepper.make_state(n, w, t=t)
    sim.state = State(t=base.t, n_hat=base.n_hat, c_hat=base.c_hat, w_hat=base.w_hat,
                      phi_hat=base.phi_hat, history=history)
    sim.step_index = int(step)
    for name, value in zip(_MONITORS, monitors):
        setattr(sim, name, float(value))
    sim.acc_n.load_arrays(acc_n)
    sim.acc_w.load_arrays(acc_w)
    sim.max_history = list(max_hist)
    return sim


def save(sim, path):
    """Write a checkpoint atomically (temporary file, then rename)."""
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(encode(sim))
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc


def load(path, diag_interval=10):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode(data, diag_interval=diag_interval)
