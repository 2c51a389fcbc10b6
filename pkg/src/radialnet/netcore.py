"""Explicit layered sigmoid networks.

A network computes

    N(x) = a . sigma(W_L ... sigma(W_1 x + b_1) ... + b_L) + c

with every weight stored explicitly.  Evaluation forms each product exactly
(two-product) and accumulates in double-double, because the closed-form
constructions in :mod:`radialnet.constructor` rely on cancellation between
readout weights many orders of magnitude larger than the result.

``precision="extended"`` additionally carries hidden activations as
double-double values, with the sigmoid itself evaluated in double-double.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import ddarith as dd
from .activation import CapabilityError, sigmoid, sigmoid_derivative

SCHEMA_NAME = "radialnet.network"
SCHEMA_VERSION = 1
PRECISIONS = ("standard", "extended")


class ShapeError(ValueError):
    """Layer shapes do not chain or an input has the wrong dimension."""


@dataclass(frozen=True)
class LayeredNetwork:
    """Weights and biases of a fully connected sigmoid network.

    ``layers[l] = (W, b)`` with ``W`` of shape (d_l, d_{l-1}).  Arrays are
    copied and made read-only on construction.
    """

    input_dim: int
    layers: tuple
    readout: np.ndarray
    readout_constant: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ShapeError("input_dim must be >= 1")
        if len(self.layers) == 0:
            raise ShapeError("a network needs at least one hidden layer")
        frozen = []
        prev = self.input_dim
        for idx, (w, b) in enumerate(self.layers):
            w = np.array(w, dtype=np.float64, copy=True)
            b = np.array(b, dtype=np.float64, copy=True).reshape(-1)
            if w.ndim != 2 or w.shape[1] != prev:
                raise ShapeError(
                    f"layer {idx + 1}: weight shape {w.shape} does not accept "
                    f"{prev} inputs"
                )
            if b.shape[0] != w.shape[0]:
                raise ShapeError(f"layer {idx + 1}: bias length {b.shape[0]} != {w.shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {idx + 1}: non-finite weight or bias")
            w.setflags(write=False)
            b.setflags(write=False)
            frozen.append((w, b))
            prev = w.shape[0]
        r = np.array(self.readout, dtype=np.float64, copy=True).reshape(-1)
        if r.shape[0] != prev:
            raise ShapeError(f"readout length {r.shape[0]} != last width {prev}")
        if not np.all(np.isfinite(r)) or not np.isfinite(self.readout_constant):
            raise ValueError("non-finite readout")
        r.setflags(write=False)
        object.__setattr__(self, "layers", tuple(frozen))
        object.__setattr__(self, "readout", r)
        object.__setattr__(self, "readout_constant", float(self.readout_constant))

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w, _ in self.layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def max_abs_weight(self) -> float:
        vals = [np.abs(w).max() for w, _ in self.layers]
        vals += [np.abs(b).max() for _, b in self.layers]
        vals.append(np.abs(self.readout).max())
        return float(max(vals))

    def with_readout(self, readout, readout_constant: float | None = None) -> "LayeredNetwork":
        const = self.readout_constant if readout_constant is None else readout_constant
        return LayeredNetwork(self.input_dim, self.layers, readout, const, dict(self.meta))

    def __call__(self, x, precision: str = "standard"):
        return evaluate(self, x, precision=precision)


def parameter_count(net: LayeredNetwork) -> int:
    """d_L + sum_k (d_{k-1} d_k + d_k) with d_0 the input dimension."""
    total = 0
    prev = net.input_dim
    for width in net.widths:
        total += prev * width + width
        prev = width
    return total + prev


def _as_batch(net: LayeredNetwork, x):
    arr = np.asarray(x, dtype=np.float64)
    scalar = False
    if arr.ndim == 0:
        if net.input_dim != 1:
            raise ShapeError(f"scalar input given to a network with input_dim={net.input_dim}")
        arr = arr.reshape(1, 1)
        scalar = True
    elif arr.ndim == 1:
        if net.input_dim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.shape[0] == net.input_dim:
            arr = arr.reshape(1, -1)
            scalar = True
        else:
            raise ShapeError(f"input length {arr.shape[0]} != input_dim {net.input_dim}")
    elif arr.ndim == 2:
        if arr.shape[1] != net.input_dim:
            raise ShapeError(f"input width {arr.shape[1]} != input_dim {net.input_dim}")
    else:
        raise ShapeError("inputs must be a point or a 2-D batch of points")
    return arr, scalar


def _layer_preactivation(w, b, vh, vl):
    # vh, vl: (m, d_in); result (m, d_out) as a double-double pair
    shi, slo = dd.matvec(w, vh, vl)
    return dd.dd_add_d(shi, slo, b[None, :])


def evaluate(net: LayeredNetwork, x, precision: str = "standard"):
    """Network output at a point or a batch of points (rows)."""
    if precision not in PRECISIONS:
        raise ValueError(f"precision must be one of {PRECISIONS}")
    xs, scalar = _as_batch(net, x)
    out_hi, out_lo = _forward(net, xs, precision)
    out = out_hi + out_lo
    return float(out[0]) if scalar else out


def _forward(net, xs, precision):
    vh, vl = xs, None
    for w, b in net.layers:
        zh, zl = _layer_preactivation(w, b, vh, vl)
        if precision == "extended":
            vh, vl = dd.dd_sigmoid(zh, zl)
        else:
            vh, vl = sigmoid(zh + zl), None
    shi, slo = dd.dot(net.readout, vh, vl)
    return dd.dd_add_d(shi, slo, net.readout_constant)


def evaluate_derivative(net: LayeredNetwork, t):
    """d/dt of a univariate network, by forward-mode chain rule."""
    if net.input_dim != 1:
        raise CapabilityError("evaluate_derivative needs a univariate network (input_dim=1)")
    ts, scalar = _as_batch(net, t)
    vh = ts
    dv = np.ones_like(ts)
    for w, b in net.layers:
        zh, zl = _layer_preactivation(w, b, vh, None)
        z = zh + zl
        dzh, dzl = dd.matvec(w, dv)
        dv = sigmoid_derivative(1, z) * (dzh + dzl)
        vh = sigmoid(z)
    dh, dl = dd.dot(net.readout, dv)
    out = dh + dl
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------


def _floats(arr) -> list[float]:
    return [float(v) for v in np.asarray(arr).reshape(-1)]


def network_to_dict(net: LayeredNetwork) -> dict[str, Any]:
    """Plain-data form.  Floats are written with Python's shortest round-trip repr."""
    return {
        "schema": SCHEMA_NAME,
        "version": SCHEMA_VERSION,
        "input_dim": net.input_dim,
        "layers": [
            {"rows": int(w.shape[0]), "cols": int(w.shape[1]),
             "weights": _floats(w), "bias": _floats(b)}
            for w, b in net.layers
        ],
        "readout": _floats(net.readout),
        "readout_constant": net.readout_constant,
        "parameter_count": parameter_count(net),
    }


def network_from_dict(data: dict[str, Any]) -> LayeredNetwork:
    if data.get("schema") != SCHEMA_NAME:
        raise ValueError(f"not a {SCHEMA_NAME} record")
    if int(data.get("version", -1)) != SCHEMA_VERSION:
        raise ValueError(f"unsupported network schema version {data.get('version')}")
    layers = []
    for layer in data["layers"]:
        w = np.array(layer["weights"], dtype=np.float64).reshape(layer["rows"], layer["cols"])
        layers.append((w, np.array(layer["bias"], dtype=np.float64)))
    return LayeredNetwork(
        int(data["input_dim"]), tuple(layers),
        np.array(data["readout"], dtype=np.float64), float(data["readout_constant"]),
    )


def dumps_network(net: LayeredNetwork) -> str:
    return json.dumps(network_to_dict(net), indent=1, allow_nan=False)


def loads_network(text: str) -> LayeredNetwork:
    return network_from_dict(json.loads(text))
