"""Network container: an ordered layer stack with named parameters.

Parameter names are "layers.<index>.<key>", stable across save/load because
construction from a NetworkSpec is deterministic. Serialization splits into
a JSON header (spec, array directory, extras) and a little-endian float64
binary blob holding parameters and buffers in directory order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from . import layers as L

_MAGIC = "strokelab-network"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class NetworkSpec:
    """Shape of one of the two supported classifiers.

    dense: three Dense(hidden) blocks, each Dense -> BatchNorm -> ReLU ->
    Dropout, then a linear head. conv: two Conv1d -> ReLU -> MaxPool ->
    Dropout blocks, then Flatten -> Dense -> ReLU -> Dropout and a linear
    head. Both end in `output_size` logits.
    """

    variant: str
    input_size: int = 10
    hidden_sizes: tuple[int, ...] = (64, 32, 16)
    conv_channels: tuple[int, ...] = (16, 32)
    kernel_size: int = 3
    dense_hidden: int = 32
    dropout_rate: float = 0.3
    batch_norm: bool = True
    pool_window: int = 2
    output_size: int = 2

    def __post_init__(self) -> None:
        if self.variant not in ("dense", "conv"):
            raise ValueError(f"unknown variant {self.variant!r}, expected 'dense' or 'conv'")
        if self.input_size < 1:
            raise ValueError(f"input_size must be >= 1, got {self.input_size}")
        if self.output_size < 2:
            raise ValueError(f"output_size must be >= 2, got {self.output_size}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")
        if self.variant == "dense":
            if len(self.hidden_sizes) != 3 or any(h < 1 for h in self.hidden_sizes):
                raise ValueError("dense variant takes exactly 3 positive hidden sizes")
        else:
            if len(self.conv_channels) != 2 or any(c < 1 for c in self.conv_channels):
                raise ValueError("conv variant takes exactly 2 positive channel counts")
            if self.dense_hidden < 1:
                raise ValueError(f"dense_hidden must be >= 1, got {self.dense_hidden}")
            if self.kernel_size < 1 or self.pool_window < 1:
                raise ValueError("kernel_size and pool_window must be >= 1")
            length = self.input_size
            padding = self.kernel_size // 2
            for i in range(2):
                conv_out = length + 2 * padding - self.kernel_size + 1
                pooled = conv_out // self.pool_window
                if pooled < 1:
                    raise ValueError(
                        f"input_size {self.input_size} collapses to zero length at conv block {i + 1}"
                    )
                length = pooled

    def flattened_size(self) -> int:
        """Features entering the conv head after both conv/pool blocks."""
        if self.variant != "conv":
            raise ValueError("flattened_size applies to the conv variant only")
        length = self.input_size
        padding = self.kernel_size // 2
        for _ in range(2):
            length = (length + 2 * padding - self.kernel_size + 1) // self.pool_window
        return length * self.conv_channels[-1]

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "input_size": self.input_size,
            "hidden_sizes": list(self.hidden_sizes),
            "conv_channels": list(self.conv_channels),
            "kernel_size": self.kernel_size,
            "dense_hidden": self.dense_hidden,
            "dropout_rate": self.dropout_rate,
            "batch_norm": self.batch_norm,
            "pool_window": self.pool_window,
            "output_size": self.output_size,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        return cls(
            variant=data["variant"],
            input_size=int(data["input_size"]),
            hidden_sizes=tuple(data["hidden_sizes"]),
            conv_channels=tuple(data["conv_channels"]),
            kernel_size=int(data["kernel_size"]),
            dense_hidden=int(data["dense_hidden"]),
            dropout_rate=float(data["dropout_rate"]),
            batch_norm=bool(data["batch_norm"]),
            pool_window=int(data["pool_window"]),
            output_size=int(data["output_size"]),
        )


class Network:
    """Ordered layer stack sharing one random generator.

    Mode is explicit: forward(x, train=...) decides between batch statistics
    plus dropout noise and the deterministic eval path. backward requires
    the cached activations of a train-mode forward.
    """

    def __init__(self, net_layers: list[L.Layer], rng: np.random.Generator,
                 spec: NetworkSpec | None = None, seed: int | None = None):
        self.layers = list(net_layers)
        self.rng = rng
        self.spec = spec
        self.seed = seed
        self.adam_m: dict[str, np.ndarray] = {}
        self.adam_v: dict[str, np.ndarray] = {}
        self.adam_t = 0
        self._train_cache = False

    def forward(self, x: np.ndarray, *, train: bool) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"input must be (batch, features), got shape {x.shape}")
        if self.spec is not None and x.shape[1] != self.spec.input_size:
            raise ValueError(f"expected {self.spec.input_size} features, got {x.shape[1]}")
        out = x
        for layer in self.layers:
            out = layer.forward(out, train)
        self._train_cache = train
        return out

    def backward(self, dlogits: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients for every parameter from the cached train-mode forward."""
        if not self._train_cache:
            raise RuntimeError("backward requires a preceding train-mode forward pass")
        grad = dlogits
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.gradients().items():
                out[f"layers.{i}.{key}"] = value
        return out

    def parameters(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.parameters().items():
                out[f"layers.{i}.{key}"] = value
        return out

    def buffers(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for key, value in layer.buffers().items():
                out[f"layers.{i}.{key}"] = value
        return out

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def freeze_dropout(self) -> None:
        for layer in self.layers:
            if isinstance(layer, L.Dropout):
                layer.frozen = True

    def unfreeze_dropout(self) -> None:
        for layer in self.layers:
            if isinstance(layer, L.Dropout):
                layer.frozen = False
                layer._mask = None

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode probability of the positive class (softmax column 1)."""
        logits = self.forward(np.atleast_2d(np.asarray(x, dtype=np.float64)), train=False)
        shifted = logits - logits.max(axis=1, keepdims=True)
        expv = np.exp(shifted)
        probs = expv / expv.sum(axis=1, keepdims=True)
        return probs[:, 1]

    def predict(self, x: np.ndarray, threshold: float = 0.5) -> np.ndarray:
        """Hard labels; probability ties at the threshold go positive."""
        return (self.predict_proba(x) >= threshold).astype(np.int64)

    def describe(self) -> list[str]:
        return [layer.describe() for layer in self.layers]

    # serialization -------------------------------------------------------

    def save(self, json_path: str | Path, extras: dict | None = None) -> tuple[Path, Path]:
        """Write <stem>.json + <stem>.bin; extras ride along in the header."""
        if self.spec is None or self.seed is None:
            raise ValueError("only spec-built networks (see build_network) can be saved")
        json_path = Path(json_path)
        bin_path = json_path.with_suffix(".bin")

        chunks = []
        directory = []
        offset = 0
        for kind, mapping in (("parameter", self.parameters()), ("buffer", self.buffers())):
            for name, array in mapping.items():
                raw = np.ascontiguousarray(array, dtype="<f8").tobytes()
                directory.append({
                    "name": name,
                    "kind": kind,
                    "shape": list(array.shape),
                    "offset": offset,
                })
                chunks.append(raw)
                offset += len(raw)
        blob = b"".join(chunks)

        header = {
            "magic": _MAGIC,
            "format_version": _FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "seed": self.seed,
            "arrays": directory,
            "blob_bytes": len(blob),
            "blob_sha256": hashlib.sha256(blob).hexdigest(),
            "extras": extras or {},
        }
        json_path.write_text(
            json.dumps(header, indent=2, sort_keys=True, allow_nan=False) + "\n",
            encoding="utf-8",
        )
        bin_path.write_bytes(blob)
        return json_path, bin_path

    @classmethod
    def load(cls, json_path: str | Path) -> tuple["Network", dict]:
        """Rebuild a saved network; returns (network, extras)."""
        json_path = Path(json_path)
        try:
            header = json.loads(json_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot load network from {json_path}: {exc}") from None
        if header.get("magic") != _MAGIC:
            raise DataError(f"{json_path} is not a network file")
        if header.get("format_version") != _FORMAT_VERSION:
            raise DataError(f"{json_path}: unsupported format version {header.get('format_version')}")

        bin_path = json_path.with_suffix(".bin")
        try:
            blob = bin_path.read_bytes()
        except OSError as exc:
            raise DataError(f"cannot read weights from {bin_path}: {exc.strerror or exc}") from None
        if len(blob) != header["blob_bytes"]:
            raise DataError(f"{bin_path}: expected {header['blob_bytes']} bytes, found {len(blob)}")
        if hashlib.sha256(blob).hexdigest() != header["blob_sha256"]:
            raise DataError(f"{bin_path}: weight blob does not match its recorded checksum")

        net = build_network(NetworkSpec.from_dict(header["spec"]), seed=int(header["seed"]))
        arrays = {**net.parameters(), **net.buffers()}
        seen = set()
        for entry in header["arrays"]:
            name, kind, shape, offset = entry["name"], entry["kind"], entry["shape"], entry["offset"]
            if name not in arrays:
                raise DataError(f"{json_path}: unknown array {name!r} in directory")
            target = arrays[name]
            if list(target.shape) != shape:
                raise DataError(f"{json_path}: array {name!r} shape {shape} does not match spec")
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            target[...] = data.reshape(target.shape)
            seen.add(name)
        missing = set(arrays) - seen
        if missing:
            raise DataError(f"{json_path}: arrays missing from directory: {sorted(missing)}")
        return net, header.get("extras", {})


def build_network(spec: NetworkSpec, seed: int) -> Network:
    """Construct and He-initialize a network; one seed fixes every draw."""
    rng = np.random.default_rng(seed)
    stack: list[L.Layer] = []
    if spec.variant == "dense":
        width = spec.input_size
        for hidden in spec.hidden_sizes:
            stack.append(L.Dense(width, hidden, rng))
            if spec.batch_norm:
                stack.append(L.BatchNorm(hidden))
            stack.append(L.ReLU())
            stack.append(L.Dropout(spec.dropout_rate, rng))
            width = hidden
        stack.append(L.Dense(width, spec.output_size, rng))
    else:
        padding = spec.kernel_size // 2
        stack.append(L.Reshape1d(1, spec.input_size))
        channels = 1
        for out_channels in spec.conv_channels:
            stack.append(L.Conv1d(channels, out_channels, spec.kernel_size, padding, rng))
            stack.append(L.ReLU())
            stack.append(L.MaxPool1d(spec.pool_window))
            stack.append(L.Dropout(spec.dropout_rate, rng))
            channels = out_channels
        stack.append(L.Flatten())
        stack.append(L.Dense(spec.flattened_size(), spec.dense_hidden, rng))
        stack.append(L.ReLU())
        stack.append(L.Dropout(spec.dropout_rate, rng))
        stack.append(L.Dense(spec.dense_hidden, spec.output_size, rng))
    return Network(stack, rng=rng, spec=spec, seed=seed)
