"""Fully connected tanh networks on the autodiff tape.

Hidden layers use tanh, the output layer is affine. Inputs are ordered
``(t, x, z_1, ..., z_s)``; column 0 is time and column 1 is space.

Checkpoint byte layout (all little-endian)::

    magic    4 bytes   b"RXNP"
    version  uint32    1
    n_sizes  uint32    number of layer sizes L+1 (input, hidden..., output)
    sizes    uint32 x n_sizes
    offsets  uint64 x 2L   start index in the flat vector of W_1, b_1, ..., W_L, b_L
    n_params uint64
    data     float64 x n_params

``W_l`` is stored row-major with shape (fan_in, fan_out), so a layer computes
``a @ W_l + b_l``.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Node, Tape

MAGIC = b"RXNP"
FORMAT_VERSION = 1

TIME, SPACE = 0, 1


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError(f"all layer sizes must be >= 1: {self.sizes}")

    @classmethod
    def from_sizes(cls, sizes: Iterable[int]) -> MlpConfig:
        """Build from a list like ``[2, 64, 64, 1]``."""
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        return cls(sizes[0], tuple(sizes[1:-1]), sizes[-1])

    @property
    def sizes(self) -> list[int]:
        return [self.input_dim, *self.hidden, self.output_dim]

    @property
    def depth(self) -> int:
        return len(self.hidden)

    def layer_offsets(self) -> list[tuple[int, int]]:
        """(weight offset, bias offset) into the flat vector, per layer."""
        out = []
        pos = 0
        sizes = self.sizes
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            out.append((pos, pos + fan_in * fan_out))
            pos += fan_in * fan_out + fan_out
        return out

    @property
    def n_params(self) -> int:
        sizes = self.sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


@dataclass
class ParamSet:
    config: MlpConfig
    flat: np.ndarray

    def __post_init__(self):
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        if self.flat.shape != (self.config.n_params,):
            raise ValueError(
                f"expected {self.config.n_params} parameters, got shape {self.flat.shape}"
            )

    @property
    def n_params(self) -> int:
        return self.flat.size

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """(W, b) views into ``flat``."""
        sizes = self.config.sizes
        out = []
        for (w_off, b_off), fan_in, fan_out in zip(
            self.config.layer_offsets(), sizes[:-1], sizes[1:]
        ):
            w = self.flat[w_off : w_off + fan_in * fan_out].reshape(fan_in, fan_out)
            b = self.flat[b_off : b_off + fan_out]
            out.append((w, b))
        return out

    def copy(self) -> ParamSet:
        return ParamSet(self.config, self.flat.copy())

    @classmethod
    def from_layers(cls, config: MlpConfig, layers) -> ParamSet:
        parts = []
        for w, b in layers:
            parts.append(np.asarray(w, dtype=np.float64).ravel())
            parts.append(np.asarray(b, dtype=np.float64).ravel())
        return cls(config, np.concatenate(parts))

    def to_bytes(self) -> bytes:
        sizes = self.config.sizes
        offsets = [o for pair in self.config.layer_offsets() for o in pair]
        header = MAGIC + struct.pack("<II", FORMAT_VERSION, len(sizes))
        header += struct.pack(f"<{len(sizes)}I", *sizes)
        header += struct.pack(f"<{len(offsets)}Q", *offsets)
        header += struct.pack("<Q", self.n_params)
        return header + self.flat.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> ParamSet:
        if blob[:4] != MAGIC:
            raise ValueError("not a parameter checkpoint")
        version, n_sizes = struct.unpack_from("<II", blob, 4)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        pos = 12
        sizes = struct.unpack_from(f"<{n_sizes}I", blob, pos)
        pos += 4 * n_sizes
        n_off = 2 * (n_sizes - 1)
        offsets = struct.unpack_from(f"<{n_off}Q", blob, pos)
        pos += 8 * n_off
        (n_params,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        config = MlpConfig.from_sizes(sizes)
        expected = [o for pair in config.layer_offsets() for o in pair]
        if list(offsets) != expected or n_params != config.n_params:
            raise ValueError("checkpoint header is inconsistent with its layer sizes")
        flat = np.frombuffer(blob, dtype="<f8", count=n_params, offset=pos)
        return cls(config, flat.astype(np.float64))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> ParamSet:
        return cls.from_bytes(Path(path).read_bytes())


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Counter-based (Philox) generator used for every random draw in the package."""
    return np.random.Generator(np.random.Philox(seed))


def init_he_uniform(config: MlpConfig, seed: int | np.random.SeedSequence = 1) -> ParamSet:
    """Weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)); biases zero."""
    rng = make_rng(seed)
    sizes = config.sizes
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = np.sqrt(6.0 / fan_in)
        layers.append((rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return ParamSet.from_layers(config, layers)


@dataclass
class BoundNet:
    """A ParamSet whose weights have been recorded as trainable tape leaves."""

    params: ParamSet
    tape: Tape
    leaves: list[tuple[Node, Node]]

    def flat_gradient(self, grads: dict[int, np.ndarray]) -> np.ndarray:
        """Gather per-leaf gradients into the ParamSet's flat ordering."""
        parts = []
        for w, b in self.leaves:
            parts.append(grads[w.index].ravel())
            parts.append(grads[b.index].ravel())
        return np.concatenate(parts)


def bind(params: ParamSet, tape: Tape) -> BoundNet:
    leaves = [
        (tape.leaf(w, trainable=True), tape.leaf(b, trainable=True)) for w, b in params.layers()
    ]
    return BoundNet(params, tape, leaves)


def _as_batch(x, input_dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != input_dim:
        raise ValueError(f"expected inputs with {input_dim} columns, got shape {arr.shape}")
    return arr


def _resolve(params: ParamSet | BoundNet, tape: Tape | None) -> BoundNet:
    if isinstance(params, BoundNet):
        if tape is not None and tape is not params.tape:
            raise ValueError("bound network belongs to a different tape")
        return params
    if tape is None:
        raise ValueError("a tape is required for an unbound ParamSet")
    return bind(params, tape)


def forward(params: ParamSet | BoundNet, x, tape: Tape | None = None) -> list[Node]:
    """Network outputs as tape nodes, one node per output component.

    ``x`` is a single input vector or an (N, input_dim) batch; each returned
    node holds shape (N,).
    """
    net = _resolve(params, tape)
    tape = net.tape
    a = tape.leaf(_as_batch(x, net.params.config.input_dim))
    last = len(net.leaves) - 1
    for i, (w, b) in enumerate(net.leaves):
        a = a @ w + b
        if i < last:
            a = a.tanh()
    return [a.column(k) for k in range(net.params.config.output_dim)]


@dataclass
class OutputTriple:
    """Value of one output component plus its requested input derivatives."""

    value: Node
    derivs: dict[int, Node] = field(default_factory=dict)

    @property
    def d_dt(self) -> Node | None:
        return self.derivs.get(TIME)

    @property
    def d_dx(self) -> Node | None:
        return self.derivs.get(SPACE)


def forward_with_input_derivatives(
    params: ParamSet | BoundNet,
    x,
    wrt: Iterable[int] = (TIME, SPACE),
    tape: Tape | None = None,
) -> list[OutputTriple]:
    """Forward pass that also carries d(output)/d(input_k) for each k in ``wrt``.

    Affine layers map derivative rows through the weight matrix without the
    bias; tanh layers scale them by ``1 - a**2``. Everything is recorded on the
    tape, so backward() yields exact parameter gradients of the derivatives.
    """
    net = _resolve(params, tape)
    tape = net.tape
    config = net.params.config
    wrt = sorted(set(int(k) for k in wrt))
    if any(not 0 <= k < config.input_dim for k in wrt):
        raise ValueError(f"derivative dims {wrt} outside input dimension {config.input_dim}")
    a = tape.leaf(_as_batch(x, config.input_dim))
    # d(input)/d(input_k) is the unit row e_k repeated over the batch.
    da = {}
    for k in wrt:
        unit = np.zeros(a.value.shape)
        unit[:, k] = 1.0
        da[k] = tape.leaf(unit)
    last = len(net.leaves) - 1
    one = tape.leaf(1.0)
    for i, (w, b) in enumerate(net.leaves):
        a = a @ w + b
        da = {k: d @ w for k, d in da.items()}
        if i < last:
            a = a.tanh()
            slope = one - a.square()
            da = {k: slope * d for k, d in da.items()}
    out = []
    for c in range(config.output_dim):
        out.append(OutputTriple(a.column(c), {k: d.column(c) for k, d in da.items()}))
    return out


def predict(params: ParamSet, x) -> np.ndarray:
    """Plain numpy evaluation, (N, input_dim) -> (N, output_dim). No tape."""
    a = _as_batch(x, params.config.input_dim)
    layers = params.layers()
    for i, (w, b) in enumerate(layers):
        a = a @ w + b
        if i < len(layers) - 1:
            a = np.tanh(a)
    return a
