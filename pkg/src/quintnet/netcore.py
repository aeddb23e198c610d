"""Shift-free ReLU networks over the weight alphabet {0, +-1/2, +-1, 2}.

A network is ``W_L o relu o W_{L-1} o ... o relu o W_0`` applied to the
raw input vector; there are no bias vectors.  Builders that need a
constant feed it in as an input channel holding 1.

Weights are stored densely as ``int8`` arrays holding *twice* the weight
value (so the alphabet becomes {0, +-1, +-2, 4}).  This keeps entries in
one byte and turns exact evaluation into integer matrix products.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import jsonschema
import numpy as np
import scipy.sparse as sp

from .dyadic import Dyadic


class QuintWeight(enum.Enum):
    ZERO = ("0", 0)
    PLUS_HALF = ("h", 1)
    MINUS_HALF = ("-h", -1)
    PLUS_ONE = ("1", 2)
    MINUS_ONE = ("-1", -2)
    TWO = ("2", 4)

    def __init__(self, symbol: str, doubled: int) -> None:
        self.symbol = symbol
        self.doubled = doubled

    @property
    def number(self) -> Fraction:
        return Fraction(self.doubled, 2)


_BY_DOUBLED = {w.doubled: w for w in QuintWeight}
_BY_SYMBOL = {w.symbol: w for w in QuintWeight}
_ALLOWED_DOUBLED = np.array(sorted(_BY_DOUBLED), dtype=np.int64)


class NetworkError(ValueError):
    """Base class for structural problems with a network."""


class AlphabetError(NetworkError):
    def __init__(self, layer: int, row: int, col: int, value=None, message: str | None = None) -> None:
        self.location = (layer, row, col)
        self.value = value
        super().__init__(message or f"weight {value!s} at (layer={layer}, row={row}, col={col}) "
                         f"is outside {{0, +-1/2, +-1, 2}}")


class ShapeError(NetworkError):
    pass


class DimensionError(NetworkError):
    pass


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    message: str = ""
    location: tuple[int, int, int] | None = None

    def __bool__(self) -> bool:
        return self.ok


def _to_doubled(value) -> int:
    """Map one weight (number, symbol or QuintWeight) to its doubled code."""
    if isinstance(value, QuintWeight):
        return value.doubled
    if isinstance(value, str):
        if value in _BY_SYMBOL:
            return _BY_SYMBOL[value].doubled
        raise ValueError(value)
    if isinstance(value, Dyadic):
        value = value.as_fraction()
    frac = Fraction(value)
    twice = 2 * frac
    if twice.denominator != 1 or int(twice) not in _BY_DOUBLED:
        raise ValueError(value)
    return int(twice)


def _check(widths: Sequence[int], matrices: Sequence) -> tuple[ValidationReport, list[np.ndarray]]:
    widths = [int(w) for w in widths]
    if not matrices:
        return ValidationReport(False, "network has no weight matrices"), []
    if len(matrices) != len(widths) - 1:
        return ValidationReport(False, f"{len(matrices)} matrices but {len(widths)} widths"), []
    if any(w < 1 for w in widths):
        return ValidationReport(False, f"widths must be positive, got {widths}"), []
    coded = []
    for i, mat in enumerate(matrices):
        if isinstance(mat, np.ndarray) and mat.dtype == np.int8:
            arr = mat
            if arr.shape != (widths[i + 1], widths[i]):
                return ValidationReport(
                    False, f"matrix {i} has shape {arr.shape}, expected "
                    f"{(widths[i + 1], widths[i])}", (i, -1, -1)), []
            bad = np.argwhere(~np.isin(arr, _ALLOWED_DOUBLED))
            if bad.size:
                r, c = (int(v) for v in bad[0])
                return ValidationReport(
                    False, str(AlphabetError(i, r, c, Fraction(int(arr[r, c]), 2))), (i, r, c)), []
            coded.append(arr)
            continue
        rows = list(mat)
        if len(rows) != widths[i + 1]:
            return ValidationReport(
                False, f"matrix {i} has {len(rows)} rows, expected {widths[i + 1]}", (i, -1, -1)), []
        arr = np.zeros((widths[i + 1], widths[i]), dtype=np.int8)
        for r, row in enumerate(rows):
            row = list(row)
            if len(row) != widths[i]:
                return ValidationReport(
                    False, f"matrix {i} row {r} has {len(row)} columns, expected {widths[i]}",
                    (i, r, -1)), []
            for c, value in enumerate(row):
                try:
                    arr[r, c] = _to_doubled(value)
                except (ValueError, TypeError):
                    return ValidationReport(False, str(AlphabetError(i, r, c, value)), (i, r, c)), []
        coded.append(arr)
    return ValidationReport(True), coded


@dataclass(frozen=True, eq=False)
class QuintNet:
    """Immutable network: ``widths`` (p_0, ..., p_{L+1}) and L+1 matrices.

    ``matrices`` may be given as nested sequences of numbers/symbols or as
    doubled-code ``int8`` arrays; both are validated.
    """

    widths: tuple[int, ...]
    matrices: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self) -> None:
        report, coded = _check(self.widths, self.matrices)
        if not report:
            if report.location is not None and report.location[1] >= 0 and report.location[2] >= 0:
                raise AlphabetError(*report.location, message=report.message)
            raise ShapeError(report.message)
        for arr in coded:
            arr.setflags(write=False)
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "matrices", tuple(coded))

    @classmethod
    def from_codes(cls, matrices: Sequence[np.ndarray], label: str = "") -> QuintNet:
        mats = [np.ascontiguousarray(m, dtype=np.int8) for m in matrices]
        widths = [mats[0].shape[1]] + [m.shape[0] for m in mats]
        return cls(tuple(widths), tuple(mats), label)

    @property
    def depth(self) -> int:
        return len(self.matrices) - 1

    @property
    def in_width(self) -> int:
        return self.widths[0]

    @property
    def out_width(self) -> int:
        return self.widths[-1]

    def weights(self, layer: int) -> np.ndarray:
        """Matrix ``layer`` as an array of Fractions."""
        return np.vectorize(lambda v: Fraction(int(v), 2), otypes=[object])(self.matrices[layer])

    def __eq__(self, other) -> bool:
        if not isinstance(other, QuintNet):
            return NotImplemented
        return (self.widths == other.widths
                and all(np.array_equal(a, b) for a, b in zip(self.matrices, other.matrices)))

    def __hash__(self) -> int:
        return hash((self.widths, tuple(m.tobytes() for m in self.matrices)))

    @cached_property
    def _sparse(self) -> tuple[sp.csr_matrix, ...]:
        return tuple(sp.csr_matrix(m.astype(np.float64)) for m in self.matrices)

    @cached_property
    def _row_l1(self) -> tuple[int, ...]:
        return tuple(int(np.abs(m.astype(np.int64)).sum(axis=1).max(initial=0)) for m in self.matrices)


@dataclass(frozen=True)
class NetStats:
    depth: int
    max_width: int
    l0: int
    l1: Dyadic

    def as_dict(self) -> dict:
        return {"depth": self.depth, "max_width": self.max_width, "l0": self.l0, "l1": str(self.l1)}


def validate(net, widths: Sequence[int] | None = None) -> ValidationReport:
    """Check alphabet membership and shapes.

    Accepts a QuintNet or a raw list of matrices (numbers, symbols) plus
    ``widths``; the report names the first offending coordinate.
    """
    if isinstance(net, QuintNet):
        report, _ = _check(net.widths, net.matrices)
        return report
    if widths is None:
        mats = [list(m) for m in net]
        if not mats or not mats[0]:
            return ValidationReport(False, "network has no weight matrices")
        widths = [len(list(mats[0][0]))] + [len(m) for m in mats]
        net = mats
    report, _ = _check(widths, list(net))
    return report


# --- exact evaluation -----------------------------------------------------

_FLOAT_EXACT = 2**53
_INT64_SAFE = 2**62


def _max_abs(ints: np.ndarray) -> int:
    if ints.size == 0:
        return 0
    if ints.dtype == object:
        return max(abs(int(v)) for v in ints.flat)
    return int(np.abs(ints).max())


def _trailing_zeros(ints: np.ndarray) -> int | None:
    if ints.dtype == object:
        acc = 0
        for v in ints.flat:
            acc |= abs(int(v))
    else:
        acc = int(np.bitwise_or.reduce(np.abs(ints), axis=None)) if ints.size else 0
    if acc == 0:
        return None
    return (acc & -acc).bit_length() - 1


def _layer_product(net: QuintNet, i: int, ints: np.ndarray) -> np.ndarray:
    """Integer product (2 W_i) @ ints, exact, choosing the cheapest safe path."""
    bound = _max_abs(ints) * net._row_l1[i]
    if bound < _FLOAT_EXACT:
        out = net._sparse[i] @ ints.astype(np.float64)
        return np.rint(out).astype(np.int64)
    if bound < _INT64_SAFE and ints.dtype != object:
        return net._sparse[i].astype(np.int64) @ ints.astype(np.int64)
    csr = net._sparse[i]
    src = ints.astype(object)
    out = np.zeros((csr.shape[0], src.shape[1]), dtype=object)
    for r in range(csr.shape[0]):
        lo, hi = csr.indptr[r], csr.indptr[r + 1]
        acc = np.zeros(src.shape[1], dtype=object)
        for c, w in zip(csr.indices[lo:hi], csr.data[lo:hi]):
            acc = acc + int(w) * src[c]
        out[r] = acc
    return out


def _demote(ints: np.ndarray) -> np.ndarray:
    if ints.dtype == object and _max_abs(ints) < _INT64_SAFE:
        return ints.astype(np.int64)
    return ints


def forward_exact_ints(net: QuintNet, ints: np.ndarray, exponent: int) -> tuple[np.ndarray, int]:
    """Run the network on a batch held as integers over a shared ``2**exponent``.

    ``ints`` has shape (p_0, batch).  Returns (ints, exponent) for the
    output layer, with the exponent reduced as far as the batch allows.
    """
    if ints.shape[0] != net.in_width:
        raise DimensionError(f"input width {ints.shape[0]} != p_0 = {net.in_width}")
    last = len(net.matrices) - 1
    for i in range(len(net.matrices)):
        ints = _layer_product(net, i, ints)
        exponent += 1
        if i < last:
            ints = np.maximum(ints, 0) if ints.dtype != object else np.where(ints > 0, ints, 0).astype(object)
        tz = _trailing_zeros(ints)
        if tz is None:
            exponent = 0
        elif exponent > 0 and tz > 0:
            shift = min(tz, exponent)
            ints = ints >> shift if ints.dtype != object else np.vectorize(lambda v: int(v) >> shift, otypes=[object])(ints)
            exponent -= shift
        ints = _demote(ints)
    return ints, exponent


def pack_inputs(xs: Sequence[Sequence]) -> tuple[np.ndarray, int]:
    """Batch of dyadic vectors -> (ints of shape (p_0, batch), shared exponent)."""
    rows = [[Dyadic.coerce(v) for v in x] for x in xs]
    if not rows:
        raise DimensionError("empty batch")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise DimensionError("ragged input batch")
    exponent = max((v.exponent for r in rows for v in r), default=0)
    big = any(abs(v.mantissa) >= _INT64_SAFE >> 8 or exponent - v.exponent > 50 for r in rows for v in r)
    dtype = object if big else np.int64
    ints = np.array([[v.mantissa << (exponent - v.exponent) for v in r] for r in rows], dtype=dtype).T
    return _demote(ints), exponent


def unpack_outputs(ints: np.ndarray, exponent: int) -> list[list[Dyadic]]:
    return [[Dyadic(int(v), exponent) for v in col] for col in ints.T]


def eval_exact_batch(net: QuintNet, xs: Sequence[Sequence]) -> list[list[Dyadic]]:
    ints, e = pack_inputs(xs)
    out, e = forward_exact_ints(net, ints, e)
    return unpack_outputs(out, e)


def eval_exact(net: QuintNet, x: Sequence) -> list[Dyadic]:
    """Exact output of ``net`` at one dyadic input vector."""
    if len(x) != net.in_width:
        raise DimensionError(f"input length {len(x)} != p_0 = {net.in_width}")
    return eval_exact_batch(net, [x])[0]


def eval_float(net: QuintNet, x) -> np.ndarray:
    """binary64 evaluation; ``x`` is one vector or a (batch, p_0) array."""
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    batch = arr[None, :] if single else arr
    if batch.shape[1] != net.in_width:
        raise DimensionError(f"input width {batch.shape[1]} != p_0 = {net.in_width}")
    h = batch.T
    last = len(net.matrices) - 1
    for i, w in enumerate(net._sparse):
        h = (w @ h) * 0.5
        if i < last:
            np.maximum(h, 0.0, out=h)
    out = h.T
    return out[0] if single else out


# --- combinators ----------------------------------------------------------

def identity_net(width: int, depth: int = 0, label: str = "identity") -> QuintNet:
    eye = 2 * np.eye(width, dtype=np.int8)
    return QuintNet.from_codes([eye] * (depth + 1), label)


def compose(first: QuintNet, second: QuintNet, label: str | None = None) -> QuintNet:
    """Network for ``second(relu(first(x)))``."""
    if first.out_width != second.in_width:
        raise ShapeError(f"cannot compose: output width {first.out_width} != input width {second.in_width}")
    return QuintNet.from_codes(first.matrices + second.matrices,
                               label if label is not None else f"{second.label}o{first.label}")


def chain(*nets: QuintNet, label: str = "") -> QuintNet:
    out = nets[0]
    for n in nets[1:]:
        out = compose(out, n)
    return QuintNet.from_codes(out.matrices, label or out.label)


def parallel(nets: Sequence[QuintNet], shared_input: bool = False, label: str = "parallel") -> QuintNet:
    """Stack equal-depth networks side by side.

    With ``shared_input`` every block reads the same input vector;
    otherwise inputs and outputs are concatenated.
    """
    nets = list(nets)
    if not nets:
        raise ShapeError("parallel needs at least one network")
    depth = nets[0].depth
    if any(n.depth != depth for n in nets):
        raise ShapeError(f"depth mismatch: {[n.depth for n in nets]}")
    if shared_input and any(n.in_width != nets[0].in_width for n in nets):
        raise ShapeError(f"input width mismatch under shared input: {[n.in_width for n in nets]}")
    mats = []
    for i in range(depth + 1):
        blocks = [n.matrices[i] for n in nets]
        if i == 0 and shared_input:
            mats.append(np.vstack(blocks))
        else:
            mats.append(sp.block_diag(blocks, format="csr").toarray().astype(np.int8))
    return QuintNet.from_codes(mats, label)


def extend_depth(net: QuintNet, extra: int) -> QuintNet:
    """Append ``extra`` identity hidden layers; exact on nonnegative outputs."""
    if extra <= 0:
        return net
    eye = 2 * np.eye(net.out_width, dtype=np.int8)
    return QuintNet.from_codes(net.matrices + (eye,) * extra, net.label)


def select(net: QuintNet, columns: Sequence[int], in_width: int) -> QuintNet:
    """Rewire ``net`` to read input channel ``columns[j]`` as its j-th input."""
    if len(columns) != net.in_width:
        raise ShapeError(f"{len(columns)} columns for input width {net.in_width}")
    if len(set(columns)) != len(columns):
        raise ShapeError("select needs distinct columns")
    first = np.zeros((net.widths[1], in_width), dtype=np.int8)
    first[:, list(columns)] = net.matrices[0]
    return QuintNet.from_codes((first,) + net.matrices[1:], net.label)


def pad_to_depth(nets: Iterable[QuintNet]) -> list[QuintNet]:
    nets = list(nets)
    depth = max(n.depth for n in nets)
    return [extend_depth(n, depth - n.depth) for n in nets]


# --- statistics and serialization -----------------------------------------

def stats(net: QuintNet) -> NetStats:
    l0 = 0
    l1_doubled = 0
    for m in net.matrices:
        m64 = m.astype(np.int64)
        l0 += int(np.count_nonzero(m64))
        l1_doubled += int(np.abs(m64).sum())
    return NetStats(depth=net.depth, max_width=max(net.widths), l0=l0, l1=Dyadic(l1_doubled, 1))


NET_SCHEMA = {
    "type": "object",
    "required": ["version", "widths", "label", "matrices"],
    "properties": {
        "version": {"const": 1},
        "widths": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2},
        "label": {"type": "string"},
        # entries are checked by _decode_matrix; recursing here is slow for big nets
        "matrices": {"type": "array", "minItems": 1, "items": {"type": "array"}},
    },
}


_SYMBOL_TABLE = np.array([_BY_DOUBLED.get(v - 2, QuintWeight.ZERO).symbol for v in range(7)])


def serialize(net: QuintNet) -> dict:
    return {
        "version": 1,
        "widths": list(net.widths),
        "label": net.label,
        "matrices": [_SYMBOL_TABLE[m.astype(np.int64) + 2].tolist() for m in net.matrices],
    }


def _decode_matrix(i: int, raw) -> np.ndarray:
    if not raw or not all(isinstance(row, list) for row in raw):
        raise NetworkError(f"schema violation: matrix {i} must be a non-empty list of rows")
    if len({len(row) for row in raw}) != 1:
        raise ShapeError(f"matrix {i} is ragged")
    arr = np.asarray(raw, dtype=object)
    if arr.ndim != 2:
        raise NetworkError(f"schema violation: matrix {i} entries must be symbols")
    flat = arr.ravel()
    if set(map(type, flat)) != {str}:
        bad = next(v for v in flat if not isinstance(v, str))
        raise NetworkError(f"schema violation: matrix {i} holds non-string {bad!r}")
    syms, inverse = np.unique(flat.astype(str), return_inverse=True)
    for k, sym in enumerate(syms):
        if sym not in _BY_SYMBOL:
            pos = int(np.flatnonzero(inverse == k)[0])
            raise AlphabetError(i, *divmod(pos, arr.shape[1]), sym)
    lookup = np.array([_BY_SYMBOL[s].doubled for s in syms], dtype=np.int8)
    return lookup[inverse].reshape(arr.shape)


def deserialize(doc: dict) -> QuintNet:
    """Inverse of :func:`serialize`; rejects schema and alphabet violations."""
    try:
        jsonschema.validate(doc, NET_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise NetworkError(f"schema violation: {exc.message}") from None
    mats = [_decode_matrix(i, m) for i, m in enumerate(doc["matrices"])]
    return QuintNet(tuple(doc["widths"]), tuple(mats), doc["label"])


def dumps(net: QuintNet) -> str:
    return json.dumps(serialize(net), separators=(",", ":"))


def loads(text: str) -> QuintNet:
    return deserialize(json.loads(text))


def save(net: QuintNet, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(net))
        fh.write("\n")


def load(path) -> QuintNet:
    with open(path) as fh:
        return loads(fh.read())
