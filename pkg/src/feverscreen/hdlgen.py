"""Fixed-point compilation of a trained network and Verilog emission.

:func:`fixed_point_forward_int` is the reference semantics of the emitted
module: both use the same round-half-even rescale, saturation, and
tansig lookup table, so they agree bit for bit.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, IdentifierError
from .nn import Network, Normalization, model_fingerprint

LUT_SIZE = 256
LUT_RANGE = 4.0  # tansig pre-activations are clamped to [-4, 4)

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")
_KEYWORDS = frozenset("""
always and assign begin buf case casex casez cmos deassign default defparam
disable edge else end endcase endfunction endmodule endprimitive endspecify
endtable endtask event for force forever fork function generate genvar highz0
highz1 if ifnone initial inout input integer join large localparam macromodule
medium module nand negedge nmos nor not notif0 notif1 or output parameter pmos
posedge primitive pull0 pull1 pulldown pullup rcmos real realtime reg release
repeat rnmos rpmos rtran rtranif0 rtranif1 scalared signed small specify
specparam strong0 strong1 supply0 supply1 table task time tran tranif0 tranif1
tri tri0 tri1 triand trior trireg unsigned vectored wait wand weak0 weak1 while
wire wor xnor xor""".split())


@dataclass(frozen=True)
class QFormat:
    """Signed two's-complement fixed point with ``frac_bits`` fraction bits."""

    total_bits: int = 16
    frac_bits: int = 12

    def __post_init__(self):
        t, f = self.total_bits, self.frac_bits
        if not 0 < f < t <= 32:
            raise ConfigError(f"need 0 < frac_bits < total_bits <= 32, got Q{t - f}.{f}")
        # the clamped LUT input range [-4, 4) must be representable
        if t - f < 3:
            raise ConfigError(f"Q{t - f}.{f} has fewer than 3 integer bits; "
                              "the tansig table needs the range [-4, 4)")

    @property
    def name(self) -> str:
        return f"Q{self.total_bits - self.frac_bits}.{self.frac_bits}"

    @property
    def one(self) -> int:
        return 1 << self.frac_bits

    @property
    def min_int(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_int(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def resolution(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def range(self) -> tuple[float, float]:
        return self.min_int * self.resolution, self.max_int * self.resolution

    def quantize(self, values) -> tuple[np.ndarray, int]:
        """Round half to even onto the grid and saturate.

        Returns ``(int64 array, number of saturated entries)``.
        """
        scaled = np.rint(np.asarray(values, dtype=float) * self.one)
        sat = int(np.sum((scaled < self.min_int) | (scaled > self.max_int)))
        return np.clip(scaled, self.min_int, self.max_int).astype(np.int64), sat

    def dequantize(self, ints) -> np.ndarray:
        return np.asarray(ints, dtype=float) * self.resolution


@dataclass(frozen=True)
class QLayer:
    weight: tuple  # tuple of row tuples, Python ints
    bias: tuple
    activation: str

    @property
    def fan_in(self) -> int:
        return len(self.weight[0])

    @property
    def fan_out(self) -> int:
        return len(self.weight)


@dataclass(frozen=True)
class QuantizedModel:
    qformat: QFormat
    layers: tuple
    lut: tuple
    normalization: Normalization
    fingerprint: str
    saturated: int = 0
    saturated_params: tuple = field(default=(), repr=False)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].fan_in] + [l.fan_out for l in self.layers]

    def n_constants(self) -> int:
        return sum(l.fan_in * l.fan_out + l.fan_out for l in self.layers)


def build_lut(q: QFormat) -> tuple:
    """Quantised tansig at the midpoint of each of the 256 input buckets."""
    width = 2 * LUT_RANGE / LUT_SIZE
    mids = -LUT_RANGE + (np.arange(LUT_SIZE) + 0.5) * width
    ints, _ = q.quantize(np.tanh(mids))
    return tuple(int(v) for v in ints)


def quantize_model(net: Network, q: QFormat = QFormat()) -> QuantizedModel:
    """Compile ``net`` to integer parameters; out-of-range values saturate."""
    layers = []
    saturated = 0
    where = []
    for k, layer in enumerate(net.layers):
        w, sw = q.quantize(layer.weight)
        b, sb = q.quantize(layer.bias)
        if sw or sb:
            where.append((k, sw, sb))
        saturated += sw + sb
        layers.append(QLayer(tuple(tuple(int(v) for v in row) for row in w),
                             tuple(int(v) for v in b), layer.activation))
    return QuantizedModel(q, tuple(layers), build_lut(q), net.normalization,
                          model_fingerprint(net), saturated, tuple(where))


def rne_shift(value: int, shift: int) -> int:
    """``value / 2**shift`` rounded half to even (arithmetic, any sign)."""
    if shift == 0:
        return value
    q = value >> shift
    rem = value & ((1 << shift) - 1)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


def _saturate(v: int, q: QFormat) -> int:
    return max(q.min_int, min(q.max_int, v))


def lut_index(pre: int, q: QFormat) -> int:
    lo = -int(LUT_RANGE) << q.frac_bits
    c = max(lo, min(-lo - 1, pre))
    return ((c - lo) * LUT_SIZE) >> (q.frac_bits + 3)


def fixed_point_forward_int(qm: QuantizedModel, x_int) -> list[int]:
    """Integer-only inference on already-quantised inputs."""
    q = qm.qformat
    x = [int(v) for v in x_int]
    if len(x) != qm.layers[0].fan_in:
        raise DimensionError(f"model expects {qm.layers[0].fan_in} inputs, got {len(x)}")
    f = q.frac_bits
    for layer in qm.layers:
        out = []
        for row, b in zip(layer.weight, layer.bias):
            acc = b << f
            for w, xi in zip(row, x):
                acc += w * xi
            y = _saturate(rne_shift(acc, f), q)
            if layer.activation == "tansig":
                y = qm.lut[lut_index(y, q)]
            out.append(y)
        x = out
    return x


def quantize_inputs(qm: QuantizedModel, x) -> list[int]:
    ints, _ = qm.qformat.quantize(x)
    return [int(v) for v in np.ravel(ints)]


def fixed_point_forward(qm: QuantizedModel, x) -> np.ndarray:
    """Emulate the hardware on a normalised input vector; returns real outputs."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionError("fixed_point_forward takes a single input vector")
    return qm.qformat.dequantize(fixed_point_forward_int(qm, quantize_inputs(qm, x)))


def fixed_point_scores(qm: QuantizedModel, windows) -> np.ndarray:
    """Emulated scores for an (n, L) array of raw-reading windows."""
    xs = qm.normalization.apply(np.asarray(windows, dtype=float))
    return np.array([fixed_point_forward(qm, x)[0] for x in xs])


# --- Verilog emission -----------------------------------------------------


def _lit(v: int, bits: int) -> str:
    if v >= 0:
        return f"{bits}'sd{v}"
    if v == -(1 << (bits - 1)):
        return f"-{bits + 1}'sd{-v}"
    return f"-{bits}'sd{-v}"


def _case_function(name, ret_bits, idx_bits, entries, comment):
    lines = [f"    // {comment}",
             f"    function signed [{ret_bits - 1}:0] {name};",
             f"        input [{idx_bits - 1}:0] idx;",
             "        begin",
             "            case (idx)"]
    for k, value in entries:
        lines.append(f"                {idx_bits}'d{k}: {name} = {value};")
    lines += [f"                default: {name} = {ret_bits}'sd0;",
              "            endcase",
              "        end",
              "    endfunction",
              ""]
    return lines


def _small_case(name, bits, idx_bits, values):
    lines = [f"    function [{bits - 1}:0] {name};",
             f"        input [{idx_bits - 1}:0] idx;",
             "        begin",
             "            case (idx)"]
    for k, v in enumerate(values):
        lines.append(f"                {idx_bits}'d{k}: {name} = {bits}'d{v};")
    lines += [f"                default: {name} = {bits}'d0;",
              "            endcase",
              "        end",
              "    endfunction",
              ""]
    return lines


def emit_verilog(qm: QuantizedModel, module_name: str = "fever_detector") -> str:
    """Render ``qm`` as one self-contained Verilog-2001 module.

    Interface: ``clk``, synchronous ``rst``, clock enable ``ce``, ``start``
    pulse, flattened signed input bus (element ``i`` at
    ``in_bus[T*i +: T]``), signed ``score`` and a one-cycle ``done``.
    The datapath performs one multiply-accumulate per enabled clock,
    walking the layers in order.
    """
    if not _IDENT.match(module_name) or module_name in _KEYWORDS:
        raise IdentifierError(f"{module_name!r} is not a valid Verilog identifier")
    if qm.dims[-1] != 1:
        raise DimensionError("hardware emission supports single-output networks only")
    q = qm.qformat
    T, F = q.total_bits, q.frac_bits
    n_in = qm.dims[0]
    n_layers = len(qm.layers)
    max_width = max(qm.dims)
    max_fan_in = max(l.fan_in for l in qm.layers)
    acc_bits = 2 * T + max(1, math.ceil(math.log2(max_fan_in + 1))) + 2
    idx_bits = max(1, math.ceil(math.log2(max(qm.n_constants(), 2))))
    cnt_bits = max(1, math.ceil(math.log2(max_width + 1)))
    lay_bits = max(1, math.ceil(math.log2(n_layers + 1)))
    lut_lo = int(LUT_RANGE) << F

    dims_txt = " -> ".join([str(n_in)] + [f"{l.fan_out} ({l.activation})" for l in qm.layers])
    out = [
        f"// {module_name}.v -- generated by feverscreen.hdlgen; do not edit.",
        f"// source model sha256: {qm.fingerprint}",
        f"// number format: signed {q.name} ({T} bits, {F} fractional), "
        "round-half-even rescale, saturating",
        f"// layers: {dims_txt}",
        f"// inputs arrive normalised: x = (reading - {qm.normalization.offset!r}) / "
        f"{qm.normalization.scale!r}",
        f"// saturated parameters: {qm.saturated}",
        "`timescale 1ns / 1ps",
        "",
        f"module {module_name} (",
        "    input  wire clk,",
        "    input  wire rst,",
        "    input  wire ce,",
        "    input  wire start,",
        f"    input  wire [{T * n_in - 1}:0] in_bus,",
        f"    output reg  signed [{T - 1}:0] score,",
        "    output reg  done",
        ");",
        "",
    ]

    w_entries, b_entries = [], []
    w_base, b_base = [], []
    out.append("    // parameters, row-major: W<layer>_<neuron>_<input>, B<layer>_<neuron>")
    for k, layer in enumerate(qm.layers):
        w_base.append(len(w_entries))
        b_base.append(len(b_entries))
        for o, row in enumerate(layer.weight):
            for i, w in enumerate(row):
                name = f"W{k}_{o}_{i}"
                out.append(f"    localparam signed [{T - 1}:0] {name} = {_lit(w, T)};")
                w_entries.append((len(w_entries), name))
        for o, b in enumerate(layer.bias):
            name = f"B{k}_{o}"
            out.append(f"    localparam signed [{T - 1}:0] {name} = {_lit(b, T)};")
            b_entries.append((len(b_entries), name))
    out.append("")

    out += _case_function("weight_rom", T, idx_bits, w_entries, "weight memory")
    out += _case_function("bias_rom", T, idx_bits, b_entries, "bias memory")
    out += _case_function("tansig_lut", T, 8,
                          [(k, _lit(v, T)) for k, v in enumerate(qm.lut)],
                          f"tansig at bucket midpoints over [-{LUT_RANGE:g}, {LUT_RANGE:g})")
    out += _small_case("fan_in", cnt_bits, lay_bits, [l.fan_in for l in qm.layers])
    out += _small_case("fan_out", cnt_bits, lay_bits, [l.fan_out for l in qm.layers])
    out += _small_case("w_base", idx_bits, lay_bits, w_base)
    out += _small_case("b_base", idx_bits, lay_bits, b_base)
    out += _small_case("is_tansig", 1, lay_bits,
                       [int(l.activation == "tansig") for l in qm.layers])

    out += [
        "    // accumulator -> output format: round half to even, then saturate",
        f"    function signed [{T - 1}:0] rescale;",
        f"        input signed [{acc_bits - 1}:0] a;",
        f"        reg signed [{acc_bits - 1}:0] q;",
        "        begin",
        f"            q = a >>> {F};",
        f"            if (a[{F - 1}:0] > {F}'d{1 << (F - 1)} || "
        f"(a[{F - 1}:0] == {F}'d{1 << (F - 1)} && q[0]))",
        "                q = q + 1;",
        f"            if (q > {_lit(q.max_int, acc_bits)})",
        f"                rescale = {_lit(q.max_int, T)};",
        f"            else if (q < {_lit(q.min_int, acc_bits)})",
        f"                rescale = {_lit(q.min_int, T)};",
        "            else",
        f"                rescale = q[{T - 1}:0];",
        "        end",
        "    endfunction",
        "",
        "    // bucket of a pre-activation clamped to the table range",
        "    function [7:0] lut_index;",
        f"        input signed [{T - 1}:0] v;",
        f"        reg signed [{acc_bits - 1}:0] c;",
        "        begin",
        f"            c = v;",
        f"            if (c < {_lit(-lut_lo, acc_bits)}) c = {_lit(-lut_lo, acc_bits)};",
        f"            if (c > {_lit(lut_lo - 1, acc_bits)}) c = {_lit(lut_lo - 1, acc_bits)};",
        f"            c = ((c + {_lit(lut_lo, acc_bits)}) <<< 8) >>> {F + 3};",
        "            lut_index = c[7:0];",
        "        end",
        "    endfunction",
        "",
        f"    reg signed [{T - 1}:0] act_in  [0:{max_width - 1}];",
        f"    reg signed [{T - 1}:0] act_out [0:{max_width - 1}];",
        f"    reg signed [{acc_bits - 1}:0] acc;",
        f"    reg signed [{T - 1}:0] y;",
        f"    reg [{lay_bits - 1}:0] layer;",
        f"    reg [{cnt_bits - 1}:0] neuron;",
        f"    reg [{cnt_bits - 1}:0] tap;",
        "    reg [1:0] state;  // 0 idle, 1 multiply-accumulate, 2 write neuron, 3 next layer",
        "    integer k;",
        "",
        "    always @(posedge clk) begin",
        "        if (rst) begin",
        "            state <= 2'd0;",
        "            done <= 1'b0;",
        f"            score <= {T}'sd0;",
        "        end else if (ce) begin",
        "            done <= 1'b0;",
        "            case (state)",
        "            2'd0: if (start) begin",
        f"                for (k = 0; k < {n_in}; k = k + 1)",
        f"                    act_in[k] <= in_bus[{T}*k +: {T}];",
        "                layer <= 0;",
        "                neuron <= 0;",
        "                tap <= 0;",
        f"                acc <= bias_rom(b_base(0)) <<< {F};",
        "                state <= 2'd1;",
        "            end",
        "            2'd1: begin",
        "                acc <= acc + weight_rom(w_base(layer) + neuron * fan_in(layer) + tap)"
        " * act_in[tap];",
        "                if (tap == fan_in(layer) - 1)",
        "                    state <= 2'd2;",
        "                else",
        "                    tap <= tap + 1;",
        "            end",
        "            2'd2: begin",
        "                y = rescale(acc);",
        "                if (is_tansig(layer))",
        "                    y = tansig_lut(lut_index(y));",
        "                act_out[neuron] <= y;",
        "                tap <= 0;",
        "                if (neuron == fan_out(layer) - 1) begin",
        "                    state <= 2'd3;",
        "                end else begin",
        "                    neuron <= neuron + 1;",
        f"                    acc <= bias_rom(b_base(layer) + neuron + 1) <<< {F};",
        "                    state <= 2'd1;",
        "                end",
        "            end",
        "            2'd3: begin",
        f"                for (k = 0; k < {max_width}; k = k + 1)",
        "                    act_in[k] <= act_out[k];",
        f"                if (layer == {n_layers - 1}) begin",
        "                    score <= act_out[0];",
        "                    done <= 1'b1;",
        "                    state <= 2'd0;",
        "                end else begin",
        "                    layer <= layer + 1;",
        "                    neuron <= 0;",
        f"                    acc <= bias_rom(b_base(layer + 1)) <<< {F};",
        "                    state <= 2'd1;",
        "                end",
        "            end",
        "            endcase",
        "        end",
        "    end",
        "",
        "endmodule",
        "",
    ]
    return "\n".join(out)


_CONST = re.compile(r"^\s*localparam\s+signed\s+\[(\d+):0\]\s+(\w+)\s*=\s*(-?)(\d+)'sd(\d+);",
                    re.M)


def parse_verilog_constants(text: str) -> dict[str, int]:
    """Integer value of every ``localparam`` constant in emitted text."""
    return {m.group(2): (-1 if m.group(3) else 1) * int(m.group(5))
            for m in _CONST.finditer(text)}


def manifest(qm: QuantizedModel, module_name: str) -> dict:
    return {
        "module": module_name,
        "dims": qm.dims,
        "activations": [l.activation for l in qm.layers],
        "qformat": {"name": qm.qformat.name, "total_bits": qm.qformat.total_bits,
                    "frac_bits": qm.qformat.frac_bits},
        "saturation_count": qm.saturated,
        "fingerprint": qm.fingerprint,
        "normalization": {"offset": qm.normalization.offset,
                          "scale": qm.normalization.scale},
        "lut": {"entries": LUT_SIZE, "range": [-LUT_RANGE, LUT_RANGE]},
    }


def write_hdl(qm: QuantizedModel, path, module_name: str | None = None) -> tuple[Path, Path]:
    """Write ``<module>.v`` and its ``.manifest.json`` sidecar."""
    path = Path(path)
    module_name = module_name or path.stem
    text = emit_verilog(qm, module_name)
    path.write_text(text, encoding="utf-8")
    side = path.with_name(path.stem + ".manifest.json")
    side.write_text(json.dumps(manifest(qm, module_name), indent=1) + "\n", encoding="utf-8")
    return path, side
