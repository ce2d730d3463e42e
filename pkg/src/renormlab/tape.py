"""Flat evaluation tapes for expression trees.

An expression compiles once into a postfix program over a complex stack
("tape").  The hot loop, evaluating a tape over a batch of points, has two
interchangeable implementations:

* ``renormlab._ctape``, a compiled (Cython) per-point stack machine,
* a NumPy fallback that interprets the same tape with vectorized ops.

Which one runs is decided at import time: the compiled kernel is used when
present, unless ``RENORMLAB_BACKEND=python`` forces the fallback.  Both
execute the identical instruction sequence with the same operation order, so
results agree to the last few ulps; integer powers are expanded as the same
left-to-right multiplication chain on both sides.
"""

from __future__ import annotations

import os

import numpy as np

OP_CONST = 0
OP_COORD = 1
OP_Z = 2
OP_ADD = 3
OP_MUL = 4
OP_EXP = 5
OP_POW = 6
OP_RE = 7
OP_IM = 8

MAX_STACK = 64

try:  # compiled kernel is optional; fall back to the NumPy interpreter
    from ._ctape import eval_tape as _c_eval_tape

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _c_eval_tape = None
    HAVE_COMPILED = False

_FORCED = os.environ.get("RENORMLAB_BACKEND", "").strip().lower()
if _FORCED not in ("", "python", "compiled"):
    raise ValueError(f"RENORMLAB_BACKEND must be 'python' or 'compiled', got {_FORCED!r}")
if _FORCED == "compiled" and not HAVE_COMPILED:
    raise ImportError("RENORMLAB_BACKEND=compiled but renormlab._ctape is not built")


def active_backend() -> str:
    """Name of the batch evaluator in use: 'compiled' or 'python'."""
    if _FORCED:
        return _FORCED
    return "compiled" if HAVE_COMPILED else "python"


class Tape:
    """Postfix program: parallel arrays of (opcode, int arg, complex arg)."""

    __slots__ = ("ops", "iargs", "cargs", "depth", "dim")

    def __init__(self, ops, iargs, cargs, depth, dim):
        self.ops = np.asarray(ops, dtype=np.int32)
        self.iargs = np.asarray(iargs, dtype=np.int32)
        self.cargs = np.asarray(cargs, dtype=np.complex128)
        self.depth = int(depth)
        self.dim = int(dim)

    def __len__(self):
        return len(self.ops)


class Emitter:
    def __init__(self):
        self.ops = []
        self.iargs = []
        self.cargs = []
        self._sp = 0
        self.depth = 0

    def _push(self, op, iarg=0, carg=0.0):
        self.ops.append(op)
        self.iargs.append(iarg)
        self.cargs.append(complex(carg))

    def _grow(self, delta):
        self._sp += delta
        if self._sp < 1:
            raise RuntimeError("tape stack underflow during compilation")
        self.depth = max(self.depth, self._sp)

    def const(self, value):
        self._push(OP_CONST, carg=value)
        self._grow(+1)

    def coord(self, j):
        self._push(OP_COORD, iarg=j)
        self._grow(+1)

    def z(self):
        self._push(OP_Z)
        self._grow(+1)

    def add(self):
        self._push(OP_ADD)
        self._grow(-1)

    def mul(self):
        self._push(OP_MUL)
        self._grow(-1)

    def exp(self):
        self._push(OP_EXP)
        self._grow(0)

    def pow(self, k):
        if k < 0:
            raise ValueError("negative powers are not supported")
        self._push(OP_POW, iarg=k)
        self._grow(0)

    def re(self):
        self._push(OP_RE)
        self._grow(0)

    def im(self):
        self._push(OP_IM)
        self._grow(0)


def compile_expr(expr) -> Tape:
    """Compile a HarmonicExpr; affine charts are folded into the leaf loads."""
    em = Emitter()
    expr.emit(em, 1.0, (0.0,) * expr.dim)
    if em._sp != 1:
        raise RuntimeError(f"tape compilation left {em._sp} values on the stack")
    return Tape(em.ops, em.iargs, em.cargs, em.depth, expr.dim)


def eval_tape_python(tape: Tape, pts: np.ndarray) -> np.ndarray:
    """NumPy interpreter; also accepts complex point arrays (analytic continuation).

    Overflow propagates silently as non-finite values, exactly like the
    compiled kernel; callers decide whether non-finite is an error.
    """
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        return _eval_tape_python(tape, pts)


def _eval_tape_python(tape: Tape, pts: np.ndarray) -> np.ndarray:
    n = pts.shape[0]
    stack = []
    for op, ia, ca in zip(tape.ops, tape.iargs, tape.cargs):
        if op == OP_CONST:
            stack.append(np.full(n, ca, dtype=np.complex128))
        elif op == OP_COORD:
            stack.append(pts[:, ia].astype(np.complex128))
        elif op == OP_Z:
            stack.append(pts[:, 0] + 1j * pts[:, 1])
        elif op == OP_ADD:
            b = stack.pop()
            stack[-1] = stack[-1] + b
        elif op == OP_MUL:
            b = stack.pop()
            stack[-1] = stack[-1] * b
        elif op == OP_EXP:
            stack[-1] = np.exp(stack[-1])
        elif op == OP_POW:
            k = int(ia)
            v = stack[-1]
            if k == 0:
                stack[-1] = np.ones(n, dtype=np.complex128)
            else:
                acc = v.copy()
                for _ in range(k - 1):
                    acc = acc * v
                stack[-1] = acc
        elif op == OP_RE:
            stack[-1] = stack[-1].real.astype(np.complex128)
        elif op == OP_IM:
            stack[-1] = stack[-1].imag.astype(np.complex128)
        else:  # pragma: no cover
            raise RuntimeError(f"bad opcode {op}")
    return stack[0]


def eval_tape(tape: Tape, pts: np.ndarray) -> np.ndarray:
    """Evaluate a tape over an (N, dim) float array; returns complex values."""
    pts = np.ascontiguousarray(pts)
    if np.iscomplexobj(pts):
        return eval_tape_python(tape, pts)  # compiled path is real-only
    backend = active_backend()
    if backend == "compiled" and tape.depth <= MAX_STACK:
        return _c_eval_tape(tape.ops, tape.iargs, tape.cargs, pts, tape.depth)
    return eval_tape_python(tape, pts)
