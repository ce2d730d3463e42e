# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-point stack machine for expression tapes.

Must stay operation-for-operation identical to the NumPy interpreter in
``renormlab.tape`` (same opcode set, same power expansion) so the two
backends agree to roundoff.
"""

import numpy as np

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double creal(double complex)
    double cimag(double complex)

DEF OP_CONST = 0
DEF OP_COORD = 1
DEF OP_Z = 2
DEF OP_ADD = 3
DEF OP_MUL = 4
DEF OP_EXP = 5
DEF OP_POW = 6
DEF OP_RE = 7
DEF OP_IM = 8

DEF MAX_STACK = 64


def eval_tape(int[::1] ops, int[::1] iargs, double complex[::1] cargs,
              double[:, ::1] pts, int depth):
    if depth > MAX_STACK:
        raise ValueError("tape too deep for the compiled kernel")
    cdef Py_ssize_t npts = pts.shape[0]
    cdef Py_ssize_t n_ops = ops.shape[0]
    out = np.empty(npts, dtype=np.complex128)
    cdef double complex[::1] out_v = out
    cdef double complex stack[MAX_STACK]
    cdef double complex a, acc
    cdef Py_ssize_t i, k
    cdef int sp, op, ia, j

    with nogil:
        for i in range(npts):
            sp = 0
            for k in range(n_ops):
                op = ops[k]
                if op == OP_CONST:
                    stack[sp] = cargs[k]
                    sp += 1
                elif op == OP_COORD:
                    stack[sp] = pts[i, iargs[k]]
                    sp += 1
                elif op == OP_Z:
                    stack[sp] = pts[i, 0] + 1j * pts[i, 1]
                    sp += 1
                elif op == OP_ADD:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] + stack[sp]
                elif op == OP_MUL:
                    sp -= 1
                    stack[sp - 1] = stack[sp - 1] * stack[sp]
                elif op == OP_EXP:
                    stack[sp - 1] = cexp(stack[sp - 1])
                elif op == OP_POW:
                    ia = iargs[k]
                    if ia == 0:
                        stack[sp - 1] = 1.0
                    else:
                        a = stack[sp - 1]
                        acc = a
                        for j in range(ia - 1):
                            acc = acc * a
                        stack[sp - 1] = acc
                elif op == OP_RE:
                    stack[sp - 1] = creal(stack[sp - 1])
                else:  # OP_IM
                    stack[sp - 1] = cimag(stack[sp - 1])
            out_v[i] = stack[0]
    return out
