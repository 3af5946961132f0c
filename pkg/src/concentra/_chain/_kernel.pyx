# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loop: sequential conditional-inverse-CDF sampling.

Each path consumes one row of pre-drawn uniforms; step t maps the current
state to its grid cell, picks the next cell as the first one whose row
conditional CDF exceeds the uniform, and interpolates linearly inside it.
The pure-Python fallback in ``_fallback`` computes the identical recursion.
"""


def chain_paths_into(const double[:, ::1] cond_cum, const double[:, ::1] u, double[:, ::1] out):
    cdef Py_ssize_t n = cond_cum.shape[0]
    cdef Py_ssize_t reps = u.shape[0]
    cdef Py_ssize_t steps = u.shape[1]
    cdef Py_ssize_t r, t, i, j
    cdef double x, uu, prev, width
    with nogil:
        for r in range(reps):
            x = u[r, 0]
            out[r, 0] = x
            for t in range(1, steps):
                i = <Py_ssize_t>(x * n)
                if i > n - 1:
                    i = n - 1
                uu = u[r, t]
                j = 0
                while j < n - 1 and cond_cum[i, j] <= uu:
                    j += 1
                prev = cond_cum[i, j - 1] if j > 0 else 0.0
                width = cond_cum[i, j] - prev
                x = (j + (uu - prev) / width) / n
                out[r, t] = x
