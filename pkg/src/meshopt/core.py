"""Complex linear algebra primitives, seeded randomness, and Haar-random unitaries.

All matrices in this package are dense numpy arrays of dtype complex128.
Every random quantity is drawn from an explicitly seeded ``numpy.random.Generator``
(PCG64), so any result is reproducible from the seed and the documented draw
order alone.

Draw-order conventions (binding for reproducibility):

* Complex Gaussian blocks are drawn row-major, real part before imaginary
  part for each entry (one ``standard_normal((rows, cols, 2))`` call).
* :func:`gram_schmidt_haar` draws one such block per matrix and then
  orthonormalizes columns left to right.
* :func:`random_unit_columns` draws one block per batch and normalizes
  columns afterward.
"""

import json

import numpy as np

__all__ = [
    "seeded_rng",
    "spawn_rngs",
    "complex_normal",
    "gram_schmidt_haar",
    "is_unitary",
    "mse_cost",
    "random_unit_columns",
    "matrix_to_json",
    "matrix_from_json",
    "save_matrix",
    "load_matrix",
]


def seeded_rng(seed):
    """Deterministic generator (PCG64) for a 64-bit integer seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed, count):
    """Split a seed into ``count`` independent deterministic sub-streams.

    Used wherever one logical seed has to feed several consumers (e.g.
    initialization, error sampling and batch generation in a training run)
    without coupling their draw sequences.
    """
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(seed).spawn(count)]


def complex_normal(rng, rows, cols):
    """Matrix of standard complex Gaussians (independent N(0,1) re/im parts)."""
    z = rng.standard_normal((rows, cols, 2))
    return z[..., 0] + 1j * z[..., 1]


def gram_schmidt_haar(n, rng):
    """Sample an n-by-n unitary from the Haar measure on U(n).

    Orthonormalizes the columns of a standard complex Gaussian matrix by
    Gram-Schmidt with a second re-orthogonalization pass (numerically stable
    up to at least n = 256). The implicit triangular factor has a positive
    real diagonal, which is exactly the normalization that makes the result
    Haar distributed rather than merely unitary.

    Parameters
    ----------
    n : int
        Matrix dimension, at least 1.
    rng : numpy.random.Generator
        Source of randomness; consumed per the module draw-order contract.
    """
    if n < 1:
        raise ValueError(f"invalid dimension n={n}, must be >= 1")
    z = complex_normal(rng, n, n)
    q = np.empty((n, n), dtype=np.complex128)
    for j in range(n):
        v = z[:, j]
        for _ in range(2):
            if j:
                v = v - q[:, :j] @ (q[:, :j].conj().T @ v)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("degenerate Gaussian draw (zero column)")
        q[:, j] = v / norm
    return q


def is_unitary(m, tol=1e-12):
    """True iff ``max|m† m - I| <= tol``. Raises on non-square input."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    n = m.shape[0]
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(n))) <= tol)


def mse_cost(u_hat, u):
    """Mean square error ``(1/2N) * ||u_hat - u||_F**2`` between N-by-N matrices."""
    u_hat = np.asarray(u_hat)
    u = np.asarray(u)
    if u_hat.shape != u.shape or u_hat.ndim != 2 or u_hat.shape[0] != u_hat.shape[1]:
        raise ValueError(f"dimension mismatch: {u_hat.shape} vs {u.shape}")
    n = u.shape[0]
    diff = u_hat - u
    return float(np.sum(diff.real**2 + diff.imag**2)) / (2 * n)


def random_unit_columns(n, batch, rng):
    """n-by-batch matrix whose columns are independent uniform unit vectors.

    Each column is a standard complex Gaussian vector normalized to unit
    Euclidean length (the uniform distribution on the complex unit sphere).
    """
    if n < 1 or batch < 1:
        raise ValueError(f"invalid shape n={n}, batch={batch}")
    z = complex_normal(rng, n, batch)
    z /= np.linalg.norm(z, axis=0, keepdims=True)
    return z


# --- matrix file format -------------------------------------------------
#
# {"rows": R, "cols": C, "re": [row-major reals], "im": [row-major reals]}
#
# Floats are written with Python's shortest round-trip representation
# (up to 17 significant digits), so write/read is lossless for float64.

def matrix_to_json(m):
    """Encode a complex matrix as a JSON-serializable dict."""
    m = np.ascontiguousarray(np.asarray(m, dtype=np.complex128))
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise ValueError("matrix entries must be finite")
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": m.real.ravel().tolist(),
        "im": m.imag.ravel().tolist(),
    }


def matrix_from_json(obj):
    """Decode the dict produced by :func:`matrix_to_json`."""
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=np.float64)
    im = np.asarray(obj["im"], dtype=np.float64)
    if re.size != rows * cols or im.size != rows * cols:
        raise ValueError("matrix JSON has inconsistent entry counts")
    return (re + 1j * im).reshape(rows, cols)


def save_matrix(path, m):
    with open(path, "w") as fh:
        json.dump(matrix_to_json(m), fh)


def load_matrix(path):
    with open(path) as fh:
        return matrix_from_json(json.load(fh))
