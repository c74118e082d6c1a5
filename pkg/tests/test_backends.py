"""Consistency between the compiled kernel extension and the numpy fallback."""

import importlib

import numpy as np
import pytest

from h2vie import _kernel_numpy, kernel

compiled = pytest.importorskip(
    "h2vie._kernel_core", reason="compiled kernel extension not built"
)


def _call(backend, geom, params, rows, cols):
    out = np.empty((rows.size, cols.size), dtype=np.complex128)
    bad = backend.assemble_block_raw(
        geom.centers,
        params.chi(geom.n),
        float(params.k0),
        float(geom.voxel_volume),
        complex(params.k0**2 * kernel.self_term(geom.voxel_volume, params.k0)),
        rows,
        cols,
        out,
    )
    return bad, out


def test_backends_agree_on_full_matrix(rng):
    geom = kernel.generate_geometry("cube_array", [2, 2, 1], 10, 2 * np.pi)
    params = kernel.KernelParams(k0=2 * np.pi, eps_r=2.54 - 0.05j)
    idx = np.arange(geom.n, dtype=np.int64)
    bad_c, out_c = _call(compiled, geom, params, idx, idx)
    bad_n, out_n = _call(_kernel_numpy, geom, params, idx, idx)
    assert bad_c == bad_n == -1
    scale = np.abs(out_n).max()
    assert np.abs(out_c - out_n).max() <= 1e-13 * scale


def test_backends_agree_on_ragged_samples(rng):
    geom = kernel.generate_geometry("rod", [12.8], 10, 2 * np.pi)
    params = kernel.KernelParams(k0=2 * np.pi)
    rows = np.sort(rng.choice(geom.n, size=17, replace=False)).astype(np.int64)
    cols = np.sort(rng.choice(geom.n, size=23, replace=False)).astype(np.int64)
    _, out_c = _call(compiled, geom, params, rows, cols)
    _, out_n = _call(_kernel_numpy, geom, params, rows, cols)
    assert np.abs(out_c - out_n).max() <= 1e-13 * np.abs(out_n).max()


def test_both_flag_coincident_pairs():
    centers = np.array([[0.0, 0, 0], [1.0, 0, 0], [1.0, 0, 0]])
    chi = np.full(3, 1.54, dtype=np.complex128)
    rows = np.array([1], dtype=np.int64)
    cols = np.array([2], dtype=np.int64)
    for backend in (compiled, _kernel_numpy):
        out = np.empty((1, 1), dtype=np.complex128)
        bad = backend.assemble_block_raw(
            centers, chi, 1.0, 1.0, 0.1 + 0j, rows, cols, out
        )
        assert bad == 0  # flat index of the offending pair


def test_env_override_selects_numpy(tmp_path):
    import subprocess
    import sys

    code = "import h2vie; print(h2vie.backend_name())"
    env_out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"H2VIE_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
    )
    assert env_out.stdout.strip() == "numpy"


def test_module_reload_keeps_working():
    # reload must not poison the dispatch table
    importlib.reload(kernel)
    geom = kernel.generate_geometry("rod", [1.0], 10, 2 * np.pi)
    params = kernel.KernelParams(k0=2 * np.pi)
    s = kernel.assemble_dense(geom, params)
    assert s.shape == (10, 10)
