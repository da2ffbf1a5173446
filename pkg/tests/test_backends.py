"""Backend selection and compiled-vs-fallback agreement.

The compiled convolution delegates to the same BLAS path as the fallback,
so those outputs match bit for bit; the hand-written C convolution kept
under the ``_direct`` suffix is an independent route used here as a
cross-check. Reductions (means, eigensolver) may differ across backends
in the final bits, so those comparisons carry tight tolerances instead.
"""

import os
import subprocess
import sys

import numpy as np
import numpy.testing as npt
import pytest

from ssrpnet.backend import available_backends, get_kernels

HAVE_COMPILED = "compiled" in available_backends()
needs_compiled = pytest.mark.skipif(not HAVE_COMPILED,
                                    reason="compiled extension not built")


def pair():
    return get_kernels("compiled"), get_kernels("numpy")


def conv_inputs(rng, b=2, ci=3, co=4, t=9, f=7):
    x = np.ascontiguousarray(rng.normal(size=(b, ci, t, f)))
    w = np.ascontiguousarray(rng.normal(size=(co, ci, 3, 3)))
    bias = np.ascontiguousarray(rng.normal(size=co))
    dy = np.ascontiguousarray(rng.normal(size=(b, co, t, f)))
    return x, w, bias, dy


def test_available_backends_always_has_fallback():
    names = available_backends()
    assert "numpy" in names
    assert get_kernels("numpy").NAME == "numpy"


def test_unknown_backend_rejected():
    with pytest.raises(ValueError, match="not available"):
        get_kernels("cuda")


def test_env_override_selects_backend():
    for name in available_backends():
        env = dict(os.environ, SSRPNET_BACKEND=name)
        out = subprocess.run(
            [sys.executable, "-c", "from ssrpnet.backend import BACKEND; print(BACKEND)"],
            env=env, capture_output=True, text=True, check=True)
        assert out.stdout.strip() == name


def test_env_override_bad_name_fails():
    env = dict(os.environ, SSRPNET_BACKEND="fortran")
    out = subprocess.run(
        [sys.executable, "-c", "import ssrpnet.backend"],
        env=env, capture_output=True, text=True)
    assert out.returncode != 0
    assert "not available" in out.stderr


@needs_compiled
def test_conv_is_shared_bit_for_bit(rng):
    compiled, fallback = pair()
    x, w, bias, dy = conv_inputs(rng)
    npt.assert_array_equal(compiled.conv2d_forward(x, w, bias),
                           fallback.conv2d_forward(x, w, bias))
    for a, b in zip(compiled.conv2d_backward(x, w, dy),
                    fallback.conv2d_backward(x, w, dy)):
        npt.assert_array_equal(a, b)


@needs_compiled
def test_direct_conv_agrees_with_blas_route(rng):
    compiled, _ = pair()
    x, w, bias, dy = conv_inputs(rng)
    npt.assert_allclose(compiled.conv2d_forward_direct(x, w, bias),
                        compiled.conv2d_forward(x, w, bias),
                        rtol=1e-12, atol=1e-12)
    direct = compiled.conv2d_backward_direct(x, w, dy)
    blas = compiled.conv2d_backward(x, w, dy)
    for a, b in zip(direct, blas):
        npt.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@needs_compiled
def test_pooling_parity(rng):
    compiled, fallback = pair()
    x = np.ascontiguousarray(rng.normal(size=(4, 107, 10)))
    for w in (1, 2, 4, 8, 107):
        cv, cs = compiled.ssrp_b_forward(x, w)
        nv, ns = fallback.ssrp_b_forward(x, w)
        npt.assert_array_equal(cs, ns)  # selections are part of the contract
        npt.assert_allclose(cv, nv, rtol=1e-14)
    for k in (1, 4, 12, 107):
        cv, ci = compiled.ssrp_t_forward(x, k)
        nv, ni = fallback.ssrp_t_forward(x, k)
        npt.assert_array_equal(ci, ni)
        npt.assert_allclose(cv, nv, rtol=1e-14)
    npt.assert_allclose(compiled.gap_forward(x), fallback.gap_forward(x),
                        rtol=1e-14)
    npt.assert_allclose(compiled.avgpool2x2_forward(x),
                        fallback.avgpool2x2_forward(x), rtol=1e-14)


@needs_compiled
def test_pooling_backward_parity(rng):
    compiled, fallback = pair()
    x = np.ascontiguousarray(rng.normal(size=(3, 20, 6)))
    dy = np.ascontiguousarray(rng.normal(size=(3, 6)))
    _, starts = compiled.ssrp_b_forward(x, 5)
    npt.assert_allclose(compiled.ssrp_b_backward(dy, starts, 5, 20),
                        fallback.ssrp_b_backward(dy, starts, 5, 20), rtol=1e-15)
    _, idx = compiled.ssrp_t_forward(x, 4)
    npt.assert_allclose(compiled.ssrp_t_backward(dy, idx, 20),
                        fallback.ssrp_t_backward(dy, idx, 20), rtol=1e-15)
    npt.assert_allclose(compiled.gap_backward(dy, 20),
                        fallback.gap_backward(dy, 20), rtol=1e-15)
    dpool = np.ascontiguousarray(rng.normal(size=(3, 10, 3)))
    npt.assert_allclose(compiled.avgpool2x2_backward(dpool, 20, 6),
                        fallback.avgpool2x2_backward(dpool, 20, 6), rtol=1e-15)


@needs_compiled
def test_jacobi_parity(rng):
    compiled, fallback = pair()
    a = rng.normal(size=(20, 20))
    a = np.ascontiguousarray((a + a.T) / 2.0)
    cd, cv, _ = compiled.jacobi_eigh(a)
    nd, nv, _ = fallback.jacobi_eigh(a)
    npt.assert_allclose(np.sort(cd), np.sort(nd), atol=1e-10)
    ref = np.linalg.eigvalsh(a)
    npt.assert_allclose(np.sort(cd), ref, atol=1e-10)
    npt.assert_allclose(np.sort(nd), ref, atol=1e-10)


def test_kernel_outputs_are_c_contiguous(kernels, rng):
    x, w, bias, dy = conv_inputs(rng)
    assert kernels.conv2d_forward(x, w, bias).flags.c_contiguous
    assert all(g.flags.c_contiguous for g in kernels.conv2d_backward(x, w, dy))
    maps = np.ascontiguousarray(rng.normal(size=(2, 12, 5)))
    vals, starts = kernels.ssrp_b_forward(maps, 3)
    assert vals.flags.c_contiguous and starts.flags.c_contiguous
    vals, idx = kernels.ssrp_t_forward(maps, 3)
    assert vals.flags.c_contiguous and idx.flags.c_contiguous
    assert kernels.gap_forward(maps).flags.c_contiguous
    assert kernels.avgpool2x2_forward(maps).flags.c_contiguous
    grad = np.ascontiguousarray(rng.normal(size=(2, 5)))
    assert kernels.ssrp_b_backward(grad, starts[:, :], 3, 12).flags.c_contiguous
    assert kernels.gap_backward(grad, 12).flags.c_contiguous


def test_degenerate_identities_hold_per_backend(kernels, rng):
    # within one backend these are exact equalities, not approximations
    x = np.ascontiguousarray(rng.normal(size=(3, 431, 40)))
    gap = kernels.gap_forward(x)
    b_vals, _ = kernels.ssrp_b_forward(x, 431)
    t_vals, _ = kernels.ssrp_t_forward(x, 431)
    npt.assert_array_equal(b_vals, gap)
    npt.assert_array_equal(t_vals, gap)
    top1_b, _ = kernels.ssrp_b_forward(x, 1)
    top1_t, _ = kernels.ssrp_t_forward(x, 1)
    npt.assert_array_equal(top1_b, x.max(axis=1))
    npt.assert_array_equal(top1_t, x.max(axis=1))
