import numpy as np
import pytest

import mswiener as mw
from mswiener.coring import (
    CoringNetDef,
    collate_h,
    expected_coring_records,
    make_refiner,
    param_count_coring,
    refine_h,
    scatter_h,
)
from mswiener.weights import ROLE_CORING, WeightBundle, read_bundle, write_bundle


def coring_bundle(seed=0, zero=False, scale=0.05):
    net = CoringNetDef()
    rng = np.random.default_rng(seed)
    records = []
    for kind, shape in expected_coring_records(net):
        if zero:
            arr = np.zeros(shape, dtype=np.float32)
            if kind in (2, 5):
                arr += 1.0
        else:
            arr = (scale * rng.standard_normal(shape)).astype(np.float32)
            if kind == 5:
                arr = np.abs(arr) + 0.5
        records.append((kind, arr))
    return WeightBundle(
        role=ROLE_CORING, depth=net.stage1_layers + net.stage2_layers,
        channels=net.channels, records=records,
    )


def test_param_count_closed_form():
    # 5-layer and 4-layer stages of width 20 with single-channel ends,
    # BN on all but the last layer of each stage
    assert param_count_coring() == 19142


def test_collate_scatter_roundtrip():
    rng = np.random.default_rng(1)
    blocks = {(r, c): rng.uniform(size=(8, 8)) for r in range(3) for c in range(4)}
    tensor = collate_h(blocks, (3, 4))
    assert tensor.shape == (3, 4, 8, 8)
    back = scatter_h(tensor)
    assert set(back) == set(blocks)
    for key in blocks:
        np.testing.assert_array_equal(back[key], blocks[key])


def test_collate_missing_block_named():
    blocks = {(0, 0): np.zeros((4, 4)), (0, 1): np.zeros((4, 4))}
    with pytest.raises(mw.DataError, match=r"\(1, 0\)"):
        collate_h(blocks, (2, 2))


def test_collate_shape_mismatch():
    blocks = {(0, 0): np.zeros((4, 4)), (0, 1): np.zeros((5, 5))}
    with pytest.raises(mw.DataError):
        collate_h(blocks, (1, 2))


def test_zero_bundle_exact_identity():
    # zero convs make every residual branch vanish, so refinement must return
    # the input bit-for-bit (aside from the [0, 1] clamp, which h satisfies)
    bundle = coring_bundle(zero=True)
    rng = np.random.default_rng(2)
    tensor = rng.uniform(size=(5, 6, 8, 8))
    out = refine_h(tensor, bundle)
    np.testing.assert_array_equal(out, tensor)


def test_output_clamped():
    bundle = coring_bundle(seed=3, scale=2.0)
    tensor = np.random.default_rng(4).uniform(size=(4, 4, 8, 8))
    out = refine_h(tensor, bundle)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_wrong_role_rejected():
    bundle = coring_bundle(seed=5)
    bundle.role = 0
    with pytest.raises(mw.DataError):
        refine_h(np.zeros((2, 2, 8, 8)), bundle)


def test_bundle_roundtrip(tmp_path):
    bundle = coring_bundle(seed=6)
    path = tmp_path / "coring.wnb"
    write_bundle(bundle, path)
    loaded = read_bundle(path)
    assert loaded.role == ROLE_CORING
    tensor = np.random.default_rng(7).uniform(size=(3, 3, 8, 8))
    np.testing.assert_array_equal(refine_h(tensor, loaded), refine_h(tensor, bundle))


def test_scalar_forward_oracle():
    # independent re-computation with explicit loops on a 3x3 grid of 8x8
    # transfer slices, folding BN by hand at each layer
    from mswiener.sigma import BN_EPS

    bundle = coring_bundle(seed=8)
    net = CoringNetDef()
    tensor = np.random.default_rng(9).uniform(size=(3, 3, 8, 8))

    def scalar_conv(x, w, b):  # x: (C, H, W)
        cout = w.shape[0]
        _, h_, w_ = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
        out = np.zeros((cout, h_, w_))
        for o in range(cout):
            for r in range(h_):
                for c in range(w_):
                    acc = b[o]
                    for ci in range(x.shape[0]):
                        for kr in range(3):
                            for kc in range(3):
                                acc += w[o, ci, kr, kc] * xp[ci, r + kr, c + kc]
                    out[o, r, c] = acc
        return out

    def fold(records, io, start):
        layers = []
        idx = start
        for _, _, has_bn in io:
            w = records[idx][1].astype(np.float64)
            b = records[idx + 1][1].astype(np.float64)
            idx += 2
            if has_bn:
                gamma, beta, mean, var = (records[idx + i][1].astype(np.float64) for i in range(4))
                idx += 4
                s = gamma / np.sqrt(var + BN_EPS)
                w = w * s[:, None, None, None]
                b = (b - mean) * s + beta
            layers.append((w, b))
        return layers, idx

    def run_stage(x, layers):  # x: (H, W) single channel
        y = x[None]
        for i, (w, b) in enumerate(layers):
            y = scalar_conv(y, w, b)
            if i < len(layers) - 1:
                y = np.maximum(y, 0.0)
        return y[0]

    stage1, used = fold(bundle.records, net.stage_io(net.stage1_layers), 0)
    stage2, _ = fold(bundle.records, net.stage_io(net.stage2_layers), used)

    x = tensor.copy()
    for r in range(3):
        for c in range(3):
            x[r, c] = tensor[r, c] + run_stage(tensor[r, c], stage1)
    y = x.copy()
    for fr in range(8):
        for fc in range(8):
            y[:, :, fr, fc] = x[:, :, fr, fc] + run_stage(x[:, :, fr, fc], stage2)
    oracle = np.clip(y, 0.0, 1.0)

    out = refine_h(tensor, bundle)
    assert np.max(np.abs(out - oracle)) < 1e-5


def test_pipeline_with_zero_bundle_matches_plain():
    # attaching an identity (zero-weight) refiner must not change a single bit
    img = mw.from_array(
        np.random.default_rng(10).uniform(size=(3, 64, 64)).astype(np.float32)
    )
    window = mw.make_window(mw.WindowSpec(mw.WindowKind.GAUSSIAN, 16))
    plan = mw.make_plan((64, 64), 16, 4)
    plain = mw.WienerBlockFilter(window, ("global", 0.08), dc_restore=mw.DcRestore.WINDOWED)
    refined = mw.WienerBlockFilter(
        window, ("global", 0.08), dc_restore=mw.DcRestore.WINDOWED,
        coring_refiner=make_refiner(coring_bundle(zero=True)),
    )
    a = mw.run_single_scale(img, plan, window, plain)
    b = mw.run_single_scale(img, plan, window, refined)
    np.testing.assert_array_equal(a.data, b.data)
