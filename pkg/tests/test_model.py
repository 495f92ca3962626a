"""Network tests: parameter counts, residual identity, gradients, checkpoint I/O."""

import struct
import zlib

import numpy as np
import pytest

from ambcest import (
    DenoiserHyper,
    FormatError,
    ParameterError,
    ShapeError,
    StateError,
    build_model,
    grad_check,
    load_checkpoint,
    mse_loss,
    save_checkpoint,
)
from conftest import set_model_to_ls

TINY = DenoiserHyper(blocks=1, layers_per_block=3, filters=4, ma=4, mb=4, pilots=2)


class TestHyper:
    def test_defaults_match_reference_realization(self):
        hp = DenoiserHyper()
        assert (hp.blocks, hp.layers_per_block, hp.filters) == (3, 8, 64)
        assert (hp.ma, hp.mb, hp.pilots, hp.kernel_size) == (8, 8, 2, 3)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"blocks": 0},
            {"layers_per_block": 1},
            {"filters": 0},
            {"kernel_size": 2},
            {"recon": "mlp"},
            {"pilots": 0},
        ],
    )
    def test_invalid_hyper_rejected(self, kwargs):
        with pytest.raises(ParameterError):
            DenoiserHyper(**kwargs)


class TestParameterCounts:
    def test_default_network_count(self):
        # per block: conv P->64 (9*2*64+64) + 6x (conv 64->64 + BN) + conv 64->P,
        # three blocks, plus the 1x1 reconstruction over P slices
        assert build_model(DenoiserHyper()).num_parameters() == 674_505

    def test_tiny_network_count(self):
        assert build_model(TINY).num_parameters() == 317

    def test_count_by_hand_formula(self):
        hp = DenoiserHyper(blocks=2, layers_per_block=4, filters=8, ma=4, mb=4, pilots=3)
        k2 = hp.kernel_size**2
        per_block = (
            (k2 * hp.pilots * hp.filters + hp.filters)      # entry conv
            + 2 * (k2 * hp.filters**2 + hp.filters)         # middle convs
            + 3 * 2 * hp.filters                            # BN gamma/beta per hidden layer
            + (k2 * hp.filters * hp.pilots + hp.pilots)     # exit conv
        )
        want = hp.blocks * per_block + (hp.pilots + 1)      # + 1x1 recon
        assert build_model(hp).num_parameters() == want

    def test_dense_recon_count(self):
        hp = DenoiserHyper(blocks=1, layers_per_block=2, filters=2, ma=2, mb=2, pilots=2, recon="dense")
        vol = 2 * 2 * 2
        base = build_model(hp).num_parameters()
        conv_part = (9 * 2 * 2 + 2) + (9 * 2 * 2 + 2) + 2 * 2  # two convs + one BN pair
        assert base == conv_part + vol * 4 + 4  # dense recon: (M x vol) weights + M biases


class TestForward:
    def test_requires_mode(self, rng):
        model = build_model(TINY, rng=0)
        with pytest.raises(StateError):
            model.forward(rng.standard_normal((4, 4, 2)))

    def test_shapes_batch_and_single(self, rng):
        model = build_model(TINY, rng=0).eval_mode()
        assert model.forward(rng.standard_normal((5, 4, 4, 2))).shape == (5, 4, 4)
        assert model.forward(rng.standard_normal((4, 4, 2))).shape == (4, 4)

    def test_geometry_mismatch_rejected(self, rng):
        model = build_model(TINY, rng=0).eval_mode()
        with pytest.raises(ShapeError):
            model.forward(rng.standard_normal((5, 4, 4, 3)))

    def test_residual_identity_with_zero_subnet(self, rng):
        # zeroing each block's final conv makes S = 0, so the block output == input bitwise
        model = build_model(TINY, rng=0).eval_mode()
        for block in model.blocks:
            block.convs[-1].w[...] = 0.0
            block.convs[-1].b[...] = 0.0
        y = rng.standard_normal((3, 4, 4, 2))
        out, s = model.blocks[0].forward(y)
        assert np.all(s == 0.0)
        assert np.array_equal(out, y)

    def test_ls_configuration_matches_pilot_mean(self, rng):
        model = set_model_to_ls(build_model(TINY, rng=0)).eval_mode()
        y = rng.standard_normal((6, 4, 4, 2))
        assert np.allclose(model.forward(y), y.mean(axis=-1), atol=1e-12)

    def test_dense_recon_forward_shape(self, rng):
        hp = DenoiserHyper(blocks=1, layers_per_block=2, filters=2, ma=3, mb=2, pilots=2, recon="dense")
        model = build_model(hp, rng=0).eval_mode()
        assert model.forward(rng.standard_normal((4, 3, 2, 2))).shape == (4, 3, 2)

    def test_deterministic_build(self, rng):
        a = build_model(TINY, rng=7).eval_mode()
        b = build_model(TINY, rng=7).eval_mode()
        y = rng.standard_normal((2, 4, 4, 2))
        assert np.array_equal(a.forward(y), b.forward(y))

    def test_analysis_mode_is_linear(self, rng):
        model = build_model(TINY, rng=1).eval_mode()
        model.analysis = True
        y1 = rng.standard_normal((1, 4, 4, 2))
        y2 = rng.standard_normal((1, 4, 4, 2))
        lhs = model.forward(y1 + y2) - model.forward(np.zeros_like(y1))
        rhs = (model.forward(y1) - model.forward(np.zeros_like(y1))) + (
            model.forward(y2) - model.forward(np.zeros_like(y2))
        )
        assert np.allclose(lhs, rhs, atol=1e-10)
        model.analysis = False
        assert not np.allclose(
            model.forward(y1 + y2), model.forward(y1) + model.forward(y2) - model.forward(np.zeros_like(y1)), atol=1e-10
        )


class TestBackward:
    @pytest.mark.parametrize("recon", ["conv1x1", "dense"])
    def test_full_model_gradients(self, recon, rng):
        hp = DenoiserHyper(blocks=1, layers_per_block=3, filters=4, ma=4, mb=4, pilots=2, recon=recon)
        model = build_model(hp, rng=3).train_mode()
        model.forward(rng.standard_normal((8, 4, 4, 2)))  # seed running stats
        model.eval_mode()
        y = rng.standard_normal((4, 4, 4, 2))
        target = rng.standard_normal((4, 4, 4))

        def loss_fn():
            loss, _ = mse_loss(model.forward(y), target)
            return loss

        _, grad = mse_loss(model.forward(y), target)
        model.backward(grad)
        report = grad_check(loss_fn, model.named_parameters(), model.named_gradients())
        assert report.passed, str(report)

    def test_gradients_across_twenty_seeds(self, rng):
        worst = 0.0
        for seed in range(20):
            model = build_model(TINY, rng=seed).train_mode()
            model.forward(rng.standard_normal((8, 4, 4, 2)))
            model.eval_mode()
            y = rng.standard_normal((2, 4, 4, 2))
            target = rng.standard_normal((2, 4, 4))

            def loss_fn():
                loss, _ = mse_loss(model.forward(y), target)
                return loss

            _, grad = mse_loss(model.forward(y), target)
            model.backward(grad)
            report = grad_check(loss_fn, model.named_parameters(), model.named_gradients())
            assert report.passed, f"seed {seed}: {report}"
            worst = max(worst, report.max_rel_error)
        assert worst < 1e-4


class TestStateDict:
    def test_round_trip_is_bit_exact(self, rng):
        model = build_model(TINY, rng=5).train_mode()
        model.forward(rng.standard_normal((8, 4, 4, 2)))  # move running stats off init
        state = model.state_dict()
        other = build_model(TINY, rng=9)
        other.load_state_dict(state)
        for name, arr in model.named_parameters().items():
            assert np.array_equal(dict(other.named_parameters())[name], arr), name
        for name, arr in model.named_running_stats().items():
            assert np.array_equal(dict(other.named_running_stats())[name], arr), name

    def test_state_dict_is_a_copy(self):
        model = build_model(TINY, rng=0)
        state = model.state_dict()
        state["recon.b"][...] = 123.0
        assert model.named_parameters()["recon.b"][0] == 0.0

    def test_mismatched_keys_rejected(self):
        model = build_model(TINY, rng=0)
        state = model.state_dict()
        state.pop("recon.b")
        with pytest.raises(ParameterError):
            model.load_state_dict(state)

    def test_clone_is_independent(self, rng):
        model = build_model(TINY, rng=2).eval_mode()
        twin = model.clone()
        y = rng.standard_normal((2, 4, 4, 2))
        assert np.array_equal(model.forward(y), twin.forward(y))
        twin.recon.b[...] = 50.0
        assert model.recon.b[0] != 50.0


class TestCheckpoint:
    def test_round_trip_is_bit_exact(self, tmp_path, rng):
        model = build_model(TINY, rng=4).train_mode()
        model.forward(rng.standard_normal((8, 4, 4, 2)))
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        loaded = load_checkpoint(path)
        assert loaded.hyper == model.hyper
        for name, arr in model.named_parameters().items():
            assert np.array_equal(dict(loaded.named_parameters())[name], arr), name
        for name, arr in model.named_running_stats().items():
            assert np.array_equal(dict(loaded.named_running_stats())[name], arr), name
        y = rng.standard_normal((3, 4, 4, 2))
        assert np.array_equal(model.eval_mode().forward(y), loaded.eval_mode().forward(y))

    def test_dense_recon_round_trip(self, tmp_path, rng):
        hp = DenoiserHyper(blocks=1, layers_per_block=2, filters=2, ma=2, mb=2, pilots=2, recon="dense")
        model = build_model(hp, rng=1)
        path = tmp_path / "dense.ckpt"
        save_checkpoint(model, path)
        assert load_checkpoint(path).hyper == hp

    def test_bad_magic_rejected(self, tmp_path):
        model = build_model(TINY, rng=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_corrupted_payload_rejected(self, tmp_path):
        model = build_model(TINY, rng=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        raw = bytearray(path.read_bytes())
        raw[60] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_truncated_file_rejected(self, tmp_path):
        model = build_model(TINY, rng=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        path.write_bytes(path.read_bytes()[:50])
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_unsupported_version_rejected(self, tmp_path):
        model = build_model(TINY, rng=0)
        path = tmp_path / "model.ckpt"
        save_checkpoint(model, path)
        raw = bytearray(path.read_bytes())
        raw[4] = 99  # version field, little-endian low byte
        body = bytes(raw[:-4])
        path.write_bytes(body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF))
        with pytest.raises(FormatError):
            load_checkpoint(path)
