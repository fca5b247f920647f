import numpy as np
import pytest
import torch

from conftest import small_net_config, tiny_net_config
from demesh.networks import (LatentCode, ModelBundle, NetConfig, batch_to_torch, decode_fused,
                             discriminate, disentangle, encode_face, encode_mesh, fuse,
                             init_weights, latent_arith, latent_interp, torch_to_images)


def rand_in(shape, seed=0):
    g = torch.Generator().manual_seed(seed)
    return torch.rand(shape, generator=g) * 2 - 1


class TestNetConfig:
    def test_full_scale_latent_is_256_with_one_mesh_channel(self):
        cfg = NetConfig.full_scale()
        assert cfg.latent_channels == 256
        assert cfg.face_latent_channels == 255
        assert cfg.mesh_latent_channels == 1
        assert cfg.latent_size == 32
        assert cfg.res_blocks_face == 5
        assert cfg.res_blocks_mesh == 1

    def test_desk_scale_latent(self):
        cfg = NetConfig.desk_scale()
        assert cfg.latent_channels == 64
        assert cfg.face_latent_channels == 63
        assert cfg.latent_size == 16

    def test_invalid_sizes_rejected(self):
        with pytest.raises(ValueError):
            NetConfig(image_size=66)
        with pytest.raises(ValueError):
            NetConfig(channels=2)
        with pytest.raises(ValueError):
            NetConfig(image_size=8, disc_layers=3)

    def test_dict_round_trip_strict(self):
        cfg = NetConfig.desk_scale()
        assert NetConfig.from_dict(cfg.to_dict()) == cfg
        with pytest.raises(ValueError, match="unknown"):
            NetConfig.from_dict({"image_sizee": 64})


class TestDisentangle:
    def test_output_shapes(self):
        cfg = small_net_config()
        b = init_weights(cfg, 0)
        x = rand_in((2, 3, 32, 32))
        y_hat, z_hat, code = disentangle(b, x)
        assert y_hat.shape == (2, 3, 32, 32)
        assert z_hat.shape == (2, 1, 32, 32)
        assert code.face_part.shape == (2, cfg.face_latent_channels, 8, 8)
        assert code.mesh_part.shape == (2, 1, 8, 8)

    def test_full_scale_code_shape(self):
        cfg = NetConfig.full_scale()
        b = init_weights(cfg, 0)
        _, _, code = disentangle(b, rand_in((1, 3, 128, 128)))
        assert code.face_part.shape == (1, 255, 32, 32)
        assert code.mesh_part.shape == (1, 1, 32, 32)

    def test_mesh_output_ignores_face_part(self):
        b = init_weights(small_net_config(), 1)
        x = rand_in((1, 3, 32, 32), seed=3)
        _, z_hat, code = disentangle(b, x)
        with torch.no_grad():
            perturbed = LatentCode(code.face_part + torch.randn_like(code.face_part),
                                   code.mesh_part)
            z_again = b.g_dec_z(perturbed.mesh_part)
        assert torch.equal(z_hat, z_again)

    def test_face_output_ignores_mesh_part(self):
        b = init_weights(small_net_config(), 1)
        y_hat, _, code = disentangle(b, rand_in((1, 3, 32, 32), seed=4))
        with torch.no_grad():
            y_again = b.g_dec_y(code.face_part + 0.0)
        assert torch.equal(y_hat, y_again)

    def test_outputs_in_tanh_range(self):
        b = init_weights(small_net_config(), 2)
        y_hat, z_hat, _ = disentangle(b, rand_in((2, 3, 32, 32), seed=5))
        for t in (y_hat, z_hat):
            assert torch.isfinite(t).all()
            assert t.min() >= -1.0 and t.max() <= 1.0

    def test_wrong_channels_rejected(self):
        b = init_weights(small_net_config(), 0)
        with pytest.raises(ValueError):
            disentangle(b, rand_in((1, 1, 32, 32)))


class TestFuse:
    def test_shape_matches_face(self):
        b = init_weights(small_net_config(), 0)
        x_hat = fuse(b, rand_in((2, 3, 32, 32)), rand_in((2, 1, 32, 32), seed=1))
        assert x_hat.shape == (2, 3, 32, 32)

    def test_composition_identity(self):
        b = init_weights(small_net_config(), 3)
        y = rand_in((1, 3, 32, 32), seed=6)
        z = rand_in((1, 1, 32, 32), seed=7)
        with torch.no_grad():
            direct = fuse(b, y, z)
            composed = decode_fused(b, encode_face(b, y), encode_mesh(b, z))
        assert torch.equal(direct, composed)

    def test_untrained_outputs_bounded(self):
        b = init_weights(small_net_config(), 4)
        x_hat = fuse(b, rand_in((1, 3, 32, 32), seed=8), rand_in((1, 1, 32, 32), seed=9))
        assert torch.isfinite(x_hat).all()
        assert x_hat.abs().max() <= 1.0

    def test_encode_mesh_channel_count(self):
        cfg = small_net_config()
        b = init_weights(cfg, 0)
        lat = encode_mesh(b, rand_in((2, 1, 32, 32)))
        assert lat.shape[1] == cfg.mesh_latent_channels

    def test_latent_spatial_is_quarter_of_input(self):
        cfg = small_net_config()
        b = init_weights(cfg, 0)
        lat = encode_face(b, rand_in((1, 3, 32, 32)))
        assert lat.shape[2] == lat.shape[3] == 32 // 4


class TestDiscriminate:
    def test_scores_in_unit_interval(self):
        b = init_weights(small_net_config(), 0)
        for which, ch in (("x", 3), ("y", 3), ("z", 1)):
            s = discriminate(b, which, rand_in((2, ch, 32, 32)))
            assert s.min() > 0.0 and s.max() < 1.0

    def test_score_map_follows_stride_plan(self):
        cfg = small_net_config()
        b = init_weights(cfg, 0)
        s = discriminate(b, "x", rand_in((1, 3, 32, 32)))
        assert s.shape == (1, 1, cfg.score_map_size, cfg.score_map_size)

    def test_unknown_domain_rejected(self):
        b = init_weights(small_net_config(), 0)
        with pytest.raises(ValueError):
            discriminate(b, "w", rand_in((1, 3, 32, 32)))

    def test_wrong_channels_rejected(self):
        b = init_weights(small_net_config(), 0)
        with pytest.raises(ValueError):
            discriminate(b, "z", rand_in((1, 3, 32, 32)))


class TestLatentOps:
    @pytest.fixture
    def setup(self):
        b = init_weights(small_net_config(), 5)
        z1 = rand_in((1, 1, 32, 32), seed=10)
        z2 = rand_in((1, 1, 32, 32), seed=11)
        return b, z1, z2

    def test_interp_endpoints_bit_exact(self, setup):
        b, z1, z2 = setup
        with torch.no_grad():
            assert torch.equal(latent_interp(b, z1, z2, 0.0), encode_mesh(b, z1))
            assert torch.equal(latent_interp(b, z1, z2, 1.0), encode_mesh(b, z2))

    def test_interp_of_same_input_is_identity(self, setup):
        b, z1, _ = setup
        with torch.no_grad():
            mid = latent_interp(b, z1, z1, 0.5)
            assert torch.allclose(mid, encode_mesh(b, z1), atol=1e-7)

    def test_interp_decodes_into_tanh_range(self, setup):
        b, z1, z2 = setup
        face_lat = encode_face(b, rand_in((1, 3, 32, 32), seed=12))
        with torch.no_grad():
            for t in (0.0, 0.25, 0.5, 0.75, 1.0):
                out = decode_fused(b, face_lat, latent_interp(b, z1, z2, t))
                assert out.abs().max() <= 1.0

    def test_interp_t_out_of_range(self, setup):
        b, z1, z2 = setup
        with pytest.raises(ValueError):
            latent_interp(b, z1, z2, 1.5)

    def test_scale_one_is_identity(self, setup):
        b, z1, _ = setup
        with torch.no_grad():
            assert torch.equal(latent_arith(b, z1, None, "scale", alpha=1.0), encode_mesh(b, z1))

    def test_sub_self_is_zero(self, setup):
        b, z1, _ = setup
        with torch.no_grad():
            out = latent_arith(b, z1, z1, "sub")
        assert torch.equal(out, torch.zeros_like(out))

    def test_add_commutative(self, setup):
        b, z1, z2 = setup
        with torch.no_grad():
            assert torch.equal(latent_arith(b, z1, z2, "add"), latent_arith(b, z2, z1, "add"))

    def test_unknown_op_rejected(self, setup):
        b, z1, z2 = setup
        with pytest.raises(ValueError):
            latent_arith(b, z1, z2, "mul")


class TestInit:
    def test_same_seed_same_weights(self):
        a = init_weights(small_net_config(), 7)
        b = init_weights(small_net_config(), 7)
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            assert torch.equal(pa, pb)

    def test_different_seed_different_weights(self):
        a = init_weights(small_net_config(), 7)
        b = init_weights(small_net_config(), 8)
        assert any(not torch.equal(pa, pb)
                   for pa, pb in zip(a.parameters(), b.parameters()))

    def test_biases_zero_weights_scaled(self):
        b = init_weights(small_net_config(), 0)
        stds = []
        for name, p in b.named_parameters():
            if name.endswith(".bias"):
                assert torch.all(p == 0.0)
            else:
                stds.append(p.std().item())
        assert 0.01 < np.mean(stds) < 0.03

    def test_tiny_config_under_5k_params(self):
        b = ModelBundle(tiny_net_config())
        assert sum(p.numel() for p in b.parameters()) <= 5000

    def test_generator_discriminator_partition(self):
        b = ModelBundle(small_net_config())
        g = sum(p.numel() for p in b.generator_parameters())
        d = sum(p.numel() for p in b.discriminator_parameters())
        assert g + d == sum(p.numel() for p in b.parameters())


class TestTensorConversion:
    def test_batch_round_trip(self):
        rng = np.random.default_rng(0)
        imgs = [rng.random((8, 8, 3)).astype(np.float32) * 2 - 1 for _ in range(3)]
        back = torch_to_images(batch_to_torch(imgs))
        for a, b in zip(imgs, back):
            assert np.array_equal(a, b)
