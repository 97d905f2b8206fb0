"""Tests for the concept VAE: encoder, decoder, heads and checkpoints."""

import math

import pytest
import torch

from cinevae.config import ModelConfig
from cinevae.errors import RejectedInputError
from cinevae.network import (
    ConceptVAE,
    LatentClassifier,
    build_model,
    describe_model,
    load_checkpoint,
    one_hot,
    save_checkpoint,
)


@pytest.fixture
def model(tiny_config) -> ConceptVAE:
    return build_model(tiny_config.model, seed=0, dtype=torch.float64)


class TestEncode:
    def test_all_background_frame_is_finite(self, model):
        """Given randomly initialised weights, an all-zero frame encodes to finite vectors."""
        frames = torch.zeros((1, 3, 8, 8), dtype=torch.int64)

        mu, log_sigma = model.encode(frames)

        assert mu.shape == (1, 4)
        assert torch.isfinite(mu).all() and torch.isfinite(log_sigma).all()

    def test_identical_frames_identical_codes(self, model):
        frame = torch.randint(0, 4, (1, 3, 8, 8), generator=torch.Generator().manual_seed(1))

        mu, log_sigma = model.encode(torch.cat([frame, frame]))

        assert torch.equal(mu[0], mu[1])
        assert torch.equal(log_sigma[0], log_sigma[1])

    def test_shape_mismatch_rejected(self, model):
        with pytest.raises(RejectedInputError, match="frames must be"):
            model.encode(torch.zeros((1, 2, 8, 8), dtype=torch.int64))

    def test_one_hot_channel_layout(self):
        """Channel s * 4 + c marks class c in slice s."""
        labels = torch.zeros((1, 3, 2, 2), dtype=torch.int64)
        labels[0, 1, 0, 1] = 2

        encoded = one_hot(labels)

        assert encoded.shape == (1, 12, 2, 2)
        assert encoded[0, 6, 0, 1] == 1.0
        assert encoded[0, 4, 0, 1] == 0.0
        assert torch.equal(encoded.view(1, 3, 4, 2, 2).sum(dim=2), torch.ones((1, 3, 2, 2)))


class TestReparameterize:
    def test_zero_noise_returns_mean(self):
        mu = torch.tensor([0.3, -1.2])

        assert torch.equal(ConceptVAE.reparameterize(mu, torch.zeros(2), torch.zeros(2)), mu)

    def test_arithmetic(self):
        mu = torch.tensor([1.0, 2.0], dtype=torch.float64)
        log_sigma = torch.tensor([math.log(2.0), math.log(3.0)], dtype=torch.float64)
        epsilon = torch.tensor([1.0, -1.0], dtype=torch.float64)

        z = ConceptVAE.reparameterize(mu, log_sigma, epsilon)

        assert z.tolist() == pytest.approx([3.0, -1.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(RejectedInputError):
            ConceptVAE.reparameterize(torch.zeros(2), torch.zeros(3), torch.zeros(2))


class TestDecode:
    def test_pixel_probabilities_sum_to_one(self, model):
        z = torch.randn((5, 4), generator=torch.Generator().manual_seed(0), dtype=torch.float64)

        probs = model.decode(z)

        assert probs.shape == (5, 3, 4, 8, 8)
        assert torch.allclose(probs.sum(dim=2), torch.ones((5, 3, 8, 8), dtype=torch.float64), atol=1e-5)

    def test_wrong_latent_size_rejected(self, model):
        with pytest.raises(RejectedInputError, match="z must be"):
            model.decode(torch.zeros((1, 5), dtype=torch.float64))


class TestClassifiers:
    """Primary and concept heads read latent means frame by frame."""

    def test_primary_output_is_probability(self, model):
        m = 10.0 * torch.randn((4, 3, 4), generator=torch.Generator().manual_seed(2), dtype=torch.float64)

        y_hat = model.classify_primary(m)

        assert y_hat.shape == (4,)
        assert ((y_hat >= 0) & (y_hat <= 1)).all()

    def test_frame_order_matters(self):
        """Given a head reading only frame 0, swapping frames changes the output."""
        # Given
        head = LatentClassifier(in_features=2, frames=2, embed_dim=2, hidden=[1]).double()
        with torch.no_grad():
            head.embed.weight.copy_(torch.eye(2))
            head.embed.bias.zero_()
            head.mlp[0].weight.copy_(torch.tensor([[1.0, 0.0, 0.0, 0.0]]))
            head.mlp[0].bias.zero_()
            head.mlp[2].weight.fill_(1.0)
            head.mlp[2].bias.zero_()
        m = torch.tensor([[[1.0, 0.0], [3.0, 0.0]]], dtype=torch.float64)

        # When
        forward = head(m)
        swapped = head(m.flip(dims=[1]))

        # Then
        assert forward.item() == pytest.approx(1 / (1 + math.exp(-1.0)))
        assert swapped.item() == pytest.approx(1 / (1 + math.exp(-3.0)))

    def test_concept_head_ignores_remainder(self, model):
        """Given 1000 perturbations outside the concept subset, the probability is unchanged."""
        # Given
        gen = torch.Generator().manual_seed(3)
        m = torch.randn((1, 3, 4), generator=gen, dtype=torch.float64)
        reference = model.classify_concept(m, 0)

        # When/Then
        for _ in range(1000):
            perturbed = m.clone()
            perturbed[..., 2:] = 100.0 * torch.randn((1, 3, 2), generator=gen, dtype=torch.float64)
            assert torch.equal(model.classify_concept(perturbed, 0), reference)

    def test_invalid_concept_index_rejected(self, model):
        with pytest.raises(RejectedInputError, match="out of range"):
            model.classify_concept(torch.zeros((1, 3, 4), dtype=torch.float64), 1)

    def test_classifier_shape_rejected(self, model):
        with pytest.raises(RejectedInputError, match="classifier expects"):
            model.classify_primary(torch.zeros((1, 2, 4), dtype=torch.float64))

    def test_default_concept_head_width(self):
        assert ConceptVAE(ModelConfig()).concept_heads[0].in_features == 64


class TestForward:
    def test_batch_output_shapes(self, model):
        labels = torch.randint(0, 4, (2, 3, 3, 8, 8), generator=torch.Generator().manual_seed(4))

        out = model(labels, generator=torch.Generator().manual_seed(5))

        assert out.recon.shape == (2, 3, 3, 4, 8, 8)
        assert out.latent.mu.shape == (2, 3, 4)
        assert out.y_hat.shape == (2,)
        assert out.y_k_hat.shape == (2, 1)

    def test_without_decoding(self, model):
        labels = torch.zeros((1, 3, 3, 8, 8), dtype=torch.int64)

        assert model(labels, decode=False).recon is None

    def test_stage_parameters_grow(self, model):
        counts = [sum(p.numel() for p in model.stage_parameters(s)) for s in (1, 2, 3)]

        assert counts[0] < counts[1] < counts[2]
        assert counts[2] == model.parameter_counts()["total"]


class TestCheckpoint:
    def test_same_seed_same_initial_weights(self, tiny_config):
        first = build_model(tiny_config.model, seed=7)
        second = build_model(tiny_config.model, seed=7)

        for a, b in zip(first.state_dict().values(), second.state_dict().values()):
            assert torch.equal(a, b)

    def test_save_and_load(self, tmp_path, model, tiny_config):
        """Given a saved model, loading restores weights, configs and RNG position."""
        # Given
        path = tmp_path / "ckpt" / "stage1.pt"
        save_checkpoint(
            path, model, tiny_config.train.weights, "abc123", stage=1,
            rng_state={"seed": 0, "stage": 1, "epoch": 1}, extra={"note": "x"},
        )

        # When
        checkpoint = load_checkpoint(path)

        # Then
        assert checkpoint.stage == 1
        assert checkpoint.config_hash == "abc123"
        assert checkpoint.model_config == tiny_config.model
        assert checkpoint.rng_state == {"seed": 0, "stage": 1, "epoch": 1}
        assert checkpoint.extra == {"note": "x"}
        for name, value in model.state_dict().items():
            assert torch.equal(checkpoint.model.state_dict()[name], value)

    def test_missing_checkpoint_rejected(self, tmp_path):
        with pytest.raises(RejectedInputError, match="checkpoint not found"):
            load_checkpoint(tmp_path / "nope.pt")

    def test_describe_model(self, model):
        text = describe_model(model)

        assert "Latent: D=4, remainder=2 dims" in text
        assert "Concept SF: latent [0, 2)" in text
        assert "total:" in text
