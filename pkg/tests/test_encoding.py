import hashlib

import numpy as np
import pytest
import torch

from duomotion.encoding import (
    SentenceFeature,
    TextFeatureEncoder,
    sinusoidal_table,
)


@pytest.fixture(scope="module")
def encoder():
    torch.manual_seed(0)
    enc = TextFeatureEncoder(feature_dim=64)
    enc.eval()
    return enc


class TestEncode:
    def test_deterministic(self, encoder):
        a = encoder.encode("a person waves at the camera")
        b = encoder.encode("a person waves at the camera")
        assert torch.equal(a, b)

    def test_shape_is_token_count_by_width(self, encoder):
        out = encoder.encode("one two three four")
        assert out.shape == (4, 64)

    def test_word_order_matters(self, encoder):
        a = encoder.encode("a b")
        b = encoder.encode("b a")
        assert not torch.allclose(a, b)

    def test_empty_text_yields_null_row(self, encoder):
        out = encoder.encode("")
        assert out.shape == (1, 64)
        assert torch.equal(out, encoder.null_token)
        assert torch.equal(encoder.encode("?!"), encoder.null_token)

    def test_pre_stack_embeddings_match_hash_plus_positions(self, encoder):
        # independent oracle: recompute the frozen lookup and position offsets
        text = "b a"
        got = encoder.token_embeddings(text).detach().numpy()
        table = sinusoidal_table(8, 64).numpy()
        rows = []
        for pos, tok in enumerate(["b", "a"]):
            digest = hashlib.blake2b(tok.encode(), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            rows.append(rng.standard_normal(64) + table[pos])
        np.testing.assert_allclose(got, np.stack(rows), atol=1e-6)

    def test_swapped_tokens_differ_only_by_position_before_stack(self, encoder):
        ab = encoder.token_embeddings("a b").detach().numpy()
        ba = encoder.token_embeddings("b a").detach().numpy()
        table = sinusoidal_table(2, 64).numpy()
        np.testing.assert_allclose(ab[0] - table[0], ba[1] - table[1], atol=1e-6)


class TestEncodeBatch:
    def test_matches_single_encode(self, encoder):
        texts = ["one person waves", "hello", ""]
        feats, valid = encoder.encode_batch(texts)
        assert feats.shape[0] == 3
        for i, t in enumerate(texts):
            single = encoder.encode(t)
            n = single.shape[0]
            assert valid[i, :n].all() and not valid[i, n:].any()
            torch.testing.assert_close(feats[i, :n], single, rtol=1e-5, atol=1e-5)

    def test_all_empty(self, encoder):
        feats, valid = encoder.encode_batch(["", ""])
        assert feats.shape == (2, 1, 64)
        assert valid.all()
        assert torch.equal(feats[0], encoder.null_token)


class TestSentenceFeature:
    def test_identity_initialized_single_token_passthrough(self):
        sf = SentenceFeature(8, 8, identity_init=True)
        row = torch.randn(1, 8)
        torch.testing.assert_close(sf(row), row)

    def test_duplicate_rows_pool_to_same_output(self):
        torch.manual_seed(1)
        sf = SentenceFeature(8, 6)
        row = torch.randn(1, 8)
        two = torch.cat([row, row], dim=0)
        torch.testing.assert_close(sf(two), sf(row))

    def test_matches_manual_affine_oracle(self):
        torch.manual_seed(2)
        sf = SentenceFeature(5, 7)
        words = torch.randn(3, 5)
        got = sf(words).detach().numpy()
        w = sf.proj.weight.detach().numpy()
        b = sf.proj.bias.detach().numpy()
        expected = words.numpy().mean(axis=0) @ w.T + b
        np.testing.assert_allclose(got[0], expected, atol=1e-6)

    def test_identity_init_requires_square(self):
        with pytest.raises(ValueError):
            SentenceFeature(4, 5, identity_init=True)

    def test_masked_pool_ignores_padding(self):
        torch.manual_seed(3)
        sf = SentenceFeature(5, 5)
        words = torch.randn(1, 3, 5)
        padded = torch.cat([words, torch.full((1, 2, 5), 99.0)], dim=1)
        valid = torch.tensor([[True, True, True, False, False]])
        torch.testing.assert_close(sf(padded, valid), sf(words))

    def test_empty_tokens_rejected(self):
        sf = SentenceFeature(4, 4)
        with pytest.raises(ValueError):
            sf(torch.zeros(0, 4))
