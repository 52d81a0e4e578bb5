"""Encoder-classifier tests: attention oracles, residual identities,
classification contracts, full-model gradient checks, padding invariance,
tag sensitivity, and checkpoint round trips.
"""

import numpy as np
import pytest

from switchpe.corpus import PAD_ID, Sentence, Token, build_tfidf, build_vocab
from switchpe.errors import CompatibilityError, ConfigError, UsageError
from switchpe.model import (
    Batch,
    Model,
    ModelConfig,
    classify,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
)
from switchpe.posenc import PEScheme
from switchpe.switchpoints import SPIVariant, clamp_spi, spi
from switchpe.tensor import Tensor, no_grad

from helpers import grad_check


def sent(uid, pairs, sentiment):
    return Sentence(uid=uid, tokens=tuple(Token(s, t) for s, t in pairs), sentiment=sentiment)


def toy_sentences():
    return [
        sent("s0", [("main", "HI"), ("ghar", "HI"), ("late", "EN"), ("hoon", "HI")], "positive"),
        sent("s1", [("yeh", "HI"), ("movie", "EN"), ("bahut", "HI"), ("boring", "EN"),
                    ("thi", "HI")], "negative"),
        sent("s2", [("kal", "HI"), ("office", "EN")], "neutral"),
        sent("s3", [("good", "EN"), ("morning", "EN"), ("dost", "HI")], "positive"),
    ]


def tiny_cfg(**kw):
    base = dict(dim=8, heads=2, layers=1, pe_scheme="RELATIVE", spi_variant="reset_all",
                rel_k=2, p_max=16, cnn_filters=4, cnn_kernel=3, ffn_dim=16,
                use_layer_norm=True, use_ffn=True, dropout=0.0, seed=0)
    base.update(kw)
    return ModelConfig(**base)


def build(**kw):
    sentences = toy_sentences()
    vocab = build_vocab(sentences)
    tfidf = build_tfidf(sentences, vocab)
    return Model(tiny_cfg(**kw), vocab, tfidf), sentences


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def test_config_rejects_indivisible_heads():
    with pytest.raises(ConfigError):
        tiny_cfg(dim=10, heads=3)


def test_config_rejects_even_kernel():
    with pytest.raises(ConfigError):
        tiny_cfg(cnn_kernel=4)


def test_config_rejects_unknown_scheme_and_variant():
    with pytest.raises(ConfigError):
        tiny_cfg(pe_scheme="FOURIER")
    with pytest.raises(ConfigError):
        tiny_cfg(spi_variant="sometimes")


def test_config_rejects_bad_dropout_and_window():
    with pytest.raises(ConfigError):
        tiny_cfg(dropout=1.0)
    with pytest.raises(ConfigError):
        tiny_cfg(attn_window=-1)


def test_default_dim_divides_default_heads():
    cfg = ModelConfig()
    assert cfg.dim % cfg.heads == 0
    assert cfg.ffn_width == 4 * cfg.dim


# ---------------------------------------------------------------------------
# batching
# ---------------------------------------------------------------------------


def test_make_batch_layout():
    model, sentences = build(p_max=16)
    batch = model.make_batch(sentences)
    assert batch.ids.shape == (4, 5)
    # right padding with PAD ids and False mask
    assert batch.ids[2, 2:].tolist() == [PAD_ID] * 3
    assert batch.mask[2].tolist() == [True, True, False, False, False]
    # switch-point indices match the sequence-level computation
    expected = spi(sentences[0].tags, SPIVariant.RESET_ALL).indices
    assert tuple(batch.spi[0, :4]) == expected
    assert batch.spi[2, 2:].tolist() == [0, 0, 0]
    # tf-idf weights are normalized over real tokens and zero at padding
    sums = (batch.tfw * batch.mask).sum(axis=1)
    assert np.allclose(sums, 1.0, atol=1e-12)
    assert np.all(batch.tfw[~batch.mask] == 0.0)
    assert batch.labels.tolist() == [2, 0, 1, 2]


def test_make_batch_clamps_spi_to_table():
    model, _ = build(p_max=2, pe_scheme="SP_DYNAMIC")
    long = sent("m0", [(f"w{i}", "HI") for i in range(6)], "neutral")
    batch = model.make_batch([long])
    manual = clamp_spi(spi(long.tags, SPIVariant.RESET_ALL), 2).indices
    assert tuple(batch.spi[0]) == manual == (0, 1, 1, 1, 1, 1)


def test_make_batch_rejects_empty():
    model, _ = build()
    with pytest.raises(UsageError):
        model.make_batch([])
    with pytest.raises(UsageError):
        model.make_batch([Sentence(uid="e", tokens=(), sentiment="neutral")])


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------


def test_single_token_attends_to_itself_with_weight_one():
    model, _ = build(use_ffn=False, use_layer_norm=False)
    one = sent("t", [("kal", "HI")], "neutral")
    batch = model.make_batch([one])
    collected = []
    with no_grad():
        enc = model.encode(batch, collect_attention=collected)
    assert len(collected) == 1
    assert collected[0].shape == (1, 2, 1, 1)
    assert np.all(collected[0] == 1.0)
    # output is the value row pushed through the output projection, plus residual
    x0 = model.embedding.data[batch.ids[0, 0]]
    proj = model.layers[0].proj
    expected = x0 + x0 @ proj.wv.data @ proj.wo.data
    assert np.allclose(enc.data[0, 0], expected, atol=1e-12)


def test_all_queries_pinned_to_one_live_key():
    model, _ = build(use_ffn=False, use_layer_norm=False)
    rng = np.random.default_rng(3)
    x = Tensor(rng.normal(size=(1, 3, 8)))
    batch = Batch(
        ids=np.zeros((1, 3), dtype=np.int64),
        mask=np.ones((1, 3), dtype=bool),
        spi=np.zeros((1, 3), dtype=np.int64),
        tfw=np.full((1, 3), 1 / 3),
        labels=np.zeros(1, dtype=np.int64),
    )
    attn_mask = np.zeros((1, 1, 3, 3), dtype=bool)
    attn_mask[:, :, :, 1] = True  # key 1 is the only visible key
    live = Tensor(np.ones((1, 3, 1)))
    layer = model.layers[0]
    with no_grad():
        out = model._mha(layer, x, batch, attn_mask, live, False, None, None)
    expected = x.data[0, 1] @ layer.proj.wv.data @ layer.proj.wo.data
    for row in range(3):
        assert np.allclose(out.data[0, row], expected, atol=1e-12)


def test_two_token_attention_matches_numpy_oracle():
    model, _ = build(dim=2, heads=1, ffn_dim=4, cnn_filters=2,
                     use_ffn=False, use_layer_norm=False)
    two = sent("t", [("kal", "HI"), ("office", "EN")], "neutral")
    batch = model.make_batch([two])
    with no_grad():
        enc = model.encode(batch)
    x = model.embedding.data[batch.ids[0]]
    proj = model.layers[0].proj
    q, k, v = x @ proj.wq.data, x @ proj.wk.data, x @ proj.wv.data
    logits = q @ k.T / np.sqrt(2.0)
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    weights = e / e.sum(axis=-1, keepdims=True)
    expected = x + (weights @ v) @ proj.wo.data
    assert np.allclose(enc.data[0], expected, atol=1e-12)


def test_padded_positions_stay_zero_through_attention():
    model, sentences = build(use_ffn=False, use_layer_norm=False)
    short, longer = sentences[2], sentences[3]
    batch = model.make_batch([short, longer])
    with no_grad():
        enc = model.encode(batch)
    # PAD embedding row is zero and PAD query output is masked to zero
    assert np.all(enc.data[0, 2:] == 0.0)


def test_attention_mask_band_and_pad_rows():
    model, _ = build(attn_window=1)
    mask = np.array([[True, True, False]])
    m = model._attention_mask(mask)
    assert m.shape == (1, 1, 3, 3)
    assert m[0, 0, 0].tolist() == [True, True, False]
    assert m[0, 0, 1].tolist() == [True, True, False]
    # PAD query keeps the full key row so its softmax row stays well-formed
    assert m[0, 0, 2].tolist() == [True, True, False]

    wide = np.array([[True] * 4])
    m2 = build(attn_window=1)[0]._attention_mask(wide)
    assert m2[0, 0, 0].tolist() == [True, True, False, False]
    assert m2[0, 0, 3].tolist() == [False, False, True, True]


# ---------------------------------------------------------------------------
# encoder stack
# ---------------------------------------------------------------------------


def test_zero_layers_is_identity_on_embeddings():
    for scheme in PEScheme:
        model, sentences = build(layers=0, pe_scheme=scheme.name)
        batch = model.make_batch(sentences[:2])
        with no_grad():
            enc = model.encode(batch)
        assert np.array_equal(enc.data, model.embedding.data[batch.ids])


def test_encoder_output_shape():
    for scheme in ("SINUSOIDAL", "SP_DYNAMIC_RELATIVE"):
        model, sentences = build(layers=2, pe_scheme=scheme)
        batch = model.make_batch(sentences)
        with no_grad():
            enc = model.encode(batch)
        assert enc.data.shape == (4, 5, 8)


def test_zero_output_projection_reduces_to_residual():
    model, sentences = build(layers=2, use_ffn=False, use_layer_norm=False)
    for layer in model.layers:
        layer.proj.wo.data[:] = 0.0
    batch = model.make_batch(sentences)
    with no_grad():
        enc = model.encode(batch)
    assert np.array_equal(enc.data, model.embedding.data[batch.ids])


def test_sequence_too_long_for_position_table():
    model, _ = build(p_max=3, pe_scheme="SINUSOIDAL")
    long = sent("l", [(f"w{i}", "HI") for i in range(5)], "neutral")
    from switchpe.errors import LengthError

    with pytest.raises(LengthError):
        with no_grad():
            model.encode(model.make_batch([long]))


# ---------------------------------------------------------------------------
# classification head
# ---------------------------------------------------------------------------


def test_probabilities_on_simplex():
    model, sentences = build()
    probs = model.predict_proba(sentences)
    assert probs.shape == (4, 3)
    assert np.all(probs >= 0.0)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_zero_dense_layer_gives_uniform_output():
    model, sentences = build()
    model.dense_w.data[:] = 0.0
    model.dense_b.data[:] = 0.0
    probs = classify(sentences[0], model)
    assert np.allclose(probs, 1.0 / 3.0, atol=1e-15)


def test_classify_deterministic():
    model, sentences = build(pe_scheme="SP_DYNAMIC_RELATIVE", layers=2)
    a = model.predict_proba(sentences)
    b = model.predict_proba(sentences)
    assert np.array_equal(a, b)


def test_classify_rejects_empty_sentence():
    model, _ = build()
    with pytest.raises(UsageError):
        classify(Sentence(uid="e", tokens=(), sentiment="neutral"), model)


# ---------------------------------------------------------------------------
# loss and gradients
# ---------------------------------------------------------------------------


def test_forced_example_has_near_zero_loss_and_grads():
    model, sentences = build()
    target = sentences[0]
    model.dense_w.data[:] = 0.0
    model.dense_b.data[:] = 0.0
    model.dense_b.data[target.label] = 50.0
    loss, grads = loss_and_grads(model, model.make_batch([target]))
    assert loss < 1e-12
    for name, g in grads.items():
        assert np.max(np.abs(g)) < 1e-10, name


def test_duplicated_batch_keeps_mean_loss():
    model, sentences = build(pe_scheme="SP_DYNAMIC")
    once, _ = loss_and_grads(model, model.make_batch(sentences))
    twice, _ = loss_and_grads(model, model.make_batch(sentences + sentences))
    assert abs(once - twice) <= 1e-12


def test_pad_embedding_row_gradient_is_zero():
    model, sentences = build(finetune_embeddings=True)
    _, grads = loss_and_grads(model, model.make_batch(sentences))
    assert "embedding" in grads
    assert np.all(grads["embedding"][PAD_ID] == 0.0)
    # real rows do receive gradient
    assert np.max(np.abs(grads["embedding"])) > 0.0


def test_full_model_gradients_match_finite_differences():
    model, sentences = build(
        dim=8, heads=2, layers=2, pe_scheme="SP_DYNAMIC_RELATIVE",
        p_max=8, rel_k=2, cnn_filters=3, ffn_dim=12,
        finetune_embeddings=True, seed=11,
    )
    # non-zero tables so their gradients are exercised away from the origin
    rng = np.random.default_rng(7)
    for layer in model.layers:
        layer.theta.table.data[:] = rng.normal(0.0, 0.3, layer.theta.table.data.shape)
        layer.rel.table.data[:] = rng.normal(0.0, 0.3, layer.rel.table.data.shape)
    batch = model.make_batch([sentences[0], sentences[3]])  # lengths 4 and 3
    params = [p for _, p in model.named_params()]
    grad_check(lambda: model.loss(batch), params, tol=1e-5, h=1e-5)


def test_input_added_scheme_gradients_match_finite_differences():
    model, sentences = build(
        dim=8, heads=2, layers=1, pe_scheme="SP_DYNAMIC", p_max=8,
        cnn_filters=3, ffn_dim=12, finetune_embeddings=True, seed=5,
    )
    model.theta0.table.data[:] = np.random.default_rng(9).normal(
        0.0, 0.3, model.theta0.table.data.shape)
    batch = model.make_batch(sentences[:2])
    params = [p for _, p in model.named_params()]
    grad_check(lambda: model.loss(batch), params, tol=1e-5, h=1e-5)


# ---------------------------------------------------------------------------
# behavioural invariants
# ---------------------------------------------------------------------------


def test_padding_never_changes_predictions():
    for scheme in PEScheme:
        model, sentences = build(layers=2, pe_scheme=scheme.name, seed=13)
        if model.theta0 is not None:
            model.theta0.table.data[:] = 0.1
        alone = model.predict_proba([sentences[2]])[0]
        padded = model.predict_proba([sentences[2], sentences[1]])[0]
        assert np.max(np.abs(alone - padded)) <= 1e-9, scheme


def _tag_flip_pairs(model, count, rng):
    """Sentence pairs sharing surfaces whose tags give different SPI vectors."""
    words = [t for t in model.vocab.id_to_token[2:]]
    pairs = []
    while len(pairs) < count:
        n = int(rng.integers(3, 7))
        surfaces = rng.choice(words, size=n).tolist()
        tags_a = [("HI" if rng.random() < 0.5 else "EN") for _ in range(n)]
        tags_b = list(tags_a)
        tags_b[int(rng.integers(n))] = "HI" if tags_b[int(rng.integers(n))] == "EN" else "EN"
        if spi(tags_a, SPIVariant.RESET_ALL) == spi(tags_b, SPIVariant.RESET_ALL):
            continue
        a = sent(f"a{len(pairs)}", list(zip(surfaces, tags_a)), "neutral")
        b = sent(f"b{len(pairs)}", list(zip(surfaces, tags_b)), "neutral")
        pairs.append((a, b))
    return pairs


def test_tag_changes_ignored_by_position_only_schemes():
    rng = np.random.default_rng(21)
    for scheme in ("SINUSOIDAL", "DYNAMIC", "RELATIVE"):
        model, _ = build(pe_scheme=scheme, layers=2, seed=3)
        if model.theta0 is not None:
            model.theta0.table.data[:] = rng.normal(0.0, 0.4, model.theta0.table.data.shape)
        for a, b in _tag_flip_pairs(model, 20, rng):
            pa = model.predict_proba([a])[0]
            pb = model.predict_proba([b])[0]
            assert np.array_equal(pa, pb), scheme


def test_tag_changes_move_switch_aware_schemes():
    rng = np.random.default_rng(22)
    for scheme in ("SP_DYNAMIC", "SP_DYNAMIC_RELATIVE"):
        model, _ = build(pe_scheme=scheme, layers=2, seed=3)
        tables = [model.theta0.table] if model.theta0 is not None else [
            layer.theta.table for layer in model.layers]
        for t in tables:
            t.data[:] = rng.normal(0.0, 0.4, t.data.shape)
        moved = 0
        for a, b in _tag_flip_pairs(model, 20, rng):
            pa = model.predict_proba([a])[0]
            pb = model.predict_proba([b])[0]
            if np.max(np.abs(pa - pb)) > 1e-12:
                moved += 1
        assert moved >= 1, scheme


def test_dropout_changes_training_forward_only():
    model, sentences = build(dropout=0.5)
    batch = model.make_batch(sentences)
    with no_grad():
        base = model.loss(batch, train=False).item()
        again = model.loss(batch, train=False).item()
        trained = model.loss(batch, train=True, rng=np.random.default_rng(0)).item()
    assert base == again
    assert trained != base


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    model, sentences = build(pe_scheme="SP_DYNAMIC_RELATIVE", layers=2, seed=17)
    rng = np.random.default_rng(1)
    for layer in model.layers:
        layer.theta.table.data[:] = rng.normal(size=layer.theta.table.data.shape)
        layer.rel.table.data[:] = rng.normal(size=layer.rel.table.data.shape)
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, model, extra_config={"epochs": 3, "lr": 0.001})
    loaded, extra = load_checkpoint(path)
    assert extra == {"epochs": 3, "lr": 0.001}
    assert loaded.cfg == model.cfg
    assert loaded.vocab.id_to_token == model.vocab.id_to_token
    assert loaded.tfidf.n_docs == model.tfidf.n_docs
    assert np.array_equal(loaded.tfidf.df, model.tfidf.df)
    for (na, pa), (nb, pb) in zip(model.named_params(), loaded.named_params()):
        assert na == nb
        assert np.array_equal(pa.data, pb.data), na
    assert np.array_equal(model.predict_proba(sentences), loaded.predict_proba(sentences))


def test_checkpoint_bytes_deterministic(tmp_path):
    a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(a, build(seed=4)[0])
    save_checkpoint(b, build(seed=4)[0])
    assert a.read_bytes() == b.read_bytes()


def test_checkpoint_rejects_foreign_file(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 32)
    with pytest.raises(CompatibilityError):
        load_checkpoint(path)
