import numpy as np
import pytest

from typegtr import net
from typegtr.vocab import RESERVED, Vocab

# Punctuation-only content tokens: single characters always lex back to
# themselves, so detokenize/retokenize round trips exactly.
PUNCT_TOKENS = ("+", "-", "*", "/", "%", "&", "|", "^", "~", "<", ">", "!")


def tiny_vocab(n_content: int = 4) -> Vocab:
    return Vocab(RESERVED + PUNCT_TOKENS[:n_content])


def tiny_model(
    seed: int = 0,
    n_content: int = 4,
    d_model: int = 8,
    n_layers: int = 1,
    n_heads: int = 2,
    d_ff: int = 12,
    max_seq_len: int = 32,
) -> net.SeqModel:
    dims = net.ModelDims(d_model, n_layers, n_heads, d_ff, max_seq_len)
    return net.init_params(tiny_vocab(n_content), dims, seed)


def random_input_ids(model: net.SeqModel, rng, max_content: int = 5) -> np.ndarray:
    vocab = model.vocab
    n = int(rng.integers(1, max_content + 1))
    content = rng.integers(len(RESERVED), len(vocab), size=n)
    return np.array([vocab.bos_id, *content.tolist(), vocab.eos_id])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_pipeline(tmp_path_factory):
    """A 120-function synthetic corpus with both models trained briefly.

    Big enough for structural end-to-end assertions, small enough to
    build once per session in seconds.  Accuracy-level claims belong to
    the acceptance suite, which trains at full desk scale.
    """
    from typegtr import pipeline, synthetic, training
    from typegtr.training import Hyperparams
    from typegtr.vocab import build_vocab

    root = tmp_path_factory.mktemp("small_corpus")
    synthetic.generate_corpus(root, 240, seed=7)
    functions, _, index = pipeline.load_corpus(root)
    train, test = pipeline.build_dataset_instances(functions, index, 0.15, seed=7)
    pairs = [inst.pair for inst in train]
    texts = [p.input.function.source_text for p in pairs] + [p.expected_type for p in pairs]
    vocab = build_vocab(texts, min_count=2)
    model = net.init_params(vocab, net.ModelDims(), seed=7)
    gen = training.train_generative(
        model, pairs, Hyperparams(epochs=6, learning_rate=1.5e-3, batch_size=8, seed=7)
    )
    contrastive = training.build_contrastive_dataset(
        pairs, gen, None, 5, seed=10, visible_lists=[inst.visible_types for inst in train]
    )
    sim = training.train_contrastive(
        gen.copy(), contrastive, Hyperparams(epochs=3, learning_rate=1.5e-3, batch_size=8, seed=8)
    )
    return {
        "root": root,
        "train": train,
        "test": test,
        "pairs": pairs,
        "gen": gen,
        "sim": sim,
        "contrastive": contrastive,
    }
