import math

import numpy as np
import pytest

from typegtr import net
from typegtr.decoding import (
    BeamHypothesis,
    beam_generate,
    greedy_decode,
    likelihood,
    likelihood_from_ids,
    similarity,
)
from typegtr.vocab import tokenize

from conftest import random_input_ids, tiny_model
from oracles import enumerate_sequences, stepwise_likelihood


class TestBeamGenerate:
    def test_beam_one_equals_greedy(self, rng):
        for seed in range(5):
            model = tiny_model(seed=seed)
            x = random_input_ids(model, rng)
            assert beam_generate(model, x, 1, 6)[0] == greedy_decode(model, x, 6)

    def test_matches_exhaustive_enumeration(self, rng):
        # Width large enough to disable pruning: beam must equal the
        # brute-force ranking exactly, order included.
        for seed in range(6):
            model = tiny_model(seed=seed, n_content=3)
            x = random_input_ids(model, rng)
            max_len = 3
            k = (len(model.vocab) - 1) ** max_len
            beam = beam_generate(model, x, k, max_len)
            oracle = enumerate_sequences(model, x, max_len)
            assert len(beam) == len(oracle)
            for hyp, (log_prob, ids) in zip(beam, oracle):
                assert hyp.ids == ids
                assert hyp.log_prob == pytest.approx(log_prob, rel=1e-9)

    def test_small_beam_is_prefix_consistent_subset(self, rng):
        model = tiny_model(seed=17, n_content=3)
        x = random_input_ids(model, rng)
        beam = beam_generate(model, x, 4, 3)
        oracle_ids = [ids for _, ids in enumerate_sequences(model, x, 3)]
        for hyp in beam:
            assert hyp.ids in oracle_ids

    def test_sorted_and_bounded(self, rng):
        model = tiny_model(seed=8)
        x = random_input_ids(model, rng)
        beam = beam_generate(model, x, 5, 6)
        assert len(beam) <= 5
        probs = [h.likelihood for h in beam]
        assert probs == sorted(probs, reverse=True)
        for hyp in beam:
            assert hyp.ids[0] == model.vocab.bos_id
            assert hyp.finished == (hyp.ids[-1] == model.vocab.eos_id)
            assert 0.0 < hyp.likelihood <= 1.0

    def test_hypothesis_length_budget(self, rng):
        model = tiny_model(seed=13)
        x = random_input_ids(model, rng)
        for hyp in beam_generate(model, x, 5, 4):
            assert len(hyp.ids) - 1 <= 4  # generated tokens, BOS excluded

    def test_invalid_width(self):
        model = tiny_model()
        with pytest.raises(ValueError):
            beam_generate(model, [model.vocab.bos_id, model.vocab.eos_id], 0, 4)


class TestLikelihood:
    def test_recompute_matches_recorded(self, rng):
        worst = 0.0
        for seed in range(5):
            model = tiny_model(seed=seed)
            x = random_input_ids(model, rng)
            for hyp in beam_generate(model, x, 6, 4):
                if not hyp.finished:
                    continue
                again = likelihood_from_ids(model, x, np.array(hyp.ids))
                worst = max(worst, abs(again - hyp.likelihood) / hyp.likelihood)
        assert worst < 1e-9

    def test_matches_stepwise_oracle(self, rng):
        model = tiny_model(seed=21)
        x = random_input_ids(model, rng)
        v = model.vocab
        y = [v.bos_id, 5, 4, 6, v.eos_id]
        ours = likelihood_from_ids(model, x, y)
        oracle = stepwise_likelihood(model, x, y)
        assert ours == pytest.approx(oracle, rel=1e-9)

    def test_single_token_type_is_p_times_p_eos(self):
        model = tiny_model(seed=3)
        v = model.vocab
        x = np.array([v.bos_id, 4, v.eos_id])
        h = net.encode(model, x)
        p1 = net.decode_step(model, h, np.array([v.bos_id]))[5]
        p2 = net.decode_step(model, h, np.array([v.bos_id, 5]))[v.eos_id]
        lik = likelihood_from_ids(model, x, [v.bos_id, 5, v.eos_id])
        assert lik == pytest.approx(p1 * p2, rel=1e-9)

    def test_equals_exp_sum_of_logs(self, rng):
        model = tiny_model(seed=7)
        x = random_input_ids(model, rng)
        v = model.vocab
        y = [v.bos_id, 6, 5, v.eos_id]
        h = net.encode(model, x)
        logs = net.sequence_log_probs(model, h, np.array(y))
        assert likelihood_from_ids(model, x, y) == pytest.approx(
            math.exp(logs.sum()), rel=1e-9
        )

    def test_text_level_wrapper_round_trips_punctuation(self):
        # Content tokens are single punctuation chars, so detokenized
        # text re-tokenizes to the same ids and the text-level op agrees.
        model = tiny_model(seed=5)
        v = model.vocab
        text = "+-"
        x_text = "*/"
        lik_text = likelihood(model, x_text, text)
        x_ids = tokenize(x_text, v, model.dims.max_seq_len)
        y_ids = tokenize(text, v, 32)
        assert lik_text == pytest.approx(likelihood_from_ids(model, x_ids, y_ids), rel=1e-12)

    def test_in_unit_interval(self, rng):
        for seed in range(4):
            model = tiny_model(seed=seed)
            x = random_input_ids(model, rng)
            y = random_input_ids(model, rng)
            lik = likelihood_from_ids(model, x, y)
            assert 0.0 < lik <= 1.0


class TestSimilarity:
    def test_bounded(self, rng):
        for seed in range(4):
            model = tiny_model(seed=seed)
            sim = similarity(model, "+ - *", "/ %"[:3])
            assert -1.0 - 1e-12 <= sim <= 1.0 + 1e-12

    def test_matches_manual_average_cosine(self):
        model = tiny_model(seed=19)
        v = model.vocab
        func_text = "+-*"
        type_text = "/"
        x_ids = tokenize(func_text, v, model.dims.max_seq_len)
        y_ids = tokenize(type_text, v, 32)
        h_x = net.encode(model, x_ids)
        h_y, _ = net.decoder_fwd(model, h_x, np.asarray(y_ids[:-1]))
        a = h_x.mean(axis=0)
        b = h_y.mean(axis=0)
        manual = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        assert similarity(model, func_text, type_text) == pytest.approx(manual, abs=1e-6)

    def test_deterministic(self):
        model = tiny_model(seed=23)
        assert similarity(model, "+ -", "*") == similarity(model, "+ -", "*")
