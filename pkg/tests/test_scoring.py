import math
import random

import pytest

from oracles import oracle_lambda_document

from grammarlr.corpus import Corpus, Document, TaggedToken, VerificationProblem
from grammarlr.errors import ContractError, DataError
from grammarlr.masking import MaskingLexicon
from grammarlr.ngram import EOS, UNK, DiscountSchedule, Vocabulary, train
from grammarlr.scoring import (
    LambdaConfig,
    LambdaTrace,
    TokenScore,
    derive_seed,
    lambda_document,
    sample_reference_sets,
    score_corpus,
    verify_problem,
)

ALPHABET = ("a", "b", "c", "d", "e", ".")


def random_sentences(rng, n_sents, max_len=6):
    return [
        tuple(rng.choice(ALPHABET) for _ in range(rng.randrange(1, max_len + 1)))
        for _ in range(n_sents)
    ]


def doc_of(rng, doc_id, n_sents=4):
    return Document(id=doc_id, sentences=tuple(random_sentences(rng, n_sents)))


class TestLambdaConfig:
    def test_defaults(self):
        cfg = LambdaConfig()
        assert (cfg.order, cfg.refs, cfg.seed) == (10, 100, 0)
        assert cfg.discount == 0.75
        assert cfg.discount_mode == "constant"
        assert cfg.sampling == "without_replacement"

    def test_validation(self):
        with pytest.raises(ValueError):
            LambdaConfig(order=0)
        with pytest.raises(ValueError):
            LambdaConfig(refs=0)
        with pytest.raises(ValueError):
            LambdaConfig(discount=1.0)
        with pytest.raises(ValueError):
            LambdaConfig(discount_mode="other")
        with pytest.raises(ValueError):
            LambdaConfig(sampling="sometimes")

    def test_json_round_trip(self):
        cfg = LambdaConfig(order=4, refs=7, seed=99, discount=0.5, discount_mode="modified")
        assert LambdaConfig.from_json_dict(cfg.to_json_dict()) == cfg


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(0, "p1") == derive_seed(0, "p1")

    def test_varies_with_problem_and_seed(self):
        seeds = {derive_seed(s, p) for s in (0, 1, 2) for p in ("p1", "p2", "p3")}
        assert len(seeds) == 9

    def test_range(self):
        s = derive_seed(12345, "problem-x")
        assert 0 <= s < 2**64


class TestSampling:
    def _pool(self, n):
        return [(f"s{i}",) for i in range(n)]

    def test_shapes(self):
        samples = sample_reference_sets(self._pool(10), size=4, count=3, seed=1)
        assert len(samples) == 3
        assert all(len(s) == 4 for s in samples)

    def test_without_replacement_within_sample(self):
        pool = self._pool(12)
        for sample in sample_reference_sets(pool, size=8, count=20, seed=2):
            assert len(set(sample)) == 8
            assert set(sample) <= set(pool)

    def test_pool_equal_to_size_returns_whole_pool(self):
        pool = self._pool(5)
        for sample in sample_reference_sets(pool, size=5, count=4, seed=3):
            assert sorted(sample) == sorted(pool)

    def test_small_pool_degrades_to_replacement(self):
        pool = self._pool(2)
        samples = sample_reference_sets(pool, size=6, count=2, seed=4)
        for sample in samples:
            assert len(sample) == 6
            assert set(sample) <= set(pool)

    def test_explicit_replacement_mode(self):
        pool = self._pool(2)
        samples = sample_reference_sets(
            pool, size=6, count=1, seed=5, sampling="with_replacement"
        )
        assert len(samples[0]) == 6  # duplicates forced by pigeonhole

    def test_deterministic_in_seed(self):
        pool = self._pool(9)
        a = sample_reference_sets(pool, size=3, count=5, seed=7)
        b = sample_reference_sets(pool, size=3, count=5, seed=7)
        c = sample_reference_sets(pool, size=3, count=5, seed=8)
        assert a == b
        assert a != c

    def test_errors(self):
        with pytest.raises(ValueError):
            sample_reference_sets(self._pool(3), size=0, count=1, seed=0)
        with pytest.raises(ValueError):
            sample_reference_sets(self._pool(3), size=1, count=0, seed=0)
        with pytest.raises(DataError):
            sample_reference_sets([], size=1, count=1, seed=0)
        with pytest.raises(ValueError):
            sample_reference_sets(self._pool(3), size=1, count=1, seed=0, sampling="x")


class TestLambdaDocument:
    def _models(self, rng, order=2, n_refs=3):
        known = random_sentences(rng, 5)
        ref_sets = [random_sentences(rng, 5) for _ in range(n_refs)]
        vocab = Vocabulary.from_sentences(
            [s for s in known] + [s for rs in ref_sets for s in rs]
        )
        sched = DiscountSchedule.constant(0.6)
        author = train(known, order, discounts=sched, vocab=vocab)
        refs = [train(rs, order, discounts=sched, vocab=vocab) for rs in ref_sets]
        return known, ref_sets, vocab, sched, author, refs

    def test_identical_models_score_exactly_zero(self):
        rng = random.Random(51)
        known = random_sentences(rng, 6)
        vocab = Vocabulary.from_sentences(known)
        author = train(known, 3, vocab=vocab)
        refs = [train(known, 3, vocab=vocab) for _ in range(4)]
        trace = lambda_document(random_sentences(rng, 3), author, refs)
        assert trace.total == 0.0
        assert all(ts.score == 0.0 for ts in trace.token_scores)
        assert all(s == 0.0 for s in trace.sentence_scores)

    def test_single_reference_collapses_to_logprob_difference(self):
        rng = random.Random(53)
        _, _, _, _, author, refs = self._models(rng, n_refs=1)
        unknown = random_sentences(rng, 4)
        trace = lambda_document(unknown, author, refs[:1])
        expected = math.fsum(
            author.sentence_logprob(s) - refs[0].sentence_logprob(s) for s in unknown
        )
        assert trace.total == pytest.approx(expected, abs=1e-9)

    def test_decomposition(self):
        rng = random.Random(59)
        _, _, _, _, author, refs = self._models(rng)
        unknown = random_sentences(rng, 4)
        trace = lambda_document(unknown, author, refs)
        assert math.fsum(ts.score for ts in trace.token_scores) == pytest.approx(
            trace.total, abs=1e-9
        )
        assert math.fsum(trace.sentence_scores) == pytest.approx(trace.total, abs=1e-9)

    def test_every_position_scored_including_end_marker(self):
        rng = random.Random(61)
        _, _, _, _, author, refs = self._models(rng)
        unknown = [("a", "b"), ("c",)]
        trace = lambda_document(unknown, author, refs)
        assert len(trace.token_scores) == (2 + 1) + (1 + 1)
        by_sentence = {}
        for ts in trace.token_scores:
            by_sentence.setdefault(ts.sentence_index, []).append(ts)
        for si, sent in enumerate(unknown):
            group = by_sentence[si]
            assert [ts.position for ts in group] == list(range(1, len(sent) + 2))
            assert [ts.token for ts in group] == [*sent, EOS]

    def test_matches_oracle(self):
        rng = random.Random(67)
        for _ in range(6):
            order = rng.randrange(1, 4)
            known, ref_sets, vocab, sched, author, refs = self._models(
                rng, order=order, n_refs=3
            )
            unknown = random_sentences(rng, 3)
            trace = lambda_document(unknown, author, refs)
            tok, sent, total = oracle_lambda_document(
                unknown, known, ref_sets, order, sched, vocab.sorted_items()
            )
            assert len(tok) == len(trace.token_scores)
            for got, want in zip(trace.token_scores, tok):
                assert got.score == pytest.approx(want, abs=1e-9)
            assert trace.total == pytest.approx(total, abs=1e-9)

    def test_model_mismatch_rejected(self):
        rng = random.Random(71)
        _, _, vocab, sched, author, refs = self._models(rng, order=2)
        other_order = train([("a", "b")], 3, vocab=vocab)
        with pytest.raises(ContractError, match="order"):
            lambda_document([("a",)], author, [other_order])
        other_vocab = train([("q", "r")], 2)
        with pytest.raises(ContractError, match="vocabulary"):
            lambda_document([("a",)], author, [other_vocab])

    def test_empty_inputs_rejected(self):
        rng = random.Random(73)
        _, _, _, _, author, refs = self._models(rng)
        with pytest.raises(DataError):
            lambda_document([], author, refs)
        with pytest.raises(DataError):
            lambda_document([()], author, refs)
        with pytest.raises(ValueError):
            lambda_document([("a",)], author, [])

    def test_trace_json_round_trip(self):
        rng = random.Random(79)
        _, _, _, _, author, refs = self._models(rng)
        trace = lambda_document(
            random_sentences(rng, 3), author, refs, problem_id="p7", seed=42
        )
        clone = LambdaTrace.from_json(trace.to_json())
        assert clone == trace

    def test_trace_decomposition_enforced(self):
        cfg = LambdaConfig(order=1, refs=1)
        with pytest.raises(ContractError, match="decompose"):
            LambdaTrace(
                token_scores=(TokenScore("a", 0, 1, 1.0),),
                sentence_scores=(1.0,),
                total=2.0,
                config=cfg,
                seed=0,
            )


def make_problem(rng, problem_id="p1", oov_unknown=False):
    unknown = doc_of(rng, f"{problem_id}-u")
    if oov_unknown:
        sents = tuple((*s, "zzz") for s in unknown.sentences)
        unknown = Document(id=unknown.id, sentences=sents)
    return VerificationProblem(
        id=problem_id,
        unknown_docs=(unknown,),
        known_docs=(doc_of(rng, f"{problem_id}-k1"), doc_of(rng, f"{problem_id}-k2")),
        label="Y",
    )


def make_refs(rng, n=4):
    return tuple(doc_of(rng, f"ref{i}") for i in range(n))


class TestVerifyProblem:
    CFG = LambdaConfig(order=2, refs=3, seed=11)

    def test_deterministic(self):
        rng = random.Random(83)
        problem, refs = make_problem(rng), make_refs(rng)
        t1 = verify_problem(problem, refs, self.CFG)
        t2 = verify_problem(problem, refs, self.CFG)
        assert t1.to_json() == t2.to_json()

    def test_seed_changes_result(self):
        rng = random.Random(89)
        problem, refs = make_problem(rng), make_refs(rng)
        t1 = verify_problem(problem, refs, self.CFG)
        t2 = verify_problem(problem, refs, LambdaConfig(order=2, refs=3, seed=12))
        assert t1.total != t2.total

    def test_effective_seed_recorded(self):
        rng = random.Random(97)
        problem, refs = make_problem(rng), make_refs(rng)
        trace = verify_problem(problem, refs, self.CFG)
        assert trace.seed == derive_seed(self.CFG.seed, problem.id)
        assert trace.problem_id == problem.id
        assert trace.config == self.CFG

    def test_oov_unknown_tokens_fall_to_unk(self):
        rng = random.Random(101)
        problem = make_problem(rng, oov_unknown=True)
        refs = make_refs(rng)
        trace = verify_problem(problem, refs, self.CFG)
        assert all(math.isfinite(ts.score) for ts in trace.token_scores)
        displayed = {ts.token for ts in trace.token_scores}
        assert "zzz" in displayed  # original surface survives in the trace
        assert UNK not in displayed

    def test_missing_material_rejected(self):
        rng = random.Random(103)
        problem = make_problem(rng)
        with pytest.raises(DataError, match="reference"):
            verify_problem(problem, (), self.CFG)

    def test_tagged_documents_masked_with_given_lexicon(self):
        lex = MaskingLexicon(
            retain=frozenset({"the"}),
            placeholders={
                "NOUN": "N", "PROPN": "P", "VERB": "V", "ADJ": "J",
                "ADV": "B", "NUM": "D", "SYM": "S",
            },
        )
        tagged = Document(
            id="u",
            sentences=((TaggedToken("The", "DET"), TaggedToken("cat", "NOUN")),),
        )
        problem = VerificationProblem(
            id="p1",
            unknown_docs=(tagged,),
            known_docs=(Document(id="k", sentences=(("the", "N"), ("N", "the"))),),
            label="Y",
        )
        refs = (Document(id="r", sentences=(("the", "N", "N"),)),)
        trace = verify_problem(problem, refs, LambdaConfig(order=2, refs=2, seed=0), lexicon=lex)
        assert [ts.token for ts in trace.token_scores] == ["the", "N", EOS]


class TestScoreCorpus:
    def _corpus(self, rng, n_problems=3):
        problems = tuple(make_problem(rng, f"p{i}") for i in range(n_problems))
        return Corpus(problems=problems, reference_docs=make_refs(rng, 5))

    def test_order_preserved(self):
        rng = random.Random(107)
        corpus = self._corpus(rng)
        traces = score_corpus(corpus, LambdaConfig(order=2, refs=2, seed=1))
        assert [t.problem_id for t in traces] == [p.id for p in corpus.problems]

    def test_parallel_matches_serial(self):
        rng = random.Random(109)
        corpus = self._corpus(rng)
        cfg = LambdaConfig(order=2, refs=2, seed=1)
        serial = score_corpus(corpus, cfg, parallel=1)
        parallel = score_corpus(corpus, cfg, parallel=2)
        assert [t.to_json() for t in serial] == [t.to_json() for t in parallel]

    def test_parallel_validation(self):
        rng = random.Random(113)
        with pytest.raises(ValueError):
            score_corpus(self._corpus(rng), LambdaConfig(order=2, refs=2), parallel=0)
