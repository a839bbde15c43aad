"""Synthetic corpus generator: determinism, geometry, and label quality."""

import filecmp

import numpy as np
import pytest

from multivec import (
    ConfigError,
    IndexBuildConfig,
    QueryEmbeddings,
    SynthSpec,
    build_index,
    colbert_e2e,
    gen_corpus,
    map_at,
    maxsim,
    read_cmve,
    read_id_map,
    read_qrels,
)

CLEAN = SynthSpec(
    seed=5,
    n_topics=4,
    docs_per_topic=6,
    tokens_per_doc=10,
    dim=32,
    queries_per_topic=1,
    noise=0.0,
    vocab_size=256,
    mask_rows=24,
    stopword_tokens=2,
)


def _load(paths):
    dim, records = read_cmve(paths["corpus"])
    docnos = read_id_map(paths["docnos"])
    qdim, queries = read_cmve(paths["queries"])
    qids = read_id_map(paths["qids"])
    qrels = read_qrels(paths["qrels"])
    return dim, records, docnos, qdim, queries, qids, qrels


class TestDeterminism:
    def test_same_seed_byte_identical(self, tmp_path):
        a = gen_corpus(CLEAN, tmp_path / "a")
        b = gen_corpus(CLEAN, tmp_path / "b")
        for key in a:
            assert filecmp.cmp(a[key], b[key], shallow=False), key

    def test_seed_changes_content(self, tmp_path):
        a = gen_corpus(CLEAN, tmp_path / "a")
        spec2 = SynthSpec(**{**CLEAN.__dict__, "seed": 6})
        b = gen_corpus(spec2, tmp_path / "b")
        assert not filecmp.cmp(a["corpus"], b["corpus"], shallow=False)


class TestShapes:
    def test_files_parse_and_counts_match(self, tmp_path):
        paths = gen_corpus(CLEAN, tmp_path / "c")
        dim, records, docnos, qdim, queries, qids, qrels = _load(paths)
        assert dim == qdim == CLEAN.dim
        assert len(records) == CLEAN.n_topics * CLEAN.docs_per_topic
        assert len(docnos) == len(records)
        assert len(queries) == CLEAN.n_topics * CLEAN.queries_per_topic
        assert len(qids) == len(queries)
        assert set(qrels) == set(qids.values())
        for rec in records:
            assert rec.embeddings.shape == (CLEAN.tokens_per_doc, CLEAN.dim)
            assert rec.doc_id in docnos

    def test_query_row_budget(self, tmp_path):
        paths = gen_corpus(CLEAN, tmp_path / "c")
        _, _, _, _, queries, _, _ = _load(paths)
        for rec in queries:
            assert rec.embeddings.shape[0] == 32

    def test_doc_rows_unit_norm(self, tmp_path):
        paths = gen_corpus(CLEAN, tmp_path / "c")
        _, records, _, _, _, _, _ = _load(paths)
        for rec in records[:5]:
            norms = np.linalg.norm(rec.embeddings, axis=1)
            np.testing.assert_allclose(norms, 1.0, atol=1e-5)

    def test_naming_scheme(self, tmp_path):
        paths = gen_corpus(CLEAN, tmp_path / "c")
        _, _, docnos, _, _, qids, _ = _load(paths)
        assert docnos[0] == "t000d0000"
        assert "q000x00" in qids.values()


class TestNoiselessGeometry:
    """With zero perturbation every topic collapses onto its anchor."""

    @pytest.fixture(autouse=True)
    def corpus(self, tmp_path):
        paths = gen_corpus(CLEAN, tmp_path / "c")
        self.dim, self.records, self.docnos, _, self.queries, self.qids, self.qrels = (
            _load(paths)
        )
        self.index = build_index(
            self.records, docnos=self.docnos, config=IndexBuildConfig(cells=2, seed=0)
        )

    def _query_topic(self, qid):
        return int(qid[1:4])

    def _doc_topic(self, docno):
        return int(docno[1:4])

    def test_same_topic_scores_dominate(self):
        per_topic_doc = {}
        for rec, docno in zip(self.records, self.docnos.values()):
            per_topic_doc.setdefault(self._doc_topic(docno), rec)
        for qrec in self.queries:
            qid = self.qids[qrec.doc_id]
            topic = self._query_topic(qid)
            rows = qrec.embeddings.astype(np.float64)
            own = maxsim(rows, per_topic_doc[topic].embeddings)
            for other, rec in per_topic_doc.items():
                if other != topic:
                    assert own > maxsim(rows, rec.embeddings)

    def test_e2e_map_is_perfect(self):
        run = {}
        for qrec in self.queries:
            qid = self.qids[qrec.doc_id]
            q = QueryEmbeddings(qid, qrec.embeddings.astype(np.float64))
            ranking = colbert_e2e(q, self.index, k_prime=50, nprobe=2)
            run[qid] = [
                (self.index.docnos[d], s) for d, s in zip(ranking.doc_ids, ranking.scores)
            ]
        rep = map_at(run, self.qrels)
        assert rep.mean == pytest.approx(1.0, abs=1e-12)
        assert rep.excluded == []

    def test_no_demoted_grades_without_noise(self):
        grades = {g for by_doc in self.qrels.values() for g in by_doc.values()}
        assert grades == {2}

    def test_stopword_tokens_carry_zero_idf(self):
        for token in range(CLEAN.stopword_tokens):
            assert self.index.idf(token) == pytest.approx(0.0, abs=1e-12)
        # topic tokens are rare, so they keep positive weight
        positive = [t for t in self.index.doc_freq if self.index.idf(t) > 0.1]
        assert positive


class TestNoisyGrades:
    def test_demotion_present_with_noise(self, tmp_path):
        spec = SynthSpec(**{**CLEAN.__dict__, "noise": 0.4, "docs_per_topic": 10})
        paths = gen_corpus(spec, tmp_path / "n")
        qrels = read_qrels(paths["qrels"])
        grades = [g for by_doc in qrels.values() for g in by_doc.values()]
        assert set(grades) == {1, 2}
        for by_doc in qrels.values():
            ones = sum(1 for g in by_doc.values() if g == 1)
            assert ones == int(0.2 * spec.docs_per_topic)


class TestSpecValidation:
    def test_defaults_valid(self):
        SynthSpec().validate()

    @pytest.mark.parametrize(
        "field,value",
        [
            ("n_topics", 0),
            ("docs_per_topic", 0),
            ("tokens_per_doc", 200),
            ("tokens_per_doc", 2),
            ("dim", 4),
            ("mask_rows", 32),
            ("mask_rows", -1),
            ("noise", -0.1),
            ("vocab_size", 3),
        ],
    )
    def test_bad_field_rejected(self, field, value):
        spec = SynthSpec(**{**CLEAN.__dict__, field: value})
        with pytest.raises(ConfigError):
            spec.validate()
