"""Acceptance gate for the retrieval engine.

Each test covers one release criterion and prints a single [PASS]/[FAIL]
line with its runtime, straight to the terminal. Criteria pair structural
guarantees (collapse, supersets, determinism, clustering, exact fixtures)
with directional quality checks on planted-topic corpora.
"""

import contextlib
import filecmp
import io
import math
import statistics
import time
from contextlib import contextmanager

import numpy as np
import pytest

from multivec import (
    DocRecord,
    IndexBuildConfig,
    PrfConfig,
    QueryEmbeddings,
    build_index,
    colbert_e2e,
    gen_corpus,
    holm_bonferroni,
    kmeans,
    map_at,
    mrr_at,
    ndcg_at,
    prf_rank,
    prf_rerank,
    read_cmve,
    read_id_map,
    read_qrels,
    recall_at,
    save_index,
    select_expansion,
    token_likelihood,
    write_run,
)
from multivec.cli import main as cli_main
from multivec.synth import SynthSpec

from conftest import rank_all_docs_oracle


@pytest.fixture
def criterion(capsys):
    """Context manager printing one [PASS]/[FAIL] line to the real terminal."""

    @contextmanager
    def _criterion(label):
        t0 = time.perf_counter()
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"[FAIL] {label} ({time.perf_counter() - t0:.1f}s)", flush=True)
            raise
        with capsys.disabled():
            print(f"[PASS] {label} ({time.perf_counter() - t0:.1f}s)", flush=True)

    return _criterion


def quiet_cli(args):
    with contextlib.redirect_stdout(io.StringIO()):
        code = cli_main(args)
    assert code == 0, f"command failed: {args}"


def load_corpus(spec, out_dir):
    """Generate, index, and load one synthetic corpus end to end."""
    paths = gen_corpus(spec, out_dir)
    _, records = read_cmve(paths["corpus"])
    docnos = read_id_map(paths["docnos"])
    _, qrecs = read_cmve(paths["queries"])
    qids = read_id_map(paths["qids"])
    qrels = read_qrels(paths["qrels"])
    index = build_index(records, docnos, IndexBuildConfig(seed=0))
    queries = [QueryEmbeddings(qids[r.doc_id], r.embeddings) for r in qrecs]
    return index, queries, qrels, paths


def as_run(index, rankings, depth=1000):
    return {
        r.query_id: [(index.docnos[d], s) for d, s in r.top(depth)] for r in rankings
    }


SMALL = SynthSpec(
    seed=31,
    n_topics=10,
    docs_per_topic=30,
    tokens_per_doc=12,
    dim=64,
    queries_per_topic=10,
    noise=0.5,
    vocab_size=1024,
    mask_rows=24,
    stopword_tokens=4,
)

GAIN_PRF = dict(
    feedback_docs=5,
    clusters=8,
    expansion_size=8,
    beta=0.5,
    token_neighbors=8,
    k_prime=100,
    nprobe=2,
    seed=0,
)


def gain_spec(seed):
    return SynthSpec(
        seed=seed,
        n_topics=20,
        docs_per_topic=200,
        tokens_per_doc=24,
        dim=128,
        queries_per_topic=1,
        noise=0.8,
        vocab_size=4096,
        mask_rows=24,
        stopword_tokens=4,
    )


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    return load_corpus(SMALL, tmp_path_factory.mktemp("small"))


class TestAcceptance:
    def test_disabled_expansion_collapses_to_first_pass(self, criterion, small_corpus, tmp_path):
        with criterion("expansion disabled collapses to the first pass"):
            t0 = time.perf_counter()
            index, queries, _, _ = small_corpus
            queries = queries[:50]
            assert len(queries) == 50
            rerank_cfg = PrfConfig(**{**GAIN_PRF, "beta": 0.0, "k_prime": 60, "nprobe": 4})
            rank_cfg = PrfConfig(
                **{**GAIN_PRF, "beta": 0.0, "expansion_size": 0, "k_prime": 60, "nprobe": 4}
            )
            base, rr, rk = [], [], []
            for q in queries:
                base.append(colbert_e2e(q, index, 60, 4))
                rr.append(prf_rerank(q, index, rerank_cfg))
                rk.append(prf_rank(q, index, rank_cfg))
            for b, a in zip(base, rr):
                np.testing.assert_array_equal(b.doc_ids, a.doc_ids)
                assert np.max(np.abs(b.scores - a.scores)) < 1e-9
            for b, a in zip(base, rk):
                np.testing.assert_array_equal(b.doc_ids, a.doc_ids)
                assert np.max(np.abs(b.scores - a.scores)) < 1e-9
            files = []
            for name, rankings in (("base", base), ("rr", rr), ("rk", rk)):
                path = tmp_path / f"{name}.run"
                write_run(path, as_run(index, rankings), tag="collapse")
                files.append(path)
            assert filecmp.cmp(files[0], files[1], shallow=False)
            assert filecmp.cmp(files[0], files[2], shallow=False)
            assert time.perf_counter() - t0 < 60.0

    def test_matches_exhaustive_scoring_oracle(self, criterion, tmp_path):
        with criterion("full-depth retrieval equals the exhaustive scoring oracle"):
            t0 = time.perf_counter()
            spec = SynthSpec(
                seed=77,
                n_topics=10,
                docs_per_topic=200,
                tokens_per_doc=12,
                dim=64,
                queries_per_topic=1,
                noise=0.6,
                vocab_size=1024,
                mask_rows=24,
                stopword_tokens=4,
            )
            index, queries, _, _ = load_corpus(spec, tmp_path / "oracle")
            assert index.doc_count == 2000
            docs = [index.doc_embeddings(d) for d in range(index.doc_count)]
            for q in queries:
                got = colbert_e2e(q, index, k_prime=2000, nprobe=index.quantizer.n_cells)
                assert len(got) == 2000
                want = rank_all_docs_oracle(q.rows, docs)
                np.testing.assert_array_equal(got.doc_ids, [i for i, _ in want])
                np.testing.assert_allclose(got.scores, [s for _, s in want], atol=1e-5)
            assert time.perf_counter() - t0 < 300.0

    def test_feedback_expansion_improves_ranking_across_seeds(self, criterion, tmp_path):
        with criterion("feedback expansion lifts MAP and Recall@100 across 20 seeds"):
            t0 = time.perf_counter()
            cfg = PrfConfig(**GAIN_PRF)
            e2e_maps, wins_both, gains = [], 0, []
            for seed in range(1, 21):
                index, queries, qrels, _ = load_corpus(
                    gain_spec(seed), tmp_path / f"s{seed}"
                )
                run_e = as_run(
                    index,
                    [colbert_e2e(q, index, cfg.k_prime, cfg.nprobe) for q in queries],
                )
                run_p = as_run(index, [prf_rank(q, index, cfg) for q in queries])
                m_e = map_at(run_e, qrels).mean
                m_p = map_at(run_p, qrels).mean
                r_e = recall_at(run_e, qrels, k=100).mean
                r_p = recall_at(run_p, qrels, k=100).mean
                e2e_maps.append(m_e)
                gains.append(m_p - m_e)
                wins_both += (m_p > m_e) and (r_p > r_e)
                del index
            mean_e2e = statistics.mean(e2e_maps)
            assert 0.5 <= mean_e2e <= 0.8, f"first-pass MAP {mean_e2e:.4f} off target"
            assert wins_both >= 14, f"improved both metrics on only {wins_both}/20 seeds"
            assert statistics.median(gains) > 0
            assert time.perf_counter() - t0 < 600.0

    def test_reprobe_candidates_contain_first_pass_candidates(self, criterion, small_corpus):
        with criterion("re-probed candidate sets contain every first-pass candidate"):
            index, queries, _, _ = small_corpus
            assert len(queries) == 100
            cfg = PrfConfig(
                feedback_docs=3,
                clusters=8,
                expansion_size=4,
                beta=0.5,
                token_neighbors=4,
                k_prime=40,
                nprobe=2,
                seed=0,
            )
            grew = 0
            for q in queries:
                base = colbert_e2e(q, index, cfg.k_prime, cfg.nprobe)
                wide = prf_rank(q, index, cfg)
                assert np.isin(base.doc_ids, wide.doc_ids).all()
                grew += len(wide) > len(base)
            assert grew > 0, "expansion never added a candidate; settings too easy"

    def test_clustering_properties_hold_on_random_data(self, criterion):
        with criterion("clustering: monotone refinement, exact collapse, seed stability"):
            rng = np.random.default_rng(2024)
            for trial in range(100):
                n = int(rng.integers(12, 120))
                k = int(rng.integers(2, 9))
                dim = int(rng.integers(2, 17))
                pts = rng.standard_normal((n, dim)) * float(rng.uniform(0.5, 4.0))
                res = kmeans(pts, k, seed=trial)
                hist = res.inertia_history
                for prev, cur in zip(hist, hist[1:]):
                    assert cur <= prev + 1e-9 * max(1.0, abs(prev))
            singletons = np.diag(np.arange(1.0, 7.0) * 10.0)
            res = kmeans(singletons, 6, seed=0)
            assert res.inertia == 0.0
            pts = rng.standard_normal((60, 5))
            a = kmeans(pts, 4, seed=123)
            b = kmeans(pts, 4, seed=123)
            assert np.array_equal(a.centroids, b.centroids)
            assert np.array_equal(a.labels, b.labels)

    def test_token_mapping_and_weighting_fixtures(self, criterion):
        with criterion("token likelihood, rarity weighting, and selection fixtures"):
            e1 = np.array([1.0, 0.0, 0.0], dtype=np.float32)
            e10 = np.array([0.0, 1.0, 0.0], dtype=np.float32)
            e20 = np.array([0.0, 0.0, 1.0], dtype=np.float32)
            records = [
                DocRecord(0, np.array([1, 10], np.uint32), np.stack([e1, e10])),
                DocRecord(1, np.array([1, 20], np.uint32), np.stack([e1, e20])),
                DocRecord(2, np.array([1, 1], np.uint32), np.stack([e1, e1])),
            ]
            index = build_index(records, config=IndexBuildConfig(cells=1, seed=0))
            ln2 = math.log(2.0)

            assert index.idf(1) == 0.0
            assert index.idf(10) == ln2
            assert index.idf(20) == ln2

            like = token_likelihood(np.array([0.0, 1.0, 0.0]), r=1, index=index)
            assert like == {10: 1.0}
            like = token_likelihood(np.array([1.0, 0.0, 0.0]), r=4, index=index)
            assert like == {1: 1.0}
            like = token_likelihood(np.array([0.0, 0.6, 0.4]), r=2, index=index)
            assert like == {10: 0.5, 20: 0.5}
            assert sum(like.values()) == 1.0

            centroids = np.array(
                [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]
            )
            chosen = select_expansion(centroids, f_e=2, r=1, index=index)
            assert [c.mapped_token for c in chosen.elements] == [10, 20]
            assert chosen.weights().tolist() == [ln2, ln2]
            np.testing.assert_array_equal(chosen.vectors(), centroids[:2])
            everything = select_expansion(centroids, f_e=3, r=1, index=index)
            assert [c.mapped_token for c in everything.elements] == [10, 20, 1]
            assert everything.weights().tolist() == [ln2, ln2, 0.0]

    def test_metric_fixtures_match_frozen_values(self, criterion, tmp_path):
        with criterion("ranking metrics and Holm correction match frozen fixtures"):
            qrels_path = tmp_path / "qrels.txt"
            qrels_path.write_text(
                "q1 0 dA 2\nq1 0 dB 1\nq1 0 dC 0\nq1 0 dD 2\n"
                "q2 0 dA 3\nq2 0 dB 2\nq2 0 dC 1\n"
                "q3 0 dA 1\nq3 0 dB 1\n"
                "q4 0 dA 2\n"
                "q5 0 dA 0\nq5 0 dB 0\n"
            )
            qrels = read_qrels(qrels_path)
            run = {
                "q1": [("dA", 4.0), ("dB", 3.0), ("dC", 2.0), ("dD", 1.0)],
                "q2": [("dC", 3.0), ("dB", 2.0), ("dA", 1.0)],
                "q3": [("dA", 2.0), ("dB", 1.0)],
                "q4": [("dB", 2.0), ("dA", 1.0)],
                "q5": [("dA", 2.0), ("dB", 1.0)],
            }
            assert map_at(run, qrels).mean == pytest.approx(0.611111111111111, abs=1e-6)
            assert ndcg_at(run, qrels).mean == pytest.approx(0.8373168208200379, abs=1e-6)
            assert mrr_at(run, qrels).mean == pytest.approx(0.6666666666666666, abs=1e-6)
            assert recall_at(run, qrels).mean == pytest.approx(1.0, abs=1e-6)
            # graded judgments binarize at grade >= 2, so q1's grade-1 dB
            # counts as non-relevant there but relevant at threshold 1
            assert map_at(run, qrels).per_query["q1"] == pytest.approx(0.75, abs=1e-6)
            assert map_at(run, qrels, threshold=1).per_query["q1"] == pytest.approx(
                0.9166666666666666, abs=1e-6
            )
            adjusted, reject = holm_bonferroni([0.01, 0.04], alpha=0.05)
            np.testing.assert_allclose(adjusted, [0.02, 0.04], atol=1e-12)
            assert reject.all()

    def test_parameter_sweeps_trace_expected_shapes(self, criterion, tmp_path):
        with criterion("sweeps: feedback depth peaks early, beta has interior peak"):
            fb_spec = SynthSpec(
                seed=42,
                n_topics=20,
                docs_per_topic=25,
                tokens_per_doc=24,
                dim=128,
                queries_per_topic=2,
                noise=1.0,
                vocab_size=2048,
                mask_rows=24,
                stopword_tokens=4,
            )
            fb_index, _, _, fb_paths = load_corpus(fb_spec, tmp_path / "fbcorpus")
            save_index(fb_index, tmp_path / "fbindex")
            fb_csv = tmp_path / "fb.csv"
            quiet_cli(
                [
                    "sweep",
                    "--index", str(tmp_path / "fbindex"),
                    "--queries", str(fb_paths["queries"]),
                    "--qids", str(fb_paths["qids"]),
                    "--qrels", str(fb_paths["qrels"]),
                    "--mode", "prf-rank",
                    "--param", "fb",
                    "--values", "1,3,5,10,25,50",
                    "--out", str(fb_csv),
                    "--k", "8", "--fe", "8", "--beta", "0.5",
                    "--r", "8", "--kprime", "50", "--nprobe", "2",
                    "--no-timing",
                ]
            )
            fb_maps = [float(line.split(",")[1]) for line in fb_csv.read_text().splitlines()[1:]]
            assert len(fb_maps) == 6
            peak = int(np.argmax(fb_maps))
            assert peak <= 3, f"feedback-depth peak at grid index {peak}"
            assert fb_maps[-1] < fb_maps[peak]
            assert fb_maps[-2] < fb_maps[peak]

            beta_index, _, _, beta_paths = load_corpus(gain_spec(1), tmp_path / "betacorpus")
            save_index(beta_index, tmp_path / "betaindex")
            beta_csv = tmp_path / "beta.csv"
            quiet_cli(
                [
                    "sweep",
                    "--index", str(tmp_path / "betaindex"),
                    "--queries", str(beta_paths["queries"]),
                    "--qids", str(beta_paths["qids"]),
                    "--qrels", str(beta_paths["qrels"]),
                    "--mode", "prf-rank",
                    "--param", "beta",
                    "--values", "0,0.25,0.5,1.0,1.5,2.0",
                    "--out", str(beta_csv),
                    "--fb", "5", "--k", "8", "--fe", "8",
                    "--r", "8", "--kprime", "100", "--nprobe", "2",
                    "--no-timing",
                ]
            )
            beta_maps = [
                float(line.split(",")[1]) for line in beta_csv.read_text().splitlines()[1:]
            ]
            assert len(beta_maps) == 6
            peak = int(np.argmax(beta_maps))
            assert 0 < peak < 5, f"beta peak at grid edge (index {peak})"
            assert beta_maps[peak] > beta_maps[0]
            assert beta_maps[peak] > beta_maps[-1]

    def test_end_to_end_byte_determinism(self, criterion, tmp_path):
        with criterion("repeat runs are byte-identical: index, run files, sweep CSV"):
            outputs = []
            for rep in ("a", "b"):
                root = tmp_path / rep
                quiet_cli(
                    [
                        "synth", "--out", str(root / "corpus"), "--seed", "13",
                        "--topics", "6", "--docs-per-topic", "15",
                        "--tokens-per-doc", "10", "--dim", "48",
                        "--queries-per-topic", "3", "--noise", "0.5",
                        "--vocab", "512", "--stopwords", "3",
                    ]
                )
                quiet_cli(
                    [
                        "index", "--corpus", str(root / "corpus" / "corpus.cmve"),
                        "--docnos", str(root / "corpus" / "docnos.tsv"),
                        "--out", str(root / "index"), "--cells", "12",
                    ]
                )
                quiet_cli(
                    [
                        "search", "--index", str(root / "index"),
                        "--queries", str(root / "corpus" / "queries.cmve"),
                        "--qids", str(root / "corpus" / "qids.tsv"),
                        "--mode", "prf-rank", "--out", str(root / "out.run"),
                        "--fb", "3", "--k", "6", "--fe", "4", "--beta", "0.5",
                        "--r", "4", "--kprime", "40", "--nprobe", "3",
                    ]
                )
                quiet_cli(
                    [
                        "sweep", "--index", str(root / "index"),
                        "--queries", str(root / "corpus" / "queries.cmve"),
                        "--qids", str(root / "corpus" / "qids.tsv"),
                        "--qrels", str(root / "corpus" / "qrels.txt"),
                        "--param", "fb", "--values", "1,2,3",
                        "--out", str(root / "sweep.csv"),
                        "--k", "6", "--fe", "4", "--beta", "0.5",
                        "--r", "4", "--kprime", "40", "--nprobe", "3",
                        "--no-timing",
                    ]
                )
                outputs.append(root)
            a, b = outputs
            for rel in (
                "corpus/corpus.cmve",
                "corpus/queries.cmve",
                "corpus/qrels.txt",
                "index/embeddings.cmve",
                "index/docnos.tsv",
                "index/quantizer.bin",
                "index/idf.bin",
                "index/meta.json",
                "out.run",
                "sweep.csv",
            ):
                assert filecmp.cmp(a / rel, b / rel, shallow=False), rel
