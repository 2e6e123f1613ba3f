"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see per-criterion lines.
"""

import itertools
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from test_fusion import oracle_dense_map, oracle_mask_logits, oracle_mask_pool

from semtx import fusion
from semtx.allocation import (
    PatchGrid,
    PatchScores,
    RateTable,
    allocate,
    budget_from_fraction,
    uniform_plan,
)
from semtx.cli import PipelineConfig, main, plan_for, relevance_for, sweep_corpus
from semtx.codec import decode_frame, encode_frame, encode_patch, decode_patch
from semtx.fusion import (
    MaskEmbeddings,
    PixelEmbeddings,
    PooledMaskFeatures,
    TextEmbedding,
)
from semtx.metrics import BinaryMask, masked_mse
from semtx.tensors import load_pgm, load_ppm
from semtx.toy import generate_toy_corpus

TABLE = RateTable()


class Timer:
    def __init__(self, limit_s: float):
        self.limit = limit_s

    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.t0
        return False


def report(name: str, timer: Timer, detail: str = ""):
    assert timer.elapsed < timer.limit, f"{name} took {timer.elapsed:.2f}s, limit {timer.limit}s"
    suffix = f" {detail}" if detail else ""
    print(f"PASS {name} ({timer.elapsed:.2f}s){suffix}")


def test_geometry_constants():
    with Timer(1.0) as t:
        grid = PatchGrid.for_image(320, 480, 8)
        assert grid.patch_count == 2400
        all_max = allocate(
            PatchScores(np.linspace(1, 0, grid.patch_count, dtype=np.float32)),
            TABLE,
            grid.patch_count * TABLE.max_rate,
        )
        assert all_max.total == 460800
        assert budget_from_fraction(Fraction(1, 2), grid.patch_count, TABLE.max_rate) == 230400
    report("geometry-constants", t, "P=2400 all-max=460800 half-rate=230400")


def test_budget_feasibility_and_pareto_suite():
    rng = np.random.default_rng(2024)
    with Timer(5.0) as t:
        for trial in range(1000):
            p = 2400 if trial % 100 == 0 else int(rng.integers(1, 65))
            scores = rng.random(p, dtype=np.float64).astype(np.float32)
            budget = int(rng.integers(0, p * 192 + 1))
            plan = allocate(PatchScores(scores), TABLE, budget)
            rates = np.asarray(TABLE.rates)[plan.levels]
            assert plan.total == int(rates.sum()) <= budget
            order = np.argsort(-scores, kind="stable")
            assert np.all(np.diff(rates[order]) <= 0)
            # Pareto-maximal: no one-level upgrade fits in the leftover
            leftover = budget - plan.total
            top = TABLE.levels - 1
            below = plan.levels < top
            if below.any():
                next_rates = np.asarray(TABLE.rates)[plan.levels[below] + 1]
                assert np.all(next_rates - rates[below] > leftover)
    report("budget-feasibility-pareto", t, "1000 instances, 0 violations")


def test_allocation_exhaustive_oracle():
    rng = np.random.default_rng(77)
    rates = np.asarray(TABLE.rates)
    with Timer(30.0) as t:
        combos_by_p = {
            p: rates[np.array(list(itertools.product(range(5), repeat=p)), dtype=np.int64)]
            for p in range(2, 7)
        }
        for trial in range(200):
            p = 2 + trial % 5
            combo_rates = combos_by_p[p]
            scores = rng.random(p).astype(np.float32)
            budget = int(rng.integers(0, p * 192 + 1))
            plan = allocate(PatchScores(scores), TABLE, budget)
            mine = rates[plan.levels]
            feasible = combo_rates.sum(axis=1) <= budget
            dominating = (combo_rates >= mine).all(axis=1) & (combo_rates > mine).any(axis=1)
            assert not np.any(feasible & dominating)
    report("allocation-exhaustive-oracle", t, "200 vectors, P<=6, 0 dominated")


def test_codec_budget_criterion():
    rng = np.random.default_rng(5)
    with Timer(10.0) as t:
        patches = rng.integers(0, 256, (10_000, 8, 8, 3), dtype=np.uint8)
        for i in range(patches.shape[0]):
            for level in range(5):
                assert len(encode_patch(patches[i], level).data) == TABLE.rates[level]
        for i in range(0, patches.shape[0], 100):
            assert np.array_equal(decode_patch(encode_patch(patches[i], 4)), patches[i])
        for g in range(256):
            patch = np.full((8, 8, 3), g, dtype=np.uint8)
            for level in (1, 2, 3):
                assert np.array_equal(decode_patch(encode_patch(patch, level)), patch)
    report("codec-budgets", t, "10k patches x 5 levels exact; lossless L4; constants L1-3")


def test_fusion_oracle_suite():
    rng = np.random.default_rng(4096)
    with Timer(5.0) as t:
        for _ in range(100):
            n, d, h, w = 4, 8, 6, 6
            e_pixel = (rng.standard_normal((d, h, w)) * 0.5).astype(np.float32)
            e_mask = (rng.standard_normal((n, d)) * 0.5).astype(np.float32)
            logits = fusion.compute_mask_logits(PixelEmbeddings(e_pixel), MaskEmbeddings(e_mask))
            np.testing.assert_allclose(
                logits.logits, oracle_mask_logits(e_mask, e_pixel), atol=1e-5
            )
            pooled = fusion.mask_pool(PixelEmbeddings(e_pixel), logits)
            np.testing.assert_allclose(
                pooled.features, oracle_mask_pool(e_pixel, logits.logits), atol=1e-5
            )
            t_batch = TextEmbedding(rng.standard_normal((d, 2)).astype(np.float32), conditioned=True)
            scores = fusion.class_scores(pooled, t_batch)
            expected = np.zeros((2, n))
            for c in range(2):
                for i in range(n):
                    expected[c, i] = float(
                        pooled.features[i].astype(np.float64)
                        @ t_batch.vector[:, c].astype(np.float64)
                    )
            np.testing.assert_allclose(scores.scores, expected, atol=1e-5)
            masks_up = fusion.upsample_sigmoid_masks(logits, h, w)
            dense = fusion.dense_semantic_map(scores, masks_up)
            np.testing.assert_allclose(dense, oracle_dense_map(scores.scores, masks_up), atol=1e-5)
            # single-query map is exactly the one-class dense map
            query = TextEmbedding(t_batch.vector[:, 0].copy(), conditioned=True)
            rel = fusion.relevance_map(query, pooled, masks_up)
            one_class = fusion.dense_semantic_map(
                fusion.class_scores(pooled, TextEmbedding(query.vector[:, None], conditioned=True)),
                masks_up,
            )
            assert np.array_equal(rel.values, one_class[0])
    report("fusion-oracle-suite", t, "100 instances within 1e-5; identity exact")


@pytest.fixture(scope="module")
def toy_corpus(tmp_path_factory):
    corpus = tmp_path_factory.mktemp("corpus")
    generate_toy_corpus(corpus, count=10, seed=7)
    return corpus


def test_end_to_end_monotonicity(toy_corpus):
    with Timer(60.0) as t:
        cfg = PipelineConfig(
            corpus=toy_corpus, toy=True, blur_radius=1, sweep_rates=tuple(range(0, 101, 10))
        )
        _, rows = sweep_corpus(cfg)
        mse = [row["masked_mse"] for row in rows]
        assert all(v is not None for v in mse)
        assert all(mse[i] >= mse[i + 1] for i in range(len(mse) - 1)), mse
        assert mse[-1] == 0.0

        # guided allocation beats uniform level-2 at half rate on every fixture
        for img_path in sorted(Path(toy_corpus).glob("*.ppm")):
            mask_path = img_path.with_name(img_path.name.replace(".ppm", ".mask.pgm"))
            image = load_ppm(img_path)
            mask = BinaryMask.from_gray(load_pgm(mask_path))
            assert mask.coverage() < 0.4
            item = PipelineConfig(
                image=img_path, mask=mask_path, toy=True, blur_radius=1, rate=Fraction(1, 2)
            )
            rel = relevance_for(item, image)
            plan = plan_for(item, image, rel)
            guided = masked_mse(image, decode_frame(encode_frame(image, plan)), mask)
            grid = PatchGrid.for_image(image.height, image.width)
            baseline_plan = uniform_plan(grid, TABLE, 2, budget=plan.budget)
            baseline = masked_mse(image, decode_frame(encode_frame(image, baseline_plan)), mask)
            assert guided < baseline
    report("end-to-end-monotonicity", t, "masked MSE non-increasing; guided < uniform-L2")


def test_parity_against_exported_fixtures():
    from semtx import pipeline as pl
    from semtx.tensors import TensorArchive, load_archive

    fixtures = sorted((Path(__file__).resolve().parent.parent / "fixtures").glob("*.mmta"))
    with Timer(30.0) as t:
        assert len(fixtures) >= 3
        worst_map = 0.0
        worst_cdt = 0.0
        for path in fixtures:
            archive = load_archive(path)
            ref = archive[pl.S_INF_REF].astype(np.float64)
            got = pl.relevance_from_archive(archive, recompute=True).map.values
            err = np.abs(got - ref).max() / np.abs(ref).max()
            worst_map = max(worst_map, err)
            assert err < 1e-3
            trimmed = TensorArchive([e for e in archive.entries if e.name != pl.T_HAT])
            t_hat = pl.conditioned_text_from_archive(trimmed).vector.astype(np.float64)
            t_ref = archive[pl.T_HAT].astype(np.float64)
            cdt_err = np.abs(t_hat - t_ref).max() / np.abs(t_ref).max()
            worst_cdt = max(worst_cdt, cdt_err)
            assert cdt_err < 1e-3
    report(
        "fixture-parity",
        t,
        f"{len(fixtures)} fixtures; worst map err {worst_map:.2e}, cdt err {worst_cdt:.2e}",
    )


def test_embedding_score_report():
    from semtx import pipeline as pl
    from semtx.metrics import embedding_similarity
    from semtx.tensors import load_archive

    fixtures = sorted((Path(__file__).resolve().parent.parent / "fixtures").glob("*.mmta"))
    with Timer(10.0) as t:
        scores = {}
        for path in fixtures:
            archive = load_archive(path)
            cos = embedding_similarity(archive[pl.CLIP_IMG], archive[pl.CLIP_TXT])
            assert -1.0 <= cos <= 1.0
            scores[path.stem] = cos
    detail = ", ".join(f"{k}={v:.3f}" for k, v in sorted(scores.items()))
    inside = sum(1 for v in scores.values() if 0.1 <= v <= 0.32)
    report(
        "embedding-score-report",
        t,
        f"{detail}; {inside}/{len(scores)} inside the observed 0.10-0.32 band (report only)",
    )


def test_full_run_determinism(toy_corpus, tmp_path):
    with Timer(60.0) as t:
        img = sorted(Path(toy_corpus).glob("*.ppm"))[0]
        mask = img.with_name(img.name.replace(".ppm", ".mask.pgm"))
        for fixture_rate in ("0.35", "0.5"):
            dirs = []
            for run_name in ("a", "b"):
                out = tmp_path / f"run{fixture_rate}{run_name}"
                code = main(
                    [
                        "pipeline", "--image", str(img), "--toy", "--mask", str(mask),
                        "--blur-radius", "1", "--rate", fixture_rate, "--out-dir", str(out),
                    ]
                )
                assert code == 0
                dirs.append(out)
            for fname in ("s_inf.mmta", "frame.mmsf", "plan.txt", "recon.ppm", "eval.csv"):
                assert (dirs[0] / fname).read_bytes() == (dirs[1] / fname).read_bytes(), fname
        sweeps = []
        for run_name in ("a", "b"):
            out = tmp_path / f"sweep_{run_name}"
            code = main(
                [
                    "sweep", "--corpus", str(toy_corpus), "--toy", "--blur-radius", "1",
                    "--sweep-rates", "0,50,100", "--out-dir", str(out),
                ]
            )
            assert code == 0
            sweeps.append(out)
        assert (sweeps[0] / "sweep.csv").read_bytes() == (sweeps[1] / "sweep.csv").read_bytes()
    report("full-run-determinism", t, "frames, images, CSV byte-identical")
