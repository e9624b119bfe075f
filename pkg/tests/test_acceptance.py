"""Acceptance suite: one test per release criterion.

Each test is self-contained and uses only the echo or file transcription
backends, so the suite runs without the recognizer service. The terminal
summary prints one PASS/FAIL line per criterion (see conftest).
"""

from __future__ import annotations

import dataclasses
import json
import math
import random
import time
from pathlib import Path

import numpy as np

import synthgen
from oracles import levenshtein_matrix, otsu_oracle, widest_gaps_oracle
from ukrwords.assembly import (
    align_baselines,
    build_punct_bank,
    compose_strip,
    detect_body,
    normalize_brightness,
    parse_plan,
)
from ukrwords.cli import main
from ukrwords.config import PipelineConfig, RunConfig, save_run_config
from ukrwords.curation import gate_decision, oversample, oversample_multiplicity
from ukrwords.errors import ToolkitError
from ukrwords.imaging import Component, otsu_threshold
from ukrwords.manifest import LineRecord, Manifest, WordCrop, load_manifest, save_manifest
from ukrwords.metrics import (
    CerSample,
    EmbeddingSet,
    cer,
    frechet_distance,
    levenshtein,
    matrix_sqrt_psd,
)
from ukrwords.segmentation import eval_corpus, group_components, segment_line, select_boundaries

CFG = PipelineConfig()

CYRILLIC = "абвгдежзиклмнопрстуфхцчшщьюяіїєґ"


def synth_line(seed: int, kind: str, n_words: int, rng: random.Random) -> LineRecord:
    maker = {
        "clean": synthgen.clean_line,
        "broken": synthgen.broken_line,
        "joined": synthgen.joined_line,
    }[kind]
    img, spans = maker(seed, n_words, rng)
    transcript = " ".join(synthgen.rand_word(rng) for _ in range(n_words))
    return LineRecord(
        line_id=f"L{seed:05d}", writer_id=f"w{seed % 7}", image=img,
        transcript=transcript, gt_spans=spans,
    )


def test_c01_exactly_n_invariant():
    """1,000 seeded lines: crop count == word count on every non-error line."""
    rng = random.Random(101)
    kinds = ["clean"] * 800 + ["broken"] * 150 + ["joined"] * 50
    rng.shuffle(kinds)
    lines = []
    for i, kind in enumerate(kinds):
        n = rng.randint(1, 6)
        if kind == "joined":
            n = max(n, 2)
        lines.append(synth_line(10_000 + i, kind, n, rng))

    started = time.perf_counter()
    errors = 0
    for line in lines:
        try:
            cuts = segment_line(line, CFG)
        except ToolkitError:
            errors += 1
            continue
        assert len(cuts) == line.word_count, line.line_id
        assert [c.label for c in cuts] == line.tokens
    elapsed = time.perf_counter() - started

    assert elapsed < 60.0, f"segmentation took {elapsed:.1f}s"
    # errors may only come from the deliberately joined lines
    assert errors <= 50


def test_c02_segmentation_superiority():
    """CC vs projection on 200 lines, >= 50 with joined word gaps; tol 5 px."""
    assert CFG.boundary_tol_px == 5
    rng = random.Random(202)
    kinds = ["clean"] * 90 + ["broken"] * 60 + ["joined"] * 50
    rng.shuffle(kinds)
    lines, clean_lines = [], []
    for i, kind in enumerate(kinds):
        n = rng.randint(2, 5)
        line = synth_line(20_000 + i, kind, n, rng)
        lines.append(line)
        if kind == "clean":
            clean_lines.append(line)

    cc = eval_corpus(lines, "cc", CFG)
    projection = eval_corpus(lines, "projection", CFG)
    gap = cc.perfect_match_rate - projection.perfect_match_rate
    assert gap >= 0.15, (
        f"cc {cc.perfect_match_rate:.3f} vs projection "
        f"{projection.perfect_match_rate:.3f}: gap {gap:.3f} < 0.15"
    )

    cc_clean = eval_corpus(clean_lines, "cc", CFG)
    assert cc_clean.perfect_match_rate >= 0.95, cc_clean.perfect_match_rate


def test_c03_otsu_oracle():
    """Exhaustive between-class maximizer reproduced exactly, 200 images."""
    rng = np.random.default_rng(303)
    for i in range(200):
        h, w = int(rng.integers(4, 40)), int(rng.integers(4, 40))
        style = i % 4
        if style == 0:  # full-range uniform noise
            img = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
        elif style == 1:  # bimodal ink-and-paper
            img = rng.integers(200, 256, size=(h, w), dtype=np.uint8)
            img[: h // 2] = rng.integers(0, 70, size=(h // 2, w), dtype=np.uint8)
        elif style == 2:  # low contrast
            img = rng.integers(118, 140, size=(h, w), dtype=np.uint8)
        else:  # sparse dark pixels on light background
            img = rng.integers(230, 256, size=(h, w), dtype=np.uint8)
            img[rng.random(size=(h, w)) < 0.1] = 10
        got = otsu_threshold(img)
        if len(np.unique(img)) == 1:
            assert got == int(img.flat[0])
        else:
            assert got == otsu_oracle(img), f"image {i}"


def test_c04_gap_selection_oracle():
    """Separator choice == sort-gaps-descending-take-(N-1), 500 lists."""
    rng = random.Random(404)
    for trial in range(500):
        x = 0
        comps = []
        for _ in range(rng.randint(1, 14)):
            w = rng.randint(1, 25)
            comps.append(
                Component(x_min=x, x_max=x + w - 1, y_min=0, y_max=5, pixel_count=w * 6)
            )
            x += w + rng.randint(1, 50)
        groups = group_components(comps, merge_px=0)
        n_words = rng.randint(1, len(groups))
        gaps = [
            groups[i + 1].x_min - groups[i].x_max - 1 for i in range(len(groups) - 1)
        ]
        separators = widest_gaps_oracle(gaps, n_words - 1)
        expected, start = [], 0
        for sep in separators + [len(groups) - 1]:
            expected.append((groups[start].x_min, groups[sep].x_max))
            start = sep + 1
        got = [(s.x_left, s.x_right) for s in select_boundaries(groups, n_words)]
        assert got == expected, f"trial {trial}"


def test_c05_config_fidelity(tmp_path):
    """The default config file carries exactly the documented constants."""
    save_run_config(RunConfig(), tmp_path / "defaults.json")
    with open(tmp_path / "defaults.json", "r", encoding="utf-8") as f:
        pipeline = json.load(f)["pipeline"]

    assert pipeline["merge_px"] == 8
    assert pipeline["boundary_tol_px"] == 5
    assert pipeline["min_width_px"] == 20
    assert pipeline["max_height_px"] == 100
    assert pipeline["ocr_threshold_long"] == 0.4
    assert pipeline["ocr_threshold_mid"] == 0.2
    assert pipeline["short_len_max"] == 3
    assert pipeline["mid_len_max"] == 5
    assert pipeline["min_writer_samples"] == 50
    assert pipeline["oversample_factor_min"] == 2
    assert pipeline["oversample_factor_max"] == 5
    assert pipeline["body_span_frac"] == 0.35
    assert pipeline["brightness_pct"] == 5.0
    assert pipeline["punct_bank_size"] == 500
    assert pipeline["canvas_height"] == 64
    assert pipeline["canvas_width"] == 256
    assert sorted(pipeline["rare_letters"]) == sorted(["ф", "ґ", "Щ", "Є", "Ц", "ї"])
    assert all(v == 3 for v in pipeline["rare_letter_factors"].values())


def test_c06_stage4_truth_table():
    """L in {2,5,6} x s in {0, just-below-threshold, 1} -> keep/reject."""
    table = [
        (2, 0.0, True), (2, 0.19, True), (2, 1.0, True),
        (5, 0.0, False), (5, 0.19, False), (5, 1.0, True),
        (6, 0.0, False), (6, 0.39, False), (6, 1.0, True),
    ]
    for length, s, keep in table:
        assert gate_decision(length, s, CFG) is keep, (length, s)


def test_c07_edit_distance_oracle():
    """10,000 random Cyrillic pairs against the full-matrix DP oracle."""
    rng = random.Random(707)
    for trial in range(10_000):
        a = "".join(rng.choice(CYRILLIC) for _ in range(rng.randint(0, 12)))
        b = "".join(rng.choice(CYRILLIC) for _ in range(rng.randint(0, 12)))
        assert levenshtein(a, b) == levenshtein_matrix(a, b), f"trial {trial}: {a!r} {b!r}"

    report = cer([CerSample("c", "w", "з", "33")])
    assert report.micro_cer == 2.0


def test_c08_frechet_correctness():
    rng = np.random.default_rng(808)

    # identical sets
    v = rng.normal(size=(64, 12))
    assert frechet_distance(EmbeddingSet(v), EmbeddingSet(v.copy())) <= 1e-9

    # 1-D closed form: (mu, var) = (0, 1) vs (1, 1) -> (0-1)^2 + (1-1)^2 = 1
    h = math.sqrt(0.5)
    p = EmbeddingSet(np.array([[-h], [h]]))
    q = EmbeddingSet(np.array([[1.0 - h], [1.0 + h]]))
    assert abs(frechet_distance(p, q) - 1.0) <= 1e-9

    # symmetry
    a = EmbeddingSet(rng.normal(size=(40, 8)))
    b = EmbeddingSet(rng.normal(size=(50, 8)) + 0.3)
    assert abs(frechet_distance(a, b) - frechet_distance(b, a)) <= 1e-9

    # matrix sqrt reconstruction on random 16x16 PSD inputs
    for _ in range(10):
        m = rng.normal(size=(16, 16))
        psd = m.T @ m
        root = matrix_sqrt_psd(psd)
        assert np.linalg.norm(root @ root - psd, "fro") <= 1e-6


def test_c09_assembly_postconditions():
    rng = random.Random(909)
    words = [
        synthgen.word_blob(
            seed=rng.randrange(10**6),
            width=rng.randint(25, 90),
            body_h=rng.randint(16, 36),
            descender_h=rng.choice([0, 0, 0, 8, 14]),
            ascender_h=rng.choice([0, 0, 7]),
        )
        for _ in range(100)
    ]

    # alignment post-condition on all 100 words
    aligned, target_row, _ = align_baselines(words, CFG)
    for out in aligned:
        assert detect_body(out, CFG.body_span_frac).body_bottom == target_row

    # brightness normalization is byte-for-byte idempotent
    for img in words[:25]:
        once = normalize_brightness(img, CFG.brightness_pct)
        assert np.array_equal(once, normalize_brightness(once, CFG.brightness_pct))

    # strip width follows the layout arithmetic exactly
    w1 = synthgen.word_blob(1, width=50, body_h=28)
    w2 = synthgen.word_blob(2, width=70, body_h=28)
    mark = np.full((12, 9), 244, dtype=np.uint8)
    mark[2:10, 1:8] = 35
    bank = build_punct_bank([(",", mark, "m")], size=10, seed=0)
    plan = parse_plan([{"word": "a"}, {"punct": ","}, {"word": "b"}])
    strip = compose_strip(plan, {"a": w1, "b": w2}, bank, CFG)
    word_gap = round(CFG.word_gap_frac * 28)  # median body height is 28
    half_gap = round(word_gap * CFG.punct_gap_frac)
    scaled_h = round(CFG.punct_scale * 28)
    scaled_w = round(9 * scaled_h / 12)
    expected = w1.shape[1] + word_gap + scaled_w + half_gap + w2.shape[1]
    assert strip.shape[1] == expected
    assert strip.shape[0] == aligned_height(w1, w2)


def aligned_height(*words: np.ndarray) -> int:
    normalized = [normalize_brightness(w, CFG.brightness_pct) for w in words]
    aligned, _, _ = align_baselines(normalized, CFG)
    return aligned[0].shape[0]


def test_c10_oversample_arithmetic():
    cfg = dataclasses.replace(
        CFG, rare_letter_factors={"ф": 5, "ґ": 2, "Щ": 3, "Є": 3, "Ц": 3, "ї": 3}
    )

    def crop(cid: str, label: str) -> WordCrop:
        return WordCrop(crop_id=cid, writer_id="w", label=label, raw_label=label,
                        image=f"{cid}.png", width=30, height=40)

    fixture = [
        ("a", "слово", 1),   # no rare letters
        ("b", "ґанок", 2),   # factor(ґ) = 2
        ("c", "фабрика", 5), # factor(ф) = 5
        ("d", "Єфрем", 5),   # max(factor(Є)=3, factor(ф)=5)
        ("e", "їжак", 3),    # default-mapped rare letter
        ("f", "щука", 1),    # lowercase щ is not in the rare set
    ]
    manifest = Manifest(
        crops=[crop(cid, label) for cid, label, _ in fixture],
        source_id="fixture", stage="filtered", config_hash="",
    )
    for cid, label, factor in fixture:
        assert oversample_multiplicity(label, cfg) == factor, label

    out = oversample(manifest, cfg)
    expected_ids = []
    for cid, _, factor in fixture:
        expected_ids.append(cid)
        expected_ids.extend(f"{cid}.r{k}" for k in range(1, factor))
    assert [c.crop_id for c in out.crops] == expected_ids
    assert len(out.crops) == sum(f for _, _, f in fixture)

    # removing the rare-letter set makes balancing the identity
    plain = oversample(manifest, dataclasses.replace(CFG, rare_letters=()))
    assert [c.crop_id for c in plain.crops] == [c.crop_id for c in manifest.crops]


def test_c11_determinism(tmp_path):
    """Two full pipeline runs with one seed produce byte-identical outputs."""
    corpus = synthgen.write_corpus(tmp_path / "src", seed=1111, kinds=["clean"] * 15)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps({"seed": 3, "pipeline": {"min_writer_samples": 1}}),
        encoding="utf-8",
    )

    def run_chain(root: Path) -> dict[str, bytes]:
        seg, filt, bal, strips = root / "seg", root / "filt", root / "bal", root / "strips"
        assert main(["segment", str(corpus), "--out-dir", str(seg),
                     "--config", str(cfg_path)]) == 0
        assert main(["filter", str(seg / "words.jsonl"), "--out-dir", str(filt),
                     "--config", str(cfg_path)]) == 0
        assert main(["balance", str(filt / "filtered.jsonl"), "--out-dir", str(bal),
                     "--config", str(cfg_path)]) == 0
        manifest = load_manifest(bal / "balanced.jsonl")
        plan = root / "plan.json"
        plan.write_text(
            json.dumps([{"word": manifest.crops[0].crop_id},
                        {"word": manifest.crops[1].crop_id}]),
            encoding="utf-8",
        )
        assert main(["assemble", str(plan), "--manifest", str(bal / "balanced.jsonl"),
                     "--out-dir", str(strips), "--config", str(cfg_path)]) == 0
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(root.rglob("*"))
            if p.is_file() and p.name != "plan.json"
        }

    first = run_chain(tmp_path / "run1")
    second = run_chain(tmp_path / "run2")
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], f"{name} differs between reruns"
