#!/usr/bin/env python3
"""Regenerates the test fixtures under crates/core/tests/fixtures.

Everything is derived from fixed seeds, so rerunning the script reproduces
the committed files byte for byte. The expected metrics for the fixture
runs are computed here from the intended decisions, independently of the
Rust scoring code.
"""

import csv
import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "crates" / "core" / "tests" / "fixtures"

ATTRS = ["color", "composition", "line", "light", "brushstroke"]
LABELS = [
    "Excited", "Happy", "Pleased", "Contentment", "Calm", "Relaxed",
    "Sad", "Depressed", "Bored", "Tense", "Angry", "Afraid",
]
ALIASES = {"Contentment": ["content"], "Afraid": ["fear", "fearful"]}
SOURCES = ["emoart", "wikiart", "artemis", "abstract"]
STYLES = ["Impressionism", "Expressionism", "Baroque", "Cubism", "Romanticism", "Abstract"]
SUBJECTS = [
    "harbor at dusk", "portrait of a seated woman", "storm over a field",
    "still life with fruit", "crowded market square", "empty room",
    "mountain road", "dancers on a stage", "winter forest", "city bridge",
]
FORBIDDEN = ATTRS


def dump_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def dump_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


def clean(text):
    low = text.lower()
    assert not any(w in low for w in FORBIDDEN), text
    return text


# ---------------------------------------------------------------- metrics


def dice(p, g):
    if not p and not g:
        return 1.0
    return 2 * len(p & g) / (len(p) + len(g))


def tversky(p, g, a=0.8, b=0.2):
    inter, fp, fn = len(p & g), len(p - g), len(g - p)
    if inter + fp + fn == 0:
        return 1.0
    d = inter + a * fp + b * fn
    return 0.0 if d == 0 else inter / d


def alignment(pairs):
    n = len(pairs)
    per = {}
    for a in ATTRS:
        P = {i for i, (p, _) in enumerate(pairs) if a in p}
        G = {i for i, (_, g) in enumerate(pairs) if a in g}
        per[a] = {"dice": dice(P, G), "tversky": tversky(P, G)}
    return {
        "n_samples": n,
        "sample_wise_mean_dice": sum(dice(p, g) for p, g in pairs) / n,
        "sample_wise_mean_tversky": sum(tversky(p, g) for p, g in pairs) / n,
        "attribute_wise_mean_dice": sum(v["dice"] for v in per.values()) / 5,
        "attribute_wise_mean_tversky": sum(v["tversky"] for v in per.values()) / 5,
        "per_attribute": per,
    }


def cond_mean(xs):
    return sum(xs) / len(xs) if xs else None


# ---------------------------------------------------------------- datasets


def gold_support(rng, sizes):
    k = rng.choice(sizes)
    return sorted(rng.sample(ATTRS, k), key=ATTRS.index)


def votes_for(rng, support, n_annotators):
    """Per-annotator bits whose strict-majority consensus is `support`."""
    if n_annotators == 1:
        return [{a: a in support for a in ATTRS}]
    bits = [{} for _ in range(n_annotators)]
    for a in ATTRS:
        yes = rng.choice([2, 3]) if a in support else rng.choice([0, 0, 1])
        who = set(rng.sample(range(n_annotators), yes))
        for i in range(n_annotators):
            bits[i][a] = i in who
    return bits


def make_dataset(dirname, name, n, seed, sizes, n_annotators, id_fmt, no_affect=()):
    rng = random.Random(seed)
    arts = []
    records, salience = [], []
    for i in range(n):
        aid = id_fmt.format(i + 1)
        support = gold_support(rng, sizes)
        rec = {
            "id": aid,
            "image_ref": f"images/{aid}.png",
            "source": SOURCES[i % len(SOURCES)],
            "style": clean(rng.choice(STYLES)),
            "content": clean(rng.choice(SUBJECTS)),
        }
        affect = None
        if aid not in no_affect:
            affect = {
                "emotion": rng.choice(LABELS),
                "arousal": rng.choice(["high", "low"]),
                "valence": rng.choice(["positive", "negative"]),
            }
            rec.update(affect)
        records.append(rec)
        for j, bits in enumerate(votes_for(rng, support, n_annotators)):
            salience.append({"artwork_id": aid, "annotator_id": f"a{j + 1}", "salience": bits})
        arts.append({"id": aid, "support": support, "affect": affect})
    d = FIX / dirname
    dump_jsonl(d / "records.jsonl", records)
    dump_jsonl(d / "salience.jsonl", salience)
    dump_json(d / "manifest.json", {
        "name": name,
        "source": "synthetic",
        "vocabulary": LABELS,
        "aliases": ALIASES,
        "records": "records.jsonl",
        "salience": "salience.jsonl",
        "consensus": "strict_majority",
    })
    return arts


# ---------------------------------------------------------------- responses

SALIENCE_FORMATS = [
    lambda a, s: json.dumps({"salient": s}),
    lambda a, s: "```json\n" + json.dumps({"salient": s}) + "\n```",
    lambda a, s: ("Yes. The " if s else "No. The ") + a + (" carries the mood here." if s else " is incidental."),
    lambda a, s: f"Salient: {'yes' if s else 'no'}",
    lambda a, s: "After looking closely, my verdict is " + json.dumps({"salient": s}) + ".",
    lambda a, s: f"**Answer:** {'true' if s else 'false'}",
    lambda a, s: "Not salient; the " + a + " is secondary." if not s else "Salient. The " + a + " sets the tone.",
]

# (artwork index, attribute) cells answered against the gold decision.
SALIENCE_ERRORS = {(1, "color"), (3, "light"), (6, "line"), (9, "composition"), (12, "brushstroke"),
                   (15, "color"), (18, "light"), (20, "composition")}
# Cells whose response cannot be parsed; recorded as not salient.
SALIENCE_BROKEN = {
    (4, "line"): ("It is hard to say.", "Ambiguous"),
    (10, "light"): ("   ", "Empty"),
    (17, "color"): ('{"salience": 1}', "SchemaMismatch"),
}

EXPLANATIONS = [
    "Muted tones and a still arrangement settle the scene.",
    "Sharp contrasts create a restless energy.",
    "Soft edges and warm shadows invite quiet reflection.",
    "The heavy masses press down on the figures.",
    "Open space and gentle rhythm suggest ease.",
]


def other(rng, value, choices):
    return rng.choice([c for c in choices if c != value])


def final_formats(emo, aro, val, exp, style):
    """Returns (text, delivered emotion label, delivered explanation)."""
    if style == 0:
        return json.dumps({"emotion": emo, "arousal": aro, "valence": val, "explanation": exp}), exp
    if style == 1:
        body = json.dumps({"emotion": emo.lower(), "arousal": aro.upper(), "valence": val, "explanation": exp})
        return "```json\n" + body + "\n```", exp
    if style == 2:
        return f"Emotion: {emo}\nArousal: {aro.capitalize()}\nValence: {val.capitalize()}\nExplanation: {exp}", exp
    if style == 3:
        second = "The palette of the scene stays restrained."
        text = (f"**Emotion:** {emo} (a clear reading)\n**Arousal:** {aro} arousal\n"
                f"**Valence:** {val}\n**Explanation:** {exp}\n{second}")
        return text, exp + " " + second
    body = json.dumps({"emotion": emo, "arousal": aro, "valence": val, "explanation": exp})
    return "Here is my analysis of the work.\n" + body + "\nI hope this helps.", exp


def alias_of(emo):
    return {"Contentment": "content", "Afraid": "fearful"}.get(emo, emo)


def make_synthetic24():
    arts = make_dataset("synthetic24", "synthetic24", 24, 20240611, [0, 1, 1, 2, 2], 3,
                        "art{:02d}", no_affect={"art24"})
    rng = random.Random(99)
    lines, flood = [], []
    plan = []
    final_errors = {2: "emotion", 5: "emotion", 8: "arousal", 11: "emotion", 14: "valence",
                    16: "arousal", 19: "emotion", 22: "emotion"}
    final_broken = {7: ("I cannot determine the emotion of this image.", "NoJsonFound"),
                    13: (json.dumps({"emotion": "Nostalgic", "arousal": "low", "valence": "positive",
                                     "explanation": "Faded memories."}), "UnknownLabel")}
    cot_errors = {0: ["composition"], 5: ["light", "line"], 9: [], 12: ["color", "line", "light"]}
    for i, art in enumerate(arts):
        aid, gold = art["id"], set(art["support"])
        decisions, attr_fail = {}, []
        for j, a in enumerate(ATTRS):
            if (i, a) in SALIENCE_BROKEN:
                text, kind = SALIENCE_BROKEN[(i, a)]
                decisions[a] = False
                attr_fail.append(kind)
            else:
                s = (a in gold) != ((i, a) in SALIENCE_ERRORS)
                text = SALIENCE_FORMATS[(i * 5 + j) % len(SALIENCE_FORMATS)](a, s)
                decisions[a] = s
            lines.append({"artwork_id": aid, "role": f"attribute:{a}", "text": text})
            flood.append({"artwork_id": aid, "role": f"attribute:{a}", "text": json.dumps({"salient": True})})

        affect = art["affect"] or {"emotion": "Calm", "arousal": "low", "valence": "positive"}
        emo, aro, val = affect["emotion"], affect["arousal"], affect["valence"]
        field = final_errors.get(i)
        if field == "emotion":
            emo = other(rng, emo, LABELS)
        elif field == "arousal":
            aro = other(rng, aro, ["high", "low"])
        elif field == "valence":
            val = other(rng, val, ["positive", "negative"])
        exp = EXPLANATIONS[i % len(EXPLANATIONS)]
        if i in final_broken:
            text, kind = final_broken[i]
            final = {"parsed": False, "kind": kind, "tokens": len(text.split())}
        else:
            shown = alias_of(emo) if i % 6 == 1 else emo
            text, delivered_exp = final_formats(shown, aro, val, exp, i % 5)
            tokens = len(f"{emo} {aro} {val} {delivered_exp}".split())
            final = {"parsed": True, "emotion": emo, "arousal": aro, "valence": val, "tokens": tokens}
        lines.append({"artwork_id": aid, "role": "final", "text": text})

        cot_support = cot_errors.get(i, sorted(gold, key=ATTRS.index))
        cot_reason = "Step 1: I study the scene. Step 2: I weigh its mood.\n"
        cot_body = {"emotion": emo, "arousal": aro, "valence": val, "explanation": exp,
                    "salient_attributes": cot_support}
        if i == 7:
            cot_text = "The image is unclear to me."
            cot = {"parsed": False, "kind": "NoJsonFound", "tokens": len(cot_text.split())}
        elif i % 3 == 2:
            attrs = " and ".join(cot_support) if cot_support else "none"
            cot_text = (cot_reason + f"Emotion: {emo}\nArousal: {aro}\nValence: {val}\n"
                        f"Explanation: {exp}\nSalient attributes: {attrs}")
            cot = {"parsed": True, "emotion": emo, "arousal": aro, "valence": val,
                   "tokens": len(f"{emo} {aro} {val} {exp}".split()), "support": cot_support}
        else:
            cot_text = cot_reason + json.dumps(cot_body)
            cot = {"parsed": True, "emotion": emo, "arousal": aro, "valence": val,
                   "tokens": len(f"{emo} {aro} {val} {exp}".split()), "support": cot_support}
        lines.append({"artwork_id": aid, "role": "baseline:cot", "text": cot_text})
        plan.append({"art": art, "decisions": decisions, "attr_fail": attr_fail, "final": final, "cot": cot})

    d = FIX / "synthetic24"
    dump_jsonl(d / "responses_mixed.jsonl", lines)
    dump_jsonl(d / "flood_all.jsonl", flood)

    fabg = expected_report(plan, lambda p: {a for a, s in p["decisions"].items() if s}, "final",
                           lambda p: p["attr_fail"])
    cot = expected_report(plan, lambda p: set(p["cot"].get("support", [])) if p["cot"]["parsed"] else set(),
                          "cot", lambda p: [])
    dump_json(d / "expected_fabg_fixture.json", fabg)
    dump_json(d / "expected_cot_fixture.json", cot)
    write_configs(d)


def expected_report(plan, predicted, key, attr_failures):
    pairs, hits, compact = [], [[], [], []], []
    attr_parse, final_parse = {}, {}
    dist = [0] * 6
    for p in plan:
        art, fin = p["art"], p[key]
        for kind in attr_failures(p):
            attr_parse[kind] = attr_parse.get(kind, 0) + 1
        if not fin["parsed"]:
            final_parse[fin["kind"]] = final_parse.get(fin["kind"], 0) + 1
        pred = predicted(p)
        dist[len(pred)] += 1
        pairs.append((pred, set(art["support"])))
        correct = None
        if art["affect"]:
            g = art["affect"]
            correct = [fin["parsed"] and fin[f] == g[f] for f in ("emotion", "arousal", "valence")]
            for h, c in zip(hits, correct):
                h.append(c)
        compact.append((fin["tokens"], correct))
    n = len(hits[0])
    acc = [sum(h) / n for h in hits]
    return {
        "n_records": len(plan),
        "n_samples": n,
        "n_excluded": len(plan) - n,
        "accuracy": {"emotion": acc[0], "arousal": acc[1], "valence": acc[2], "average": sum(acc) / 3},
        "alignment": alignment(pairs),
        "flooding": {
            "mean_flooding_count": sum(len(p - g) for p, g in pairs) / len(pairs),
            "flooding_regime_fraction": dist[5] / len(plan),
            "mean_sparsity": sum(k * c for k, c in enumerate(dist)) / len(plan),
            "sparsity_distribution": dist,
        },
        "compactness": {
            "n": len(compact),
            "mean_tokens": sum(t for t, _ in compact) / len(compact),
            "emotion_correct_mean": cond_mean([t for t, c in compact if c and c[0]]),
            "arousal_correct_mean": cond_mean([t for t, c in compact if c and c[1]]),
            "valence_correct_mean": cond_mean([t for t, c in compact if c and c[2]]),
        },
        "failures": {"attribute_parse": attr_parse, "final_parse": final_parse},
    }


def toml_config(condition, backends, salience_source=None, seed=7, concurrency=4):
    out = ["[dataset]", 'manifest = "manifest.json"', "", "[condition]", f'name = "{condition}"']
    if salience_source:
        out.append(f'salience_source = "{salience_source}"')
    for role, spec in backends.items():
        out += ["", f"[backends.{role}]"]
        for k, v in spec.items():
            out.append(f"{k} = {v}")
    out += ["", "[limits]", f"concurrency = {concurrency}", "", "[run]", f"seed = {seed}", ""]
    return "\n".join(out)


FIXTURE = {"kind": '"fixture"', "model_id": '"fixture-vlm"', "fixture": '"responses_mixed.jsonl"'}
ORACLE = {"kind": '"oracle"', "model_id": '"oracle"', "oracle": "{ flip_probability = 0.0 }"}


def write_configs(d):
    flood = {"kind": '"fixture"', "model_id": '"flood-all"', "fixture": '"flood_all.jsonl"'}
    configs = {
        "fabg_fixture.toml": toml_config("fabg", {"attribute": FIXTURE, "final": FIXTURE}),
        "cot_fixture.toml": toml_config("cot", {"final": FIXTURE}),
        "fabg_oracle.toml": toml_config("fabg", {"attribute": ORACLE, "final": ORACLE}, seed=11),
        "fabg_gold.toml": toml_config("fabg", {"final": ORACLE}, salience_source="gold"),
        "flood_all.toml": toml_config("fabg", {"attribute": flood, "final": ORACLE}),
    }
    for name, text in configs.items():
        (d / name).write_text(text)


# ---------------------------------------------------------------- calibration


def make_calib1000():
    make_dataset("calib1000", "calib1000", 1000, 5150, [1, 2], 1, "cal{:04d}")
    noisy = {"kind": '"oracle"', "model_id": '"oracle-noisy"', "oracle": "{ flip_probability = 0.1 }"}
    (FIX / "calib1000" / "fabg_noisy.toml").write_text(
        toml_config("fabg", {"attribute": noisy, "final": ORACLE}, seed=2024, concurrency=8))


# ---------------------------------------------------------------- ratings


def make_ratings():
    d = FIX / "ratings"
    pairs = [(1, 1), (1, 0), (0, 0), (1, 1)]
    rows = []
    for i, (x, y) in enumerate(pairs):
        rows.append({"item_id": f"w{i + 1}", "rater_id": "r1", "value": bool(x)})
        rows.append({"item_id": f"w{i + 1}", "rater_id": "r2", "value": bool(y)})
    dump_jsonl(d / "worked_example.jsonl", rows)

    rng = random.Random(31)
    rows = []
    for section in ["color", "composition", "line", "light", "brushstroke"]:
        for i in range(12):
            truth = rng.random() < 0.4
            for r in range(3):
                v = truth if rng.random() < 0.85 else not truth
                rows.append({"item_id": f"{section}-{i}", "rater_id": f"r{r + 1}", "value": v, "section": section})
    dump_jsonl(d / "sections.jsonl", rows)

    rows = [{"item_id": "solo", "rater_id": "r1", "value": True},
            {"item_id": "solo", "rater_id": "r2", "value": False},
            {"item_id": "lonely", "rater_id": "r1", "value": True}]
    dump_jsonl(d / "single_rated.jsonl", rows)


# ---------------------------------------------------------------- published table


PUBLISHED = [
    ("Qwen3-VL", "Base", 29.33, 56.67, 80.00, 55.33),
    ("Qwen3-VL", "CoT", 29.33, 64.67, 85.33, 59.78),
    ("Qwen3-VL", "One-Shot+CoT", 37.33, 80.00, 85.33, 67.55),
    ("Qwen3-VL", "CoT-SFT", 48.67, 78.00, 88.00, 71.56),
    ("Qwen3-VL", "FAB-G", 50.00, 82.00, 90.00, 74.00),
    ("Kimi-VL", "Base", 26.00, 62.00, 87.33, 58.44),
    ("Kimi-VL", "CoT", 32.67, 70.67, 89.33, 64.22),
    ("Kimi-VL", "One-Shot", 30.67, 80.67, 85.33, 65.56),
    ("Qwen2.5-VL", "Base", 18.67, 68.67, 82.67, 56.67),
    ("Qwen2.5-VL", "CoT", 36.00, 76.67, 85.33, 66.00),
    ("Qwen2.5-VL", "One-Shot", 26.67, 73.33, 82.00, 60.67),
    ("MiniCPM", "Base", 29.33, 74.67, 77.33, 60.44),
    ("MiniCPM", "CoT", 35.33, 78.00, 75.33, 62.89),
    ("MiniCPM", "One-Shot", 31.33, 76.00, 77.33, 61.55),
]


def table_report(model, variant, condition, e, a, v):
    e, a, v = e / 100, a / 100, v / 100
    return {
        "label": f"{model} {variant}",
        "condition": condition,
        "model_id": model,
        "config_digest": "published",
        "gold_digest": "emoart-test-150",
        "tversky": {"alpha": 0.8, "beta": 0.2},
        "tokenizer": "whitespace",
        "n_records": 150,
        "n_samples": 150,
        "n_excluded": 0,
        "accuracy": {"emotion": e, "arousal": a, "valence": v, "average": (e + a + v) / 3},
        "alignment": None,
        "flooding": {"mean_flooding_count": None, "flooding_regime_fraction": 0.0, "mean_sparsity": 0.0,
                     "sparsity_distribution": [0, 0, 0, 0, 0, 0]},
        "compactness": None,
        "failures": {"attribute_parse": {}, "final_parse": {}, "attribute_backend": 0, "final_backend": 0,
                     "final_skipped": 0},
    }


def make_published():
    d = FIX / "published"
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "accuracy.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["model", "variant", "emotion", "arousal", "valence", "average"])
        for row in PUBLISHED:
            w.writerow([row[0], row[1]] + [f"{x:.2f}" for x in row[2:]])
    rows = {r[1]: r for r in PUBLISHED if r[0] == "Qwen3-VL"}
    _, _, *acc, _ = rows["CoT-SFT"]
    dump_json(d / "cot_sft.json", table_report("Qwen3-VL", "CoT-SFT", "cot_sft_backend", *acc))
    _, _, *acc, _ = rows["FAB-G"]
    dump_json(d / "fabg.json", table_report("Qwen3-VL", "FAB-G", "fabg", *acc))


# ---------------------------------------------------------------- parser corpus


def sal(text, salient, attribute="color"):
    return {"kind": "salience", "attribute": attribute, "text": text, "expect": {"salient": salient}}


def fin(text, emotion, arousal, valence, attrs=None):
    expect = {"emotion": emotion, "arousal": arousal, "valence": valence}
    if attrs is not None:
        expect["salient_attributes"] = attrs
    return {"kind": "final", "text": text, "expect": expect}


def make_parser_corpus():
    rows = [
        sal('{"salient": true}', True),
        sal('{"salient": false}', False),
        sal('{"Salient": true}', True, "light"),
        sal('{ "salient" : false , "reason": "flat tones" }', False),
        sal('```json\n{"salient": true}\n```', True, "line"),
        sal('```\n{"salient": false}\n```', False, "line"),
        sal('Here is my answer: {"salient": true}', True),
        sal('{"reason": "the strokes are agitated", "salient": true}', True, "brushstroke"),
        sal('{"salient": "yes"}', True),
        sal('{"salient": "no"}', False),
        sal("Yes", True),
        sal("yes.", True),
        sal("No", False),
        sal("NO - it plays a minor role.", False),
        sal("Yes, the warm palette drives the mood.", True),
        sal("No, the arrangement is conventional.", False, "composition"),
        sal("True", True),
        sal("false", False),
        sal("Salient: yes", True),
        sal("Salient: no", False),
        sal("**Salient**: true", True),
        sal("Answer: yes", True),
        sal("Answer: No.", False),
        sal("Decision: not salient", False, "light"),
        sal("Not salient.", False),
        sal("non-salient", False),
        sal("Salient. The contours guide the eye.", True, "line"),
        sal("Final answer: yes", True),
        sal("  yes  \n", True),
        sal("Verdict: false. The strokes are even.", False, "brushstroke"),
        sal('JSON: {"salient": false}', False),
        fin('{"emotion": "Calm", "arousal": "low", "valence": "positive", "explanation": "Still water."}',
            "Calm", "low", "positive"),
        fin('{"emotion":"Sad","arousal":"low","valence":"negative","explanation":"Grey tones."}',
            "Sad", "low", "negative"),
        fin('{"emotion": "calm", "arousal": "LOW", "valence": "Positive", "explanation": "x"}',
            "Calm", "low", "positive"),
        fin('{"emotion": "content", "arousal": "low", "valence": "positive", "explanation": "x"}',
            "Contentment", "low", "positive"),
        fin('{"Emotion": "Tense", "Arousal": "high", "Valence": "negative", "Explanation": "x"}',
            "Tense", "high", "negative"),
        fin('```json\n{"emotion": "Happy", "arousal": "high", "valence": "positive", "explanation": "x"}\n```',
            "Happy", "high", "positive"),
        fin('Sure! Here is the result:\n{"emotion": "Angry", "arousal": "high", "valence": "negative", "explanation": "x"}',
            "Angry", "high", "negative"),
        fin('{"emotion": "Afraid", "arousal": "high", "valence": "negative"}', "Afraid", "high", "negative"),
        fin('{"emotion": "fear", "arousal": "high", "valence": "negative", "explanation": "x"}',
            "Afraid", "high", "negative"),
        fin('{"emotion": " Bored. ", "arousal": "low", "valence": "negative", "explanation": "x"}',
            "Bored", "low", "negative"),
        fin('{"explanation": "Bright {curly} marks.", "emotion": "Excited", "arousal": "high", "valence": "positive"}',
            "Excited", "high", "positive"),
        fin('{"emotion": "Pleased", "arousal": "low", "valence": "positive", "explanation": "x", '
            '"salient_attributes": ["color", "line"]}', "Pleased", "low", "positive", ["color", "line"]),
        fin('{"emotion": "Relaxed", "arousal": "low", "valence": "positive", "explanation": "x", '
            '"salient_attributes": []}', "Relaxed", "low", "positive", []),
        fin('{"emotion": "Depressed", "arousal": "low", "valence": "negative", "explanation": "x", '
            '"salient_attributes": "light and composition"}', "Depressed", "low", "negative",
            ["composition", "light"]),
        fin("Emotion: Calm\nArousal: low\nValence: positive\nExplanation: Quiet scene.", "Calm", "low", "positive"),
        fin("emotion: sad\narousal: LOW\nvalence: Negative", "Sad", "low", "negative"),
        fin("**Emotion:** Tense\n**Arousal:** High\n**Valence:** Negative\n**Explanation:** Jagged forms.",
            "Tense", "high", "negative"),
        fin("- Emotion: Happy\n- Arousal: high\n- Valence: positive\n- Explanation: Festive crowd.",
            "Happy", "high", "positive"),
        fin("Emotion: Contentment (mild)\nArousal: low arousal\nValence: positive valence\nRationale: Warmth.",
            "Contentment", "low", "positive"),
        fin("Predicted emotion: Excited\nArousal: high\nValence: positive\nReasoning: Lively marks.",
            "Excited", "high", "positive"),
        fin("### Emotion: Angry\n### Arousal: high\n### Valence: negative", "Angry", "high", "negative"),
        fin("Let me think step by step.\nThe scene is dim.\nEmotion: Depressed\nArousal: low\nValence: negative",
            "Depressed", "low", "negative"),
        fin("Emotion: Bored\nArousal: low\nValence: negative\nExplanation: Flat and empty.\nNothing moves.",
            "Bored", "low", "negative"),
        fin("Emotion: Pleased\nArousal: low\nValence: positive\nSalient attributes: color, light",
            "Pleased", "low", "positive", ["color", "light"]),
        fin("Emotion: Afraid\nArousal: high\nValence: negative\nSalient cues: brushstroke",
            "Afraid", "high", "negative", ["brushstroke"]),
        fin('{"emotion": "Calm", "arousal": "low"}\nValence: positive', "Calm", "low", "positive"),
        fin("> Emotion: Relaxed\n> Arousal: low\n> Valence: positive", "Relaxed", "low", "positive"),
        fin("Emotion label: Sad\nArousal: low\nValence: negative\nExplanation: Rain.", "Sad", "low", "negative"),
        fin("EMOTION: HAPPY\nAROUSAL: HIGH\nVALENCE: POSITIVE", "Happy", "high", "positive"),
        fin('{"emotion": "Tense", "arousal": "high", "valence": "negative", "explanation": "Say \\"no\\"."}',
            "Tense", "high", "negative"),
        fin('Output:\n```\n{"emotion": "Excited", "arousal": "high", "valence": "positive", "explanation": "x"}\n```\nDone.',
            "Excited", "high", "positive"),
        fin("Emotion - Calm\nArousal - low\nValence - positive", "Calm", "low", "positive"),
    ]
    dump_jsonl(FIX / "parser_corpus.jsonl", rows)


if __name__ == "__main__":
    make_synthetic24()
    make_calib1000()
    make_ratings()
    make_published()
    make_parser_corpus()
