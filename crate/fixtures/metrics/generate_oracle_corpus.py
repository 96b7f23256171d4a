import json, random
from nltk.translate.bleu_score import sentence_bleu, SmoothingFunction
from rouge_score import rouge_scorer
rng = random.Random(20241019)
vocab = "a the man woman person reads writes walks book paper desk room chair table cup sits stands near after while then and in on at".split()
punct = [",", ".", "!"]
def sent(n):
    out = []
    for _ in range(n):
        out.append(rng.choice(vocab))
        if rng.random() < 0.08:
            out.append(rng.choice(punct))
    return out
def mutate(toks):
    t = list(toks)
    for _ in range(rng.randint(0, 6)):
        op = rng.random()
        if op < 0.4 and t:
            t[rng.randrange(len(t))] = rng.choice(vocab)
        elif op < 0.7 and t:
            del t[rng.randrange(len(t))]
        else:
            t.insert(rng.randrange(len(t)+1), rng.choice(vocab))
    return t
def render(toks):
    s = ""
    for i, w in enumerate(toks):
        if w in punct: s += w
        else: s += (" " if i else "") + (w.capitalize() if rng.random() < 0.1 else w)
    return s
sm = SmoothingFunction().method2
cases = []
for i in range(50):
    base = sent(rng.randint(1, 25))
    nref = rng.randint(1, 3)
    refs = [mutate(base) or ["a"] for _ in range(nref)]
    cand = mutate(base) if i % 7 else sent(rng.randint(1, 12))
    if i == 0: cand = list(refs[0])
    if not cand: cand = ["the"]
    bleu = float(sentence_bleu(refs, cand, smoothing_function=sm))
    best = None
    for r in refs:
        s = rouge_scorer._score_lcs(r, cand)
        if best is None or s.fmeasure > best.fmeasure: best = s
    cases.append({
        "video_id": f"v{i:02d}",
        "candidate": render(cand),
        "references": [render(r) for r in refs],
        "candidate_tokens": cand,
        "reference_tokens": refs,
        "bleu4": bleu,
        "rouge_l": {"precision": best.precision, "recall": best.recall, "f1": best.fmeasure},
    })
json.dump({"generator": "nltk sentence_bleu method2 / rouge_score _score_lcs", "cases": cases}, open("fixtures/metrics/oracle_corpus.json", "w"), indent=1)
print(len(cases), sum(c["bleu4"] == 0 for c in cases), min(c["bleu4"] for c in cases), max(c["bleu4"] for c in cases))
