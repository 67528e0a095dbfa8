"""Reference oracle for the cloze scorer golden file.

Normalization and F1 are the official SQuAD v2.0 evaluation functions,
copied verbatim. Truncation and max-over-candidates are layered on top.
Run: python3 squad_oracle.py > squad_golden.json
"""
import collections
import json
import re
import string


def normalize_answer(s):
    def remove_articles(text):
        regex = re.compile(r'\b(a|an|the)\b', re.UNICODE)
        return re.sub(regex, ' ', text)

    def white_space_fix(text):
        return ' '.join(text.split())

    def remove_punc(text):
        exclude = set(string.punctuation)
        return ''.join(ch for ch in text if ch not in exclude)

    def lower(text):
        return text.lower()

    return white_space_fix(remove_articles(remove_punc(lower(s))))


def get_tokens(s):
    if not s:
        return []
    return normalize_answer(s).split()


def f1_tokens(gold_toks, pred_toks):
    common = collections.Counter(gold_toks) & collections.Counter(pred_toks)
    num_same = sum(common.values())
    if len(gold_toks) == 0 or len(pred_toks) == 0:
        return float(gold_toks == pred_toks)
    if num_same == 0:
        return 0.0
    precision = 1.0 * num_same / len(pred_toks)
    recall = 1.0 * num_same / len(gold_toks)
    return (2 * precision * recall) / (precision + recall)


def compute_f1(a_gold, a_pred):
    return f1_tokens(get_tokens(a_gold), get_tokens(a_pred))


def score(generation, answers):
    pred = get_tokens(generation)
    best, exact = 0.0, False
    for canonical, aliases in answers:
        for form in [canonical] + aliases:
            gold = get_tokens(form)
            if not gold:
                continue
            clipped = pred[:len(gold)]
            best = max(best, f1_tokens(gold, clipped))
            exact = exact or clipped == gold
    return best, exact


CASES = [
    ("Berlin", [["Berlin", []]]),
    ("berlin", [["Berlin", []]]),
    ("the Berlin", [["Berlin", []]]),
    ("Munich", [["Berlin", []]]),
    ("NYC", [["New York City", ["NYC", "New York"]]]),
    ("New York", [["New York City", []]]),
    ("New York, USA", [["New York City", ["New York"]]]),
    ("Toni Nadal and others", [["Toni Nadal", []], ["Carlos Moyá", []], ["Francisco Roig", []]]),
    ("Carlos Moya", [["Toni Nadal", []], ["Carlos Moyá", []], ["Francisco Roig", []]]),
    ("Paris, France is a city", [["Paris", []]]),
    ("The Capital, of Germany!", [["capital of Germany", []]]),
    ("  lots   of    space  ", [["lots of space", []]]),
    ("", [["Berlin", []]]),
    ("...", [["Berlin", []]]),
    ("an apple a day", [["apple", []]]),
    ("Theatre", [["the atre", []]]),
    ("Argentina, Bolivia and Peru", [["Argentina", []], ["Bolivia", []], ["Peru", []]]),
    ("Bolivia", [["Argentina", []], ["Bolivia", []], ["Peru", []]]),
    ("Stageira, in Greece", [["Stageira", ["Stagira"]]]),
    ("Stagira", [["Stageira", ["Stagira"]]]),
    ("the United Kingdom of Great Britain", [["United Kingdom", ["UK", "Britain"]]]),
    ("U.K.", [["United Kingdom", ["UK", "Britain"]]]),
    ("Côte d'Ivoire", [["Ivory Coast", ["Côte d'Ivoire"]]]),
    ("Saint-Étienne", [["Saint-Étienne", []]]),
    ("English language", [["English", ["English language"]]]),
    ("English", [["English language", []]]),
    ("language English", [["English language", []]]),
    ("York New City", [["New York City", []]]),
    ("the the the", [["Berlin", []]]),
    ("A", [["Berlin", []]]),
    ("Roman Catholic Church", [["Catholicism", ["Catholic Church", "Roman Catholicism"]]]),
    ("Catholic", [["Catholicism", ["Catholic Church"]]]),
    ("Islam.", [["Islam", []]]),
    ("Sunni Islam", [["Islam", []], ["Sunni Islam", []]]),
    ("Real Madrid CF", [["Real Madrid", ["Real Madrid C.F."]]]),
    ("FC Barcelona B", [["FC Barcelona", []], ["Juventus", []]]),
    ("Juventus F.C.", [["Juventus FC", ["Juve"]]]),
    ("Mr. Barack Obama", [["Barack Obama", ["Obama"]]]),
    ("Obama", [["Barack Obama", []]]),
    ("barack hussein obama", [["Barack Obama", []]]),
    ("1990s rock band", [["rock music", ["rock"]]]),
    ("jazz", [["rock music", ["rock"]], ["jazz", []]]),
    ("pop pop pop", [["pop music", []]]),
    ("Nobel Prize in Physics", [["Nobel Prize in Physics", []], ["Wolf Prize", []]]),
    ("Wolf", [["Wolf Prize", []]]),
    ("Columbia Records, Sony", [["Columbia Records", ["Columbia"]]]),
    ("a-ha", [["a-ha", []]]),
    ("the A-Team", [["A-Team", []]]),
    ("Ludwig van Beethoven", [["Beethoven", []]]),
    ("Johann Sebastian Bach", [["Bach", ["J. S. Bach", "Johann Sebastian Bach"]]]),
]

assert len(CASES) == 50

out = []
for gen, answers in CASES:
    s, em = score(gen, answers)
    out.append({
        "generation": gen,
        "answers": [{"canonical": c, "aliases": a} for c, a in answers],
        "normalized": get_tokens(gen),
        "f1_vs_canonical": [compute_f1(c, gen) for c, _ in answers],
        "score": s,
        "exact_match": em,
    })
print(json.dumps(out, ensure_ascii=False, indent=1))
