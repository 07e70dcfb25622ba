"""Seeded generator for a synthetic annotated recipe corpus.

Stand-in for a real annotated corpus when none is available: ingredient
lines built from quantity, ingredient and preparation phrases over the
14-tag POS inventory and the four ingredient states.  Ingredient heads
follow a Zipf law over a long tail of invented words so that a held-out
split sees a realistic share of unknown tokens.  Participles such as
``مفروم`` are part of the ingredient name (F, state 2) in some lines and a
preparation note (K, state 0) in others, so the POS tag carries
information the tokens alone do not; a share of the F-tagged participles is
annotated 0 to mimic annotator disagreement.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from .corpus import AnnotatedSentence, Corpus, format_corpus

HEADS = (
    "ملح سكر فلفل دقيق زيت ماء حليب بيض زبدة ثوم بصل طماطم ليمون بقدونس كمون قرفة "
    "زنجبيل لحم دجاج جبن أرز عدس حمص جزر بطاطس كزبرة نعناع خل عسل خميرة فانيلا "
    "سمسم زعتر كركم بهارات قشطة لوز جوز تمر زيتون فول"
).split()
NAME_ADJECTIVES = "اسود ابيض احمر اخضر حار حلو مالح بلدي".split()
COMPOUNDS = (("زيت", "زيتون"), ("عصير", "ليمون"), ("ماء", "زهر"), ("ورق", "غار"),
             ("جوز", "هند"), ("معجون", "طماطم"), ("مرق", "دجاج"), ("حبة", "بركة"))
TRIPLES = (("زيت", "زيتون", "بكر"), ("فلفل", "اسود", "مطحون"), ("سكر", "بني", "ناعم"))
PARTICIPLES = "مفروم مبشور مطحون مجفف مسلوق".split()
PREPARATION = "مقطع مغسول مذاب مقلي مفتت".split()
SIZES = "كبير صغير متوسط طازج ناضج".split()
QUANTIFIERS = "رشة قليل كمية حفنة".split()
UNITS = "كأس ملعقة ملاعق غرام كيلو حبة حبات فص علبة لتر".split()
NUMBERS = "1 2 3 4 5 6 250 500 ½".split()
PREP_PHRASES = (("حسب", "الذوق"), ("حسب", "الرغبة"), ("عند", "الحاجة"), ("في", "الثلاجة"))
ADVERBS = "جيدا قليلا".split()

SHIPPED_CORPUS = "@synthetic"

_LETTERS = "بتثجحخدذرزسشصضطظعغفقكلمنهي"


def _invented_words(rng, n):
    words = []
    seen = set(HEADS)
    while len(words) < n:
        w = "".join(rng.choice(list(_LETTERS), size=int(rng.integers(3, 6))))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


class _Generator:
    def __init__(self, rng, vocab_size=800, zipf=0.85, noise=0.15):
        self.rng = rng
        self.noise = noise
        self.heads = HEADS + _invented_words(rng, vocab_size - len(HEADS))
        ranks = np.arange(1, len(self.heads) + 1)
        p = ranks ** -zipf
        self.head_p = p / p.sum()

    def pick(self, items):
        return items[int(self.rng.integers(len(items)))]

    def head(self):
        return self.heads[int(self.rng.choice(len(self.heads), p=self.head_p))]

    def quantity(self):
        r = self.rng.random()
        if r < 0.40:
            return [(self.pick(NUMBERS), "B", "0"), (self.pick(UNITS), "I", "0")]
        if r < 0.60:
            return [(self.pick(QUANTIFIERS), "C", "0")]
        return []

    def ingredient(self, quantified):
        """Ingredient words with their states; the head tag depends on context."""
        r = self.rng.random()
        head_tag = "D" if quantified else "A"
        if r < 0.04:
            words = self.pick(TRIPLES)
            return [(words[0], "E", "1"), (words[1], "F", "2"), (words[2], "F", "3")]
        if r < 0.20:
            return [(self.head(), "E", "1"), (self.pick(NAME_ADJECTIVES), "F", "2")]
        if r < 0.34:
            # annotators disagree on whether the participle is part of the name
            state = "0" if self.rng.random() < self.noise else "2"
            return [(self.head(), "E", "1"), (self.pick(PARTICIPLES), "F", state)]
        if r < 0.44:
            a, b = self.pick(COMPOUNDS)
            return [(a, head_tag, "1"), (b, "D", "2")]
        if not quantified and r < 0.60:
            return [("ال" + self.head(), "C", "1")]
        if quantified and r < 0.54:
            return [("من", "G", "0"), ("ال" + self.head(), "H", "1")]
        return [(self.head(), head_tag, "1")]

    def suffix(self):
        r = self.rng.random()
        if r < 0.18:
            return [(self.pick(PARTICIPLES), "K", "0")]
        if r < 0.28:
            return [(self.pick(PREPARATION), "K", "0")]
        if r < 0.38:
            return [(self.pick(SIZES), "F", "0")]
        if r < 0.46:
            g, h = self.pick(PREP_PHRASES)
            return [(g, "G", "0"), (h, "H", "0")]
        if r < 0.50:
            return [(self.pick(PREPARATION), "K", "0"), (self.pick(ADVERBS), "L", "0")]
        return []

    def sentence(self):
        rows = []
        n_items = 1 + int(self.rng.random() < 0.35) + int(self.rng.random() < 0.12)
        for i in range(n_items):
            if i:
                rows.append(("و", "J", "0") if self.rng.random() < 0.75 else ("أو", "M", "0"))
            q = self.quantity()
            rows += q
            ing = self.ingredient(bool(q))
            rows += ing
            if ing[-1][1] == "F":
                continue
            rows += self.suffix()
        rows.append((".", ".", "0"))
        return AnnotatedSentence(*zip(*rows))


def generate_synthetic_corpus(n_sentences=300, seed=2021):
    """Deterministic synthetic corpus of ``n_sentences`` annotated ingredient lines."""
    gen = _Generator(np.random.default_rng(seed))
    return Corpus([gen.sentence() for _ in range(n_sentences)],
                  provenance={"source": f"synthetic(n={n_sentences}, seed={seed})"})


def synthetic_corpus_text(n_sentences=300, seed=2021):
    header = f"# synthetic recipe corpus: {n_sentences} sentences, seed {seed}\n"
    return header + format_corpus(generate_synthetic_corpus(n_sentences, seed))


def shipped_corpus_path():
    """Path of the packaged corpus generated with the default arguments."""
    return resources.files("recipe_hmm") / "data" / "synthetic_recipes.tsv"
