"""Regenerate conceptnet_1k.tsv: 1,000 ConceptNet 5.7-style assertion lines.

HasContext, FormOf and SymbolOf carry a few hidden groups each so the
pipeline has something to cluster; RelatedTo, IsA and ExternalURL fill
out the file. Output is fixed by the seed.
"""
import json
import random

rng = random.Random(1729)

contexts = {
    "chemistry": ["acid", "ion", "molecule", "reagent", "solvent", "catalyst", "isotope", "alkane", "ester", "polymer"],
    "music": ["chord", "tempo", "octave", "sonata", "cadence", "timbre", "fugue", "riff", "scale", "aria"],
    "sport": ["offside", "penalty", "dribble", "tackle", "goalie", "serve", "volley", "sprint", "relay", "umpire"],
    "law": ["tort", "plaintiff", "verdict", "appeal", "statute", "bail", "felony", "subpoena", "warrant", "jury"],
}
lemmas = ["run", "walk", "talk", "jump", "read", "write", "swim", "sing", "play", "climb",
          "cook", "paint", "drive", "teach", "build", "dance", "fly", "grow", "throw", "catch"]
forms = {"s": "{}s", "ing": "{}ing", "ed": "{}ed"}
symbols = {
    "chemistry": ["h", "he", "li", "na", "k", "fe", "cu", "ag", "au", "pb"],
    "currency": ["$", "€", "£", "¥", "₹", "₩", "₽", "₺", "₴", "₦"],
    "math": ["π", "∑", "∫", "√", "∞", "∂", "∇", "≈", "≠", "±"],
}
symbol_targets = {"chemistry": "element", "currency": "money", "math": "mathematics"}
words = [w for ws in contexts.values() for w in ws] + lemmas + ["cat", "dog", "tree", "house", "river", "cloud",
                                                                "stone", "bread", "chair", "lamp"]


def c(term, lang="en"):
    return f"/c/{lang}/{term}"


def line(rel, head, tail):
    uri = f"/a/[/r/{rel}/,{head}/,{tail}/]"
    meta = {"dataset": "/d/wiktionary/en", "license": "cc:by-sa/4.0",
            "sources": [{"contributor": "/s/resource/wiktionary/en", "process": "/s/process/wikiparsec/2"}],
            "weight": 1.0}
    return "\t".join([uri, f"/r/{rel}", head, tail, json.dumps(meta, ensure_ascii=False)])


rows = []
seen = set()


def fill(count, make):
    # assertion URIs are unique in a real dump; redraw duplicates
    added = 0
    while added < count:
        rel, head, tail = make()
        if (rel, head, tail) not in seen:
            seen.add((rel, head, tail))
            rows.append(line(rel, head, tail))
            added += 1


def has_context():
    ctx = rng.choice(sorted(contexts))
    return "HasContext", c(rng.choice(contexts[ctx]) + f"_{rng.randrange(8)}"), c(ctx)


def form_of():
    lemma = rng.choice(lemmas)
    form = rng.choice(sorted(forms))
    return "FormOf", c(forms[form].format(lemma) + f"_{rng.randrange(4)}"), c(lemma)


def symbol_of():
    group = rng.choice(sorted(symbols))
    return "SymbolOf", c(rng.choice(symbols[group]) + f"_{rng.randrange(4)}", "mul"), c(symbol_targets[group])


def external_url():
    w = rng.choice(words)
    return "ExternalURL", c(w), f"http://dbpedia.org/resource/{w.capitalize()}"


fill(300, has_context)
fill(200, form_of)
fill(100, symbol_of)
fill(200, lambda: ("RelatedTo", c(rng.choice(words)), c(rng.choice(words))))
fill(150, lambda: ("IsA", c(rng.choice(words)), c(rng.choice(["thing", "object", "concept", "action"]))))
fill(50, external_url)

rng.shuffle(rows)
assert len(rows) == 1000
with open("conceptnet_1k.tsv", "w", encoding="utf-8", newline="\n") as f:
    f.write("\n".join(rows) + "\n")
