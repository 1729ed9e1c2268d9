"""Write the dictionaries and joint distributions used by schemas/social.

Run from anywhere; files land next to social.gs. The numbers are made up but
shaped like the real thing: skewed country sizes, per-country first names,
people who mostly know compatriots and mostly post about their interests.
"""

import csv
from itertools import combinations_with_replacement
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "schemas" / "social"

COUNTRIES = {
    "India": 0.24, "China": 0.20, "United States": 0.12, "Brazil": 0.09, "Germany": 0.07,
    "Spain": 0.07, "France": 0.06, "Japan": 0.06, "Nigeria": 0.05, "Mexico": 0.04,
}

NAMES = {
    "India": (["Arjun", "Rahul", "Vikram", "Amit"], ["Priya", "Ananya", "Divya", "Meera"]),
    "China": (["Wei", "Jun", "Hao", "Lei"], ["Mei", "Xiu", "Lan", "Ying"]),
    "United States": (["James", "Michael", "Robert", "David"], ["Mary", "Jennifer", "Linda", "Emily"]),
    "Brazil": (["Joao", "Pedro", "Lucas", "Gabriel"], ["Ana", "Maria", "Juliana", "Beatriz"]),
    "Germany": (["Lukas", "Jonas", "Felix", "Max"], ["Anna", "Lena", "Sophie", "Marie"]),
    "Spain": (["Javier", "Pablo", "Sergio", "Alejandro"], ["Lucia", "Carmen", "Laura", "Elena"]),
    "France": (["Louis", "Hugo", "Jules", "Arthur"], ["Camille", "Chloe", "Manon", "Ines"]),
    "Japan": (["Haruto", "Ren", "Sota", "Yuto"], ["Yui", "Hina", "Sakura", "Aoi"]),
    "Nigeria": (["Chinedu", "Emeka", "Tunde", "Ibrahim"], ["Ngozi", "Amaka", "Funmi", "Aisha"]),
    "Mexico": (["Santiago", "Mateo", "Diego", "Emiliano"], ["Sofia", "Valentina", "Regina", "Camila"]),
}

# male share differs a little by country; everything else falls back to 50/50
MALE_SHARE = {"India": 0.52, "China": 0.51, "Nigeria": 0.505, "Japan": 0.49}

INTERESTS = {
    "music": 0.22, "sports": 0.18, "technology": 0.15, "travel": 0.12,
    "food": 0.11, "politics": 0.09, "science": 0.08, "art": 0.05,
}

TEXTS = {
    "music": ["new album out", "concert tonight", "this song is stuck in my head"],
    "sports": ["what a match", "training hard", "season opener"],
    "technology": ["new phone day", "debugging all night", "open source rocks"],
    "travel": ["greetings from abroad", "airport again", "best beach ever"],
    "food": ["homemade pasta", "street food tour", "trying a new recipe"],
    "politics": ["election results", "read the debate", "new law passed"],
    "science": ["fascinating paper", "telescope night", "lab results in"],
    "art": ["museum visit", "sketching outdoors", "gallery opening"],
}

SAME_COUNTRY = 0.8
SAME_TOPIC = 0.7


def write(name, header, rows):
    with open(OUT / name, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    write("countries.csv", ["value", "weight"], COUNTRIES.items())
    write("interests.csv", ["value", "weight"], INTERESTS.items())
    write("topics.csv", ["value", "weight"], INTERESTS.items())

    rows = [[c, "male", s] for c, s in MALE_SHARE.items()]
    rows += [[c, "female", round(1 - s, 6)] for c, s in MALE_SHARE.items()]
    rows += [["*", "male", 0.5], ["*", "female", 0.5]]
    write("sex_by_country.csv", ["country", "value", "weight"], rows)

    rows = []
    for c, (male, female) in NAMES.items():
        for sex, names in (("male", male), ("female", female)):
            rows += [[c, sex, n, len(names) - i] for i, n in enumerate(names)]
    rows += [["*", "*", "Alex", 1], ["*", "*", "Sam", 1], ["*", "*", "Kim", 1]]
    write("names.csv", ["country", "sex", "value", "weight"], rows)

    rows = [[t, s, 1] for t, ss in TEXTS.items() for s in ss]
    rows += [["*", "hello world", 1]]
    write("texts.csv", ["topic", "value", "weight"], rows)

    # knows: 80% of the edges join compatriots, the rest mix in proportion.
    # As an ordered matrix (1-mix) diag(w) + mix w w^T, both marginals are w.
    cs = list(COUNTRIES)
    mix = 1 - SAME_COUNTRY
    rows = []
    for a, b in combinations_with_replacement(cs, 2):
        wa, wb = COUNTRIES[a], COUNTRIES[b]
        p = (1 - mix) * wa + mix * wa * wa if a == b else 2 * mix * wa * wb
        rows.append([a, b, f"{p:.12f}"])
    rows[-1][2] = f"{1 - sum(float(r[2]) for r in rows[:-1]):.12f}"
    write("country_pairs.csv", ["valueX", "valueY", "probability"], rows)

    # creates: interest of the author x topic of the message, same construction
    it = list(INTERESTS)
    mix = 1 - SAME_TOPIC
    rows = []
    for a in it:
        for b in it:
            wa, wb = INTERESTS[a], INTERESTS[b]
            p = mix * wa * wb + ((1 - mix) * wa if a == b else 0.0)
            rows.append([a, b, f"{p:.12f}"])
    rows[-1][2] = f"{1 - sum(float(r[2]) for r in rows[:-1]):.12f}"
    write("interest_topic.csv", ["interest", "topic", "probability"], rows)

if __name__ == "__main__":
    main()
