#!/usr/bin/env python3
"""Writes the small synthetic survey under configs/sample/ (fixed seed)."""
import csv
import random
from pathlib import Path

ITEMS = [
    "husband_decides", "man_earns_woman_home", "fulfilled_as_mother", "husband_career_first",
    "boy_education_first", "no_work_religious", "housewife_fulfilling", "working_mother_warm",
    "dual_income", "spouse_respectful", "spouse_obedient", "spouse_confident", "spouse_intelligent",
    "spouse_respected", "trust_people", "rely_on_nobody", "caution_needed", "trust_family",
    "trust_neighbors", "trust_strangers", "trust_other_ethnic",
]
CHOICES = ["love_marriage", "mock_kidnapping", "arranged_marriage", "bride_capture", "forgo"]
LEADERS = "Community leaders, eg. aksakals make a decision, and other community members accept it"
OTHER = "Everyone decides for themselves"


def main(out=Path(__file__).resolve().parent.parent / "configs" / "sample", n=300, communities=12, seed=2013):
    rng = random.Random(seed)
    out.mkdir(parents=True, exist_ok=True)
    ids = [f"v{k + 1:02d}" for k in range(communities)]
    leaders = set(rng.sample(ids, 3))
    police = {c: int(rng.random() < 0.5) for c in ids}

    with open(out / "communities.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["community_id", "decision_answer"])
        for c in ids:
            w.writerow([c, LEADERS if c in leaders else OTHER])

    with open(out / "marriages.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["marriage_id", "community_id", "wave", "payment"])
        k = 0
        for c in ids:
            level = rng.lognormvariate(0.0, 0.4)
            for _ in range(rng.randint(2, 5)):
                k += 1
                w.writerow([f"m{k}", c, rng.choice([2011, 2012]), f"{level * rng.uniform(0.8, 1.2):.4f}"])

    header = (["individual_id", "community_id", "choice", "age", "reliable", "police", "income", "second_home",
               "vehicle", "loan", "event_host", "employed"] + ITEMS +
              ["ethnicity", "village", "kidnap_attempt"] + [f"adv_q{q}" for q in range(1, 7)])
    with open(out / "survey.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for i in range(n):
            c = rng.choice(ids)
            choice = rng.choices(CHOICES, weights=[40, 12, 25, 10, 13])[0]
            kidnapper = choice in ("mock_kidnapping", "bride_capture")
            row = [f"r{i + 1:04d}", c, choice, rng.randint(16, 70), int(rng.random() < 0.95), police[c],
                   f"{rng.lognormvariate(0.0, 0.5):.4f}"]
            row += [int(rng.random() < p) for p in (0.08, 0.44, 0.2, 0.3, 0.6)]
            row += [rng.randint(1, 4) for _ in ITEMS]
            row += [rng.choice(["Kyrgyz", "Kazakh", "Uzbek", "Russian", "Dungan"]), int(rng.random() < 0.7),
                    int(not kidnapper and rng.random() < 0.05)]
            row += [rng.randint(1, 4) if kidnapper or rng.random() < 0.3 else "" for _ in range(6)]
            if rng.random() < 0.02:
                row[header.index("income")] = "NA"
            w.writerow(row)


if __name__ == "__main__":
    main()
