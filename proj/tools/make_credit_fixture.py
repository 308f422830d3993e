"""Writes data/credit_demo.csv: a small credit-style table for end-to-end runs.

The rows are generated, not collected. Columns follow the German credit subset
(status, duration, credit amount, personal status, age) so the same schema
shape applies to the real file.
"""
import csv
import math
import random
import sys

STATUS = ["lt0", "0to200", "ge200", "none"]
PERSONAL = ["male_single", "male_married", "female", "male_divorced"]


def main(path, n=1000, seed=7):
    rng = random.Random(seed)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["status", "duration", "credit_amount", "personal_status", "age", "good"])
        for _ in range(n):
            status = rng.choices(STATUS, weights=[27, 27, 6, 40])[0]
            duration = rng.choice(range(6, 61, 3))
            amount = round(math.exp(rng.gauss(7.9, 0.75)))
            amount = max(250, min(amount, 18000))
            personal = rng.choices(PERSONAL, weights=[55, 9, 31, 5])[0]
            age = max(19, min(75, round(rng.gammavariate(6.0, 6.0))))
            z = (
                {"lt0": -1.1, "0to200": -0.5, "ge200": 0.3, "none": 1.0}[status]
                - 0.04 * (duration - 20)
                - 0.00012 * (amount - 3000)
                + 0.025 * (age - 35)
                + (0.3 if personal == "male_single" else 0.0)
                + 0.8
            )
            good = 1 if rng.random() < 1.0 / (1.0 + math.exp(-2.5 * z)) else 0
            w.writerow([status, duration, amount, personal, age, good])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/credit_demo.csv")
