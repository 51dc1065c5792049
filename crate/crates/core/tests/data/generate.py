"""Regenerates the synthetic fixtures in this directory (numpy required)."""
import csv
import numpy as np

rng = np.random.default_rng(20240611)

# Mortality: years 1900-1999, ages 0-40, two sexes.
years = range(1900, 2000)
ages = range(0, 41)
planted = {
    ("male", y): range(18, 31) for y in range(1914, 1919)
}
planted[("female", 1918)] = range(15, 36)
planted[("male", 1940)] = range(20, 26)
blips = {("male", 1950, 5), ("female", 1960, 25), ("female", 1975, 3)}
with open("mortality_synthetic.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["year", "age", "sex", "mortality_rate"])
    for sex, shift in (("female", 0.0), ("male", 0.25)):
        for age in ages:
            base = -4.0 - 0.9 * np.exp(-age / 3.0) + 0.045 * max(age - 12, 0) + shift
            noise = rng.normal(0.0, 0.03, len(years))
            for k, year in enumerate(years):
                log_rate = base - 0.012 * (year - 1900) + noise[k]
                if age in planted.get((sex, year), ()):
                    log_rate += 0.5
                if (sex, year, age) in blips:
                    log_rate += 0.6
                w.writerow([year, age, sex, f"{np.exp(log_rate):.8f}"])

# Cricket: ~3000 batters, not-out probability rising slowly with innings,
# plus one batter with 114 not-outs in 265 innings.
n = 3000
innings = np.minimum(np.ceil(rng.lognormal(3.0, 1.1, n)), 330).astype(int)
p = 0.093 + 0.009 * np.log(innings)
notouts = rng.binomial(innings, p)
rows = [(f"Player {i + 1:04d}", int(a), int(b)) for i, (a, b) in enumerate(zip(innings, notouts))]
rows[1234] = ("Planted Tailender", 265, 114)
rows[17] = ("Never Batted", 0, 0)
with open("cricket_synthetic.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["player", "innings", "notouts"])
    w.writerows(rows)
tot_i = sum(r[1] for r in rows)
tot_n = sum(r[2] for r in rows)
print("cricket pooled", tot_n, tot_i, tot_n / tot_i)

# 1000 standard Normal draws for the score command.
with open("normal_1000.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow(["value"])
    for v in rng.standard_normal(1000):
        w.writerow([f"{v:.12f}"])
