#!/usr/bin/env python3
"""Writes the synthetic Travis-County-like fixture into data/travis_like/.

Deterministic: rerunning produces identical files. Every number here is
invented for desk-scale experiments; none of it is real utility data.
"""
import csv
import json
import math
import os
import random

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data", "travis_like")
rng = random.Random(20250101)

CENTER = (30.27, -97.74)

# Load buses: id, zip, base MW, offset from the city centre in degrees.
LOAD_BUSES = [
    (101, "78701", 420.0, (0.00, 0.00)),
    (102, "78702", 360.0, (0.01, 0.04)),
    (103, "78703", 330.0, (0.02, -0.04)),
    (104, "78704", 380.0, (-0.04, -0.01)),
    (105, "78705", 300.0, (0.05, 0.00)),
    (106, "78723", 310.0, (0.07, 0.05)),
    (107, "78745", 340.0, (-0.09, -0.03)),
    (108, "78758", 260.0, (0.14, 0.01)),
]

# Generator buses sit well outside the city so zips map onto load buses.
GEN_BUSES = [
    (1, "slack", 1.03, (0.40, -0.40)),
    (10, "pv", 1.03, (-0.45, 0.35)),
    (172, "pv", 1.03, (0.45, 0.45)),
    (20, "pv", 1.03, (-0.50, -0.45)),
    (30, "pv", 1.03, (-0.60, 0.10)),
    (40, "pv", 1.03, (0.60, 0.00)),
]

# id, bus, pmax, fuel, c1, c2
GENERATORS = [
    (1, 1, 400.0, "natural_gas", 28.0, 0.004),
    (11, 10, 500.0, "natural_gas", 24.0, 0.003),
    (12, 10, 430.0, "natural_gas", 25.0, 0.003),
    (21, 172, 339.0, "natural_gas", 26.0, 0.004),
    (22, 172, 300.0, "natural_gas", 27.0, 0.004),
    (31, 20, 600.0, "coal", 20.0, 0.002),
    (41, 30, 430.0, "nuclear", 8.0, 0.0),
    (51, 40, 200.0, "natural_gas", 32.0, 0.005),
]

# from, to, x
BRANCHES = [
    (1, 105, 0.006), (1, 108, 0.008), (1, 172, 0.010),
    (10, 104, 0.006), (10, 107, 0.008), (10, 102, 0.010),
    (172, 106, 0.006), (172, 102, 0.008),
    (20, 107, 0.006), (20, 103, 0.008),
    (30, 103, 0.006), (30, 104, 0.008),
    (40, 108, 0.006), (40, 106, 0.008),
    (101, 102, 0.004), (101, 103, 0.004), (101, 104, 0.004), (101, 105, 0.004),
    (102, 106, 0.005), (103, 105, 0.005), (104, 107, 0.005), (105, 108, 0.005),
    (106, 108, 0.006), (103, 107, 0.006),
]


def write_case():
    buses = []
    for bid, role, vset, (dlat, dlon) in GEN_BUSES:
        buses.append({"id": bid, "role": role, "vset": vset,
                      "lat": round(CENTER[0] + dlat, 5), "lon": round(CENTER[1] + dlon, 5)})
    for bid, zp, _, (dlat, dlon) in LOAD_BUSES:
        buses.append({"id": bid, "role": "pq",
                      "lat": round(CENTER[0] + dlat, 5), "lon": round(CENTER[1] + dlon, 5), "zip": zp})
    branches = [{"from": f, "to": t, "r": round(x / 10, 6), "x": x, "b": 0.0, "rating": 2500.0}
                for f, t, x in BRANCHES]
    gens = [{"id": gid, "bus": bus, "pmin": 0.0, "pmax": pmax, "qmin": -0.8 * pmax, "qmax": 0.8 * pmax,
             "c0": 0.0, "c1": c1, "c2": c2, "fuel": fuel}
            for gid, bus, pmax, fuel, c1, c2 in GENERATORS]
    loads = [{"id": i + 1, "bus": bid, "p": p, "q": round(p * 0.15, 3)}
             for i, (bid, _, p, _) in enumerate(LOAD_BUSES)]
    case = {"base_mva": 100.0, "buses": buses, "branches": branches, "generators": gens, "loads": loads}
    with open(os.path.join(OUT, "case.json"), "w") as f:
        json.dump(case, f, indent=1)
        f.write("\n")


def write_scenarios():
    scenarios = [
        {"name": "Scenario 1", "generator_ids": [11, 12], "expected_capacity_removed_mw": 930.0},
        {"name": "Scenario 2", "generator_ids": [21, 22], "expected_capacity_removed_mw": 639.0},
        {"name": "Scenario 3", "generator_ids": [11, 12, 21, 22], "expected_capacity_removed_mw": 1569.0},
    ]
    with open(os.path.join(OUT, "scenarios.json"), "w") as f:
        json.dump(scenarios, f, indent=1)
        f.write("\n")


def write_centroids():
    with open(os.path.join(OUT, "zip_centroids.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["zip", "lat", "lon"])
        for _, zp, _, (dlat, dlon) in LOAD_BUSES:
            w.writerow([zp, round(CENTER[0] + dlat + rng.uniform(-0.004, 0.004), 5),
                        round(CENTER[1] + dlon + rng.uniform(-0.004, 0.004), 5)])


MODELS = [  # make, model, usable kWh, phev
    ("Tesla", "Model 3", 82.0, 0), ("Tesla", "Model Y", 75.0, 0), ("Tesla", "Model S", 95.0, 0),
    ("Chevrolet", "Bolt", 65.0, 0), ("Nissan", "Leaf", 40.0, 0), ("Ford", "Mustang Mach-E", 88.0, 0),
    ("Rivian", "R1S", 128.0, 0), ("Ford", "F-150 Lightning", 131.0, 0),
    ("Toyota", "RAV4 Prime", 18.0, 1), ("Chrysler", "Pacifica Hybrid", 16.0, 1), ("BMW", "330e", 12.0, 1),
]
# Illustrative mix: 25% PHEV, and the long-range BEVs (>= 84 kWh) just over half.
MODEL_WEIGHTS = [0.07, 0.08, 0.17, 0.05, 0.03, 0.15, 0.10, 0.10, 0.10, 0.08, 0.07]


def write_registrations_and_params():
    populations = {}
    with open(os.path.join(OUT, "registrations.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["zip", "make", "model", "count", "usable_kwh", "is_phev"])
        for _, zp, p, _ in LOAD_BUSES:
            pop = int(round(p * 400 + rng.uniform(-5000, 5000)))
            populations[zp] = pop
            evs = pop * 0.8 * rng.uniform(0.035, 0.045)
            for (make, model, kwh, phev), wt in zip(MODELS, MODEL_WEIGHTS):
                w.writerow([zp, make, model, int(round(evs * wt)), kwh, phev])
    years = range(2026, 2041)
    params = {
        "vehicle_lifetime": 15,
        "ownership_rate": 0.8,
        "incentive_multiplier": 1.2,
        "initial_ev_share": 0.10,
        "population_growth": {str(y): 0.02 for y in years},
        "base_share_growth": {str(y): 0.17 for y in years},
        "zip_population": populations,
    }
    with open(os.path.join(OUT, "fleet_params.json"), "w") as f:
        json.dump(params, f, indent=1)
        f.write("\n")


INCOMES = [15000, 35000, 62500, 87500, 125000, 175000]


def person(zip_bias=0.0):
    age = rng.randint(18, 80)
    sex = rng.choice(["male", "female"])
    income = rng.choice(INCOMES)
    edu = rng.randint(1, 5)
    return age, sex, income, edu


def willingness_raw(age, sex, income, edu):
    return (3.0 - 0.025 * (age - 45) + 0.15 * (sex == "female") + 0.006 * (income / 1000 - 80)
            + 0.25 * (edu - 3))


def write_survey_and_population():
    with open(os.path.join(OUT, "survey.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["respondent_id", "age", "sex", "income_bracket_midpoint", "education_level", "willingness"])
        for i in range(500):
            age, sex, income, edu = person()
            raw = willingness_raw(age, sex, income, edu) + rng.gauss(0.0, 0.6)
            likert = min(5, max(1, int(math.floor(raw + 0.5))))
            w.writerow([i + 1, age, sex, income, edu, likert])
    with open(os.path.join(OUT, "population.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["zip", "age", "sex", "income_bracket_midpoint", "education_level"])
        for _, zp, _, _ in LOAD_BUSES:
            for _ in range(200):
                age, sex, income, edu = person()
                w.writerow([zp, age, sex, income, edu])


def write_config():
    config = {
        "case": "case.json",
        "scenarios": "scenarios.json",
        "registrations": "registrations.csv",
        "population": "population.csv",
        "survey": "survey.csv",
        "zip_centroids": "zip_centroids.csv",
        "fleet_params": "fleet_params.json",
        "target_peak_mw": 3000.0,
        "base_year": 2025,
        "years": [2025, 2030, 2035, 2040],
        "power_per_vehicle_kw": 7.0,
        "holdout_fraction": 0.2,
        "seed": 42,
        "format": "csv",
        "endurance_horizon_h": 24.0,
        "endurance_step_h": 0.25,
    }
    with open(os.path.join(OUT, "config.json"), "w") as f:
        json.dump(config, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    os.makedirs(OUT, exist_ok=True)
    write_case()
    write_scenarios()
    write_centroids()
    write_registrations_and_params()
    write_survey_and_population()
    write_config()
