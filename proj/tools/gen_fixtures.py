#!/usr/bin/env python3
"""Writes the 200-row ingestion fixtures under tests/fixtures.

Rows are synthetic. The first rows of every file cycle through all sensitive
attribute combinations, so each fixture realizes the schema's full T.
Output is deterministic.
"""

import csv
import itertools
import random
from pathlib import Path

ROWS = 200
OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

CANDC_PREDICTIVE = """population householdsize racepctblack racePctWhite racePctAsian racePctHisp
agePct12t21 agePct12t29 agePct16t24 agePct65up numbUrban pctUrban medIncome pctWWage pctWFarmSelf
pctWInvInc pctWSocSec pctWPubAsst pctWRetire medFamInc perCapInc whitePerCap blackPerCap
indianPerCap AsianPerCap OtherPerCap HispPerCap NumUnderPov PctPopUnderPov PctLess9thGrade
PctNotHSGrad PctBSorMore PctUnemployed PctEmploy PctEmplManu PctEmplProfServ PctOccupManu
PctOccupMgmtProf MalePctDivorce MalePctNevMarr FemalePctDiv TotalPctDiv PersPerFam PctFam2Par
PctKids2Par PctYoungKids2Par PctTeen2Par PctWorkMomYoungKids PctWorkMom NumIlleg PctIlleg
NumImmig PctImmigRecent PctImmigRec5 PctImmigRec8 PctImmigRec10 PctRecentImmig PctRecImmig5
PctRecImmig8 PctRecImmig10 PctSpeakEnglOnly PctNotSpeakEnglWell PctLargHouseFam
PctLargHouseOccup PersPerOccupHous PersPerOwnOccHous PersPerRentOccHous PctPersOwnOccup
PctPersDenseHous PctHousLess3BR MedNumBR HousVacant PctHousOccup PctHousOwnOcc
PctVacantBoarded PctVacMore6Mos MedYrHousBuilt PctHousNoPhone PctWOFullPlumb OwnOccLowQuart
OwnOccMedVal OwnOccHiQuart RentLowQ RentMedian RentHighQ MedRent MedRentPctHousInc
MedOwnCostPctInc MedOwnCostPctIncNoMtg NumInShelters NumStreet PctForeignBorn
PctBornSameState PctSameHouse85 PctSameCity85 PctSameState85 LemasSwornFT LemasSwFTPerPop
LemasSwFTFieldOps LemasSwFTFieldPerPop LemasTotalReq LemasTotReqPerPop PolicReqPerOffic
PolicPerPop RacialMatchCommPol PctPolicWhite PctPolicBlack PctPolicHisp PctPolicAsian
PctPolicMinor OfficAssgnDrugUnits NumKindsDrugsSeiz PolicAveOTWorked LandArea PopDens
PctUsePubTrans PolicCars PolicOperBudg LemasPctPolicOnPatr LemasGangUnitDeploy
LemasPctOfficDrugUn PolicBudgPerPop""".split()

LEMAS_MISSING = set("""LemasSwornFT LemasSwFTPerPop LemasSwFTFieldOps LemasSwFTFieldPerPop
LemasTotalReq LemasTotReqPerPop PolicReqPerOffic PolicPerPop RacialMatchCommPol PctPolicWhite
PctPolicBlack PctPolicHisp PctPolicAsian PctPolicMinor OfficAssgnDrugUnits NumKindsDrugsSeiz
PolicAveOTWorked PolicCars PolicOperBudg LemasPctPolicOnPatr LemasGangUnitDeploy
PolicBudgPerPop""".split())

RACE_PCT = ["racepctblack", "racePctWhite", "racePctAsian", "racePctHisp"]


def write(name, header, rows):
    OUT.mkdir(parents=True, exist_ok=True)
    with open(OUT / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def age_in(rng, band):
    return {0: rng.randint(18, 24), 1: rng.randint(25, 45), 2: rng.randint(46, 75)}[band]


def candc(rng):
    assert len(CANDC_PREDICTIVE) == 122
    header = ["state", "county", "community", "communityname", "fold"] + CANDC_PREDICTIVE + [
        "ViolentCrimesPerPop"]
    combos = list(itertools.product([0, 1], repeat=4))
    rows = []
    for i in range(ROWS):
        bits = combos[i % len(combos)]
        row = [str(rng.randint(1, 56)), "?", "?", f"Town{i}city", str(i % 10 + 1)]
        for c in CANDC_PREDICTIVE:
            if c in RACE_PCT:
                high = bits[RACE_PCT.index(c)]
                v = rng.uniform(0.2, 1.0) if high else rng.uniform(0.0, 0.19)
                row.append(f"{v:.2f}")
            elif c in LEMAS_MISSING:
                row.append("?" if i % 6 else f"{rng.random():.2f}")
            elif c == "OtherPerCap" and i == 7:
                row.append("?")
            else:
                row.append(f"{rng.random():.2f}")
        row.append(f"{rng.random():.2f}")
        rows.append(row)
    write("candc_200.csv", header, rows)


def income(rng):
    header = ["age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
              "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
              "hours-per-week", "native-country", "income"]
    races = ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo", "Other"]
    combos = list(itertools.product(range(5), range(3), range(2)))
    rows = []
    for i in range(ROWS):
        r, a, s = combos[i % len(combos)]
        rows.append([
            str(age_in(rng, a)),
            rng.choice(["Private", "Self-emp-not-inc", "Local-gov", "?"]),
            str(rng.randint(20000, 500000)),
            rng.choice(["Bachelors", "HS-grad", "Masters", "Some-college"]),
            str(rng.randint(5, 16)),
            rng.choice(["Never-married", "Married-civ-spouse", "Divorced"]),
            rng.choice(["Tech-support", "Sales", "Exec-managerial", "Craft-repair", "?"]),
            rng.choice(["Husband", "Wife", "Own-child", "Not-in-family"]),
            races[r],
            ["Male", "Female"][s],
            str(rng.choice([0, 0, 0, 2174, 14084])),
            str(rng.choice([0, 0, 0, 1902])),
            str(rng.randint(10, 60)),
            rng.choice(["United-States", "Mexico", "India", "?"]),
            rng.choice([">50K", "<=50K", "<=50K", "<=50K."]),
        ])
    write("income_200.csv", header, rows)


def german(rng):
    header = ["checking_status", "duration", "credit_history", "purpose", "credit_amount",
              "savings_status", "employment", "installment_commitment", "personal_status",
              "other_parties", "residence_since", "property_magnitude", "age",
              "other_payment_plans", "housing", "existing_credits", "job", "num_dependents",
              "own_telephone", "foreign_worker", "sex", "class"]
    combos = list(itertools.product(range(3), range(2)))
    rows = []
    for i in range(ROWS):
        a, s = combos[i % len(combos)]
        sex = ["male", "female"][s]
        rows.append([
            rng.choice(["A11", "A12", "A13", "A14"]),
            str(rng.randint(4, 72)),
            rng.choice(["A30", "A31", "A32", "A33", "A34"]),
            rng.choice(["A40", "A41", "A42", "A43", "A49"]),
            str(rng.randint(250, 18000)),
            rng.choice(["A61", "A62", "A63", "A64", "A65"]),
            rng.choice(["A71", "A72", "A73", "A74", "A75"]),
            str(rng.randint(1, 4)),
            rng.choice(["A91", "A93", "A94"]) if s == 0 else "A92",
            rng.choice(["A101", "A102", "A103"]),
            str(rng.randint(1, 4)),
            rng.choice(["A121", "A122", "A123", "A124"]),
            str(age_in(rng, a)),
            rng.choice(["A141", "A142", "A143"]),
            rng.choice(["A151", "A152", "A153"]),
            str(rng.randint(1, 4)),
            rng.choice(["A171", "A172", "A173", "A174"]),
            str(rng.randint(1, 2)),
            rng.choice(["A191", "A192"]),
            rng.choice(["A201", "A202"]),
            sex,
            rng.choice(["good", "good", "bad"]),
        ])
    write("german_200.csv", header, rows)


def compas5(rng):
    header = ["race", "sex", "age", "priors_count", "c_charge_degree", "two_year_recid"]
    races = ["African-American", "Caucasian", "Hispanic", "Asian", "Other"]
    combos = list(itertools.product(range(5), range(2), range(3)))
    rows = []
    for i in range(ROWS):
        r, s, a = combos[i % len(combos)]
        race = races[r]
        if race == "Other" and i % 60 >= 30:
            race = "Native American"  # folds into Other
        rows.append([race, ["Male", "Female"][s], str(age_in(rng, a)), str(rng.randint(0, 20)),
                     rng.choice(["F", "M"]), str(rng.randint(0, 1))])
    write("compas5_200.csv", header, rows)


def main():
    for i, gen in enumerate([candc, income, german, compas5]):
        gen(random.Random(1000 + i))


if __name__ == "__main__":
    main()
