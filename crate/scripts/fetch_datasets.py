#!/usr/bin/env python3
"""Fetch the three public healthcare datasets used by the benchmark.

The files are not redistributed with this repository. This script pulls them
from widely mirrored Python packages and writes plain CSV files into ./data:

  breast_cancer.csv  Wisconsin Diagnostic Breast Cancer (569 rows, diagnosis M/B)
  diabetes.csv       Pima Indians Diabetes (768 rows, Outcome 0/1)
  heart.csv          Cleveland Heart Disease (303 rows, target 0/1, '?' marks missing)

Sources:
  - WDBC:  scikit-learn's bundled sklearn/datasets/data/breast_cancer.csv
  - Pima:  the `imbalanced-databases` wheel (original UCI row order)
  - Heart: the `orange3` wheel (Orange/datasets/heart_disease.tab), recoded to
           the UCI processed.cleveland numeric convention.
"""
import argparse
import csv
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

WDBC_FEATURES = [
    f"{m}_{s}"
    for s in ("mean", "se", "worst")
    for m in (
        "radius", "texture", "perimeter", "area", "smoothness", "compactness",
        "concavity", "concave_points", "symmetry", "fractal_dimension",
    )
]

PIMA_HEADER = [
    "Pregnancies", "Glucose", "BloodPressure", "SkinThickness", "Insulin",
    "BMI", "DiabetesPedigreeFunction", "Age", "Outcome",
]

HEART_HEADER = [
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg", "thalach",
    "exang", "oldpeak", "slope", "ca", "thal", "target",
]

HEART_CODES = {
    "gender": {"male": "1", "female": "0"},
    "chest pain": {"typical ang": "1", "atypical ang": "2", "non-anginal": "3", "asymptomatic": "4"},
    "rest ECG": {"normal": "0", "ST-T abnormal": "1", "left vent hypertrophy": "2"},
    "slope peak exc ST": {"upsloping": "1", "flat": "2", "downsloping": "3"},
    "thal": {"normal": "3", "fixed defect": "6", "reversable defect": "7"},
}


def wheel(package, workdir):
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", workdir, package],
        check=True,
    )
    stem = package.replace("-", "_").lower()
    hits = [p for p in glob.glob(os.path.join(workdir, "*.whl")) if os.path.basename(p).lower().startswith(stem)]
    if not hits:
        raise SystemExit(f"no wheel found for {package}")
    return zipfile.ZipFile(hits[0])


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"wrote {path} ({len(rows)} rows)")


def breast_cancer(out):
    import sklearn

    src = os.path.join(os.path.dirname(sklearn.__file__), "datasets", "data", "breast_cancer.csv")
    with open(src) as fh:
        lines = list(csv.reader(fh))[1:]
    rows = []
    for r in lines:
        # sklearn codes malignant as 0
        rows.append(["M" if r[-1] == "0" else "B"] + r[:-1])
    write_csv(os.path.join(out, "breast_cancer.csv"), ["diagnosis"] + WDBC_FEATURES, rows)


def diabetes(out, workdir):
    z = wheel("imbalanced-databases", workdir)
    text = z.read("imbalanced_databases/data/pima/pima.dat").decode()
    rows = []
    for line in text.splitlines():
        if not line or line.startswith("@"):
            continue
        f = line.split(",")
        rows.append(f[:-1] + ["1" if f[-1].strip() == "positive" else "0"])
    write_csv(os.path.join(out, "diabetes.csv"), PIMA_HEADER, rows)


def heart(out, workdir):
    z = wheel("orange3", workdir)
    text = z.read("Orange/datasets/heart_disease.tab").decode()
    lines = text.splitlines()
    names = lines[0].split("\t")
    rows = []
    for line in lines[3:]:
        if not line.strip():
            continue
        cells = line.split("\t")
        rec = []
        for name, v in zip(names, cells):
            v = v.strip()
            if v in ("", "?"):
                rec.append("?")
            elif name in HEART_CODES:
                rec.append(HEART_CODES[name][v])
            else:
                rec.append(v)
        rows.append(rec)
    write_csv(os.path.join(out, "heart.csv"), HEART_HEADER, rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        breast_cancer(args.out)
        diabetes(args.out, tmp)
        heart(args.out, tmp)


if __name__ == "__main__":
    main()
