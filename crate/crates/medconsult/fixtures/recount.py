#!/usr/bin/env python3
"""Recount entity rows of a graph directory and print a manifest.

Independent of the Rust loader on purpose: the manifest it writes is what
the loader is checked against.

    python3 recount.py kg > kg/manifest.json
"""
import csv
import json
import sys
from pathlib import Path

TABLES = {
    "Symptom": "symptoms.csv",
    "Examination": "examinations.csv",
    "Drug": "drugs.csv",
    "Food": "foods.csv",
    "Department": "departments.csv",
    "Disease": "diseases.csv",
}


def rows(path):
    with open(path, newline="", encoding="utf-8") as f:
        return [r for r in csv.DictReader(f) if any((v or "").strip() for v in r.values())]


def main(directory):
    root = Path(directory)
    counts = {kind: len(rows(root / name)) for kind, name in TABLES.items()}
    counts["Image"] = sum(
        len([u for u in (r.get("image_uris") or "").split("|") if u.strip()]) for r in rows(root / "drugs.csv")
    )
    json.dump(dict(sorted(counts.items())), sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else ".")
