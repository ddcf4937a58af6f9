"""
The same pipeline from the command line
=======================================

Every step writes its output plus a ``.manifest.json`` with the arguments,
seeds and timings. The calls below are what a shell session would run.
"""
import json
import tempfile
from pathlib import Path

from hazboost.cli import main

d = Path(tempfile.mkdtemp())
steps = [
    ["simulate", "--hazard", "1", "--subjects", "1000", "--seed", "1", "--out", d / "train.csv"],
    ["simulate", "--hazard", "1", "--subjects", "1000", "--seed", "2", "--out", d / "test.csv"],
    ["preprocess", d / "train.csv", "--out", d / "train.hzb"],
    ["tune", d / "train.hzb", "--depths", "1,2,3", "--rounds", "50,100", "--folds", "3",
     "--best-config", d / "best.json", "--out", d / "cv.csv"],
    ["train", d / "train.hzb", "--config", d / "best.json", "--out", d / "model.txt"],
    ["importance", d / "model.txt"],
    ["evaluate", d / "model.txt", d / "test.csv", "--truth", d / "test.csv.truth.json"],
]
for args in steps:
    print("$ hazboost", " ".join(str(a) for a in args))
    assert main([str(a) for a in args]) == 0

manifest = json.loads((d / "model.txt.manifest.json").read_text())
print("fit took %.2fs" % manifest["timings"]["fit"])
