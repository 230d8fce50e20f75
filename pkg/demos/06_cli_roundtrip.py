"""Drive the command-line tool end to end in a scratch directory.

gen-data writes a synthetic NDJSON dataset, train fits a small model from
configs/train_small.json, decode runs joint beam search and eval scores the
output. Each command prints one JSON line.
"""
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

here = Path(__file__).parent / "configs"
work = Path(tempfile.mkdtemp(prefix="duodec-demo-"))
for name in ("train_small.json", "task_small.json"):
    shutil.copy(here / name, work / name)


def duodec(*args):
    cmd = [sys.executable, "-m", "duodec.cli", *map(str, args)]
    print("$ duodec", " ".join(map(str, args)))
    proc = subprocess.run(cmd, capture_output=True, text=True)
    print(proc.stdout.strip() or proc.stderr.strip())
    return proc.returncode


duodec("gen-data", "--spec", work / "task_small.json", "--out", work / "test.ndjson", "--count", 20, "--seed", 1)
duodec("train", "--config", work / "train_small.json")
duodec("decode", "--checkpoint", work / "small.ckpt", "--input", work / "test.ndjson", "--beam", 4,
       "--penalty", 0.5, "--max-len", 10, "--output", work / "hyp.ndjson")
duodec("eval", "--ref", work / "test.ndjson", "--hyp", work / "hyp.ndjson")
code = duodec("decode", "--checkpoint", work / "missing.ckpt", "--input", work / "test.ndjson")
print("exit code for a missing checkpoint:", code)
print("files left in", work)
