"""Drive the command-line tool end to end from Python (same as running it in a shell)."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

work = Path(tempfile.mkdtemp())


def cli(*args):
    proc = subprocess.run([sys.executable, "-m", "relaxed_mmot", *args],
                          capture_output=True, text=True)
    print("$ relaxed-mmot", " ".join(args), "->", proc.returncode)
    return proc


# %% a measure file and a potential file
(work / "rho.json").write_text(json.dumps(
    {"dim": 1, "atoms": [[-1.0], [0.0], [1.0]], "weights": [0.2, 0.3, 0.2]}))
(work / "V.json").write_text(json.dumps(
    {"points": [[0.0], [1.0]], "values": {"0": 2.0, "1": 2.0, "omega": 0.0}}))

# %% cost with certificate, then layers
out = json.loads(cli("cost", "--measure", str(work / "rho.json"), "--N", "2").stdout)
print("  primal", out["primal_value"], "dual", out["dual_value"])
out = json.loads(cli("stratify", "--measure", str(work / "rho.json")).stdout)
print("  layer masses", [l["mass"] for l in out["decomposition"]["layers"]])

# %% potential on a grid, trace written next to the output
cli("potential", "--measure", str(work / "rho.json"), "--grid", "-3,3;61",
    "--out", str(work / "pot.json"))
print("  trace rows:", len((work / "pot.trace.csv").read_text().splitlines()) - 1)

# %% charge sweep as CSV
proc = cli("quantize", "--potential", str(work / "V.json"), "--z-grid", "0.5:1.5:5",
           "--format", "csv")
print(proc.stdout)

# %% bad input exits with 1
cli("cost", "--measure", str(work / "missing.json"))
