"""Run the CLI once per output kind and validate every document against the
shipped schemas; shipped configs are checked against the config schema.

Usage: validate_outputs.py <svre-binary> <source-dir>
"""
import json
import pathlib
import subprocess
import sys
import tempfile

from jsonschema import Draft202012Validator

cli, src = str(pathlib.Path(sys.argv[1]).resolve()), pathlib.Path(sys.argv[2])
output_schema = json.loads((src / "schemas" / "output-1.0.0.schema.json").read_text())
config_schema = json.loads((src / "schemas" / "config-1.0.0.schema.json").read_text())
Draft202012Validator.check_schema(output_schema)
Draft202012Validator.check_schema(config_schema)
out_v = Draft202012Validator(output_schema)
cfg_v = Draft202012Validator(config_schema)

failures = 0


def check(validator, doc, label):
    global failures
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
    for e in errors:
        print(f"FAIL {label}: {'/'.join(map(str, e.path))}: {e.message}")
    failures += bool(errors)
    if not errors:
        print(f"ok   {label}")


for path in sorted((src / "configs").glob("*.json")):
    check(cfg_v, json.loads(path.read_text()), f"config {path.name}")

cases = {
    "estimate": ({"problem": {"id": "linear", "d": 4, "beta": 3.0}, "svre": {"n": 200, "n_grad": 10}},
                 ["run"], 0),
    "estimate_max_iter": ({"problem": {"id": "quadratic", "d": 2},
                           "svre": {"n": 100, "n_grad": 10, "t_max": 2, "delta_thresh": 1e-6},
                           "transport": {"normalization": "rmsprop", "base_rate": 0.1}}, ["run"], 3),
    "estimate_aborted": ({"problem": {"id": "fourbranch"}, "svre": {"n": 200, "n_grad": 50, "seed": 1},
                          "kernel": {"strategy": "median"},
                          "transport": {"normalization": "rmsprop", "base_rate": 0.25}}, ["run"], 2),
    "benchmark": ({"problem": {"id": "linear", "d": 4, "beta": 3.0}, "svre": {"n": 200, "n_grad": 10},
                   "bench": {"runs": 4}}, ["bench", "--threads", "1"], 0),
    "oracle": ({"problem": {"id": "fourbranch", "gamma": 2.0},
                "oracle": {"method": "mixture_is", "n_samples": 20000}}, ["oracle"], 0),
    "gradcheck": ({"problem": {"id": "darcy", "grid_m": 129}}, ["gradcheck"], 0),
}

with tempfile.TemporaryDirectory() as tmp:
    tmp = pathlib.Path(tmp)
    for name, (config, args, expected_code) in cases.items():
        check(cfg_v, config, f"config {name}")
        cfg_path = tmp / f"{name}.json"
        cfg_path.write_text(json.dumps(config))
        out_path = tmp / f"{name}.out.json"
        proc = subprocess.run([cli, args[0], "--config", str(cfg_path), "--out", str(out_path), *args[1:]],
                              cwd=tmp, capture_output=True, text=True)
        if proc.returncode != expected_code:
            print(f"FAIL {name}: exit {proc.returncode}, expected {expected_code}: {proc.stderr.strip()}")
            failures += 1
            continue
        check(out_v, json.loads(out_path.read_text()), f"output {name}")

print(f"{failures} failure(s)")
sys.exit(1 if failures else 0)
