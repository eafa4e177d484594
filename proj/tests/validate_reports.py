#!/usr/bin/env python3
"""Generates one report per paf_lab command and validates each against the schema."""
import argparse
import json
import os
import subprocess
import sys
import tempfile

import jsonschema


def run(cmd, env, allowed):
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True)
    if proc.returncode not in allowed:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"{' '.join(cmd)} exited {proc.returncode}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--binary", required=True)
    ap.add_argument("--schema", required=True)
    ap.add_argument("--config", required=True)
    ap.add_argument("--gradcheck-config", required=True)
    args = ap.parse_args()

    with open(args.schema) as f:
        schema = json.load(f)
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)

    env = dict(os.environ, SOURCE_DATE_EPOCH="1700000000")
    with tempfile.TemporaryDirectory() as tmp:
        ckpt = os.path.join(tmp, "model.ckpt")
        reports = {
            "train": os.path.join(tmp, "model.report.json"),
            "probe": os.path.join(tmp, "probe.report.json"),
            "bench": os.path.join(tmp, "bench.json"),
            "compare": os.path.join(tmp, "compare.json"),
            "grad-check": os.path.join(tmp, "gradcheck.json"),
        }
        b = args.binary
        run([b, "train", "--config", args.config, "--out", ckpt], env, {0})
        run([b, "probe", ckpt, "--out", os.path.join(tmp, "probe.csv")], env, {0})
        run([b, "bench", "--config", args.config, "--out", reports["bench"]], env, {0})
        run([b, "compare", "--config", args.config, "--out", reports["compare"]], env, {0, 5})
        run([b, "grad-check", "--config", args.gradcheck_config, "--out", reports["grad-check"]], env, {0})

        failed = False
        for command, path in reports.items():
            with open(path) as f:
                report = json.load(f)
            errors = sorted(validator.iter_errors(report), key=lambda e: list(e.path))
            if report.get("command") != command:
                errors.append(f"command is {report.get('command')!r}")
            for e in errors:
                failed = True
                where = "/".join(str(p) for p in getattr(e, "path", []))
                print(f"{command}: {where}: {getattr(e, 'message', e)}")
            print(f"{command}: {'ok' if not errors else 'INVALID'}")

        with open(reports["compare"]) as f:
            broken = json.load(f)
        broken["traces"] = broken["traces"][:2]
        if validator.is_valid(broken):
            failed = True
            print("compare with two traces was accepted")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
