"""Minimal gaia-eval endpoint for tests.

The metric is a fixed function of the architecture so results can be
checked exactly. The first argument picks a behaviour:

  normal          well-formed responses
  mismatch        responses carry the wrong id
  malformed-once  one garbage line before every response
  malformed-twice two garbage lines before every response
  remote-error    an error response for every request
  bad-handshake   wrong protocol name
  die             exit right after the handshake
"""

import json
import sys

mode = sys.argv[1] if len(sys.argv) > 1 else "normal"


def emit(obj):
    sys.stdout.write(json.dumps(obj) + "\n")
    sys.stdout.flush()


if mode == "bad-handshake":
    emit({"protocol": "other", "version": 1})
    sys.exit(0)
emit({"protocol": "gaia-eval", "version": 1})
if mode == "die":
    sys.exit(0)

FIDELITY_BONUS = {"direct": 0.0, "fast": 0.5, "full": 1.0}

for line in sys.stdin:
    line = line.strip()
    if not line:
        continue
    req = json.loads(line)
    arch = req["arch"]
    metric = sum(arch["depths"]) + sum(arch["widths"]) / 1000.0 + arch["scale"] / 100.0
    metric += FIDELITY_BONUS[req["fidelity"]]
    rid = req["id"] if mode != "mismatch" else req["id"] + "-x"
    if mode == "malformed-once":
        sys.stdout.write("not json\n")
    if mode == "malformed-twice":
        sys.stdout.write("not json\n{\n")
    if mode == "remote-error":
        emit({"id": rid, "error": "unknown task " + req["task"]})
        continue
    emit({"id": rid, "metric": metric, "metric_name": "AP", "cost_s": 0.25, "extra": [1, 2]})
