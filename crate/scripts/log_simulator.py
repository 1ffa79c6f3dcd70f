#!/usr/bin/env python3
"""Example external simulator: the 1D log toy over the NDJSON stdio protocol."""
import json
import math
import sys

for line in sys.stdin:
    request = json.loads(line)
    x = request["x"][0]
    reply = {"id": request["id"], "y": [math.log(x), 0.5 * math.log(3 * x)]}
    sys.stdout.write(json.dumps(reply) + "\n")
    sys.stdout.flush()
