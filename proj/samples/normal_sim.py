#!/usr/bin/env python3
"""External simulator for `ifit fit --model exec:samples/normal_sim.py`.

theta = (mu, sigma); each call draws 200 normals and replies with their
mean, standard deviation and interquartile range.
"""
import json
import sys

import numpy as np

for line in sys.stdin:
    req = json.loads(line)
    mu, sigma = req["theta"]
    x = np.random.default_rng(req["seed"]).normal(mu, sigma, 200)
    q1, q3 = np.quantile(x, [0.25, 0.75])
    print(json.dumps({"t": [float(x.mean()), float(x.std(ddof=1)), float(q3 - q1)]}), flush=True)
