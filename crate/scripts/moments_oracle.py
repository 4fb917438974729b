#!/usr/bin/env python3
"""Independent check of the uniform-input moment formulas.

Mean and variance of each linear error bound are obtained by midpoint-rule
quadrature over X ~ U[-1, 1], the maximum deviation by a dense scan, and the
two concentration bounds are evaluated from those numbers. Prints a JSON
summary and exits non-zero unless both lower bounds match the expected values
to within 1e-3.
"""

import json
import math
import sys

EPS = 0.5
LOWER = (0.09, -0.45)  # coefficient, offset
UPPER = (0.03, 0.40)
EXPECTED = {"hoeffding": 0.139, "bernstein": 0.236}
N = 200_000


def quadrature_moments(coef, offset):
    h = 2.0 / N
    xs = [-1.0 + (i + 0.5) * h for i in range(N)]
    vals = [coef * x + offset for x in xs]
    mean = sum(vals) / N
    var = sum((v - mean) ** 2 for v in vals) / N
    max_dev = max(abs(v - mean) for v in [coef * -1.0 + offset, coef * 1.0 + offset] + vals)
    value_range = max(vals + [coef + offset, -coef + offset]) - min(vals + [coef + offset, -coef + offset])
    return mean, var, max_dev, value_range


def lower_cdf(mean, var, max_dev, value_range, method):
    t = EPS - mean
    if t < 0:
        return 0.0
    if method == "hoeffding":
        return 1.0 - math.exp(-2.0 * t * t / value_range**2)
    return 1.0 - math.exp(-t * t / (2.0 * var + 2.0 * max_dev * t / 3.0))


def main():
    mu_l, var_l, dev_l, rng_l = quadrature_moments(*LOWER)
    mu_u, var_u, dev_u, rng_u = quadrature_moments(*UPPER)
    result = {
        "upper": {"mean": mu_u, "var": var_u, "max_dev": dev_u},
        "lower": {"mean": mu_l, "var": var_l, "max_dev": dev_l},
    }
    ok = True
    for method, expected in EXPECTED.items():
        gamma = lower_cdf(mu_u, var_u, dev_u, rng_u, method) + lower_cdf(-mu_l, var_l, dev_l, rng_l, method) - 1.0
        gamma = min(max(gamma, 0.0), 1.0)
        result[method] = gamma
        ok &= abs(gamma - expected) <= 1e-3
    result["ok"] = ok
    print(json.dumps(result))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
