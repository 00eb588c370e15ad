"""Smoke test for the symcl Python extension.

Build and install the module first, for example with
`maturin develop -m crates/python/Cargo.toml`, then run
`python python/smoke_test.py`.
"""

import json
import math

import symcl


def main():
    coords, data = symcl.simulate(3, 300, (300.0, 0.0, 300.0), seed=2024)
    assert len(coords) == 3 and len(data) == 300 and len(data[0]) == 3

    whole = symcl.HistogramSeries.aggregate(data, bins=20, t=1)
    split = symcl.HistogramSeries.aggregate(data, bins=20, t=10)
    assert len(whole) == 1 and len(split) == 10
    assert whole.total == split.total == 300

    again = symcl.HistogramSeries.from_json(split.to_json())
    assert again.counts(3) == split.counts(3)

    fit = symcl.fit(whole, coords)
    fit_split = symcl.fit(split, coords)
    assert fit.converged
    assert fit.theta_hat == fit_split.theta_hat
    assert fit.names == ["sigma11", "sigma12", "sigma22", "mu", "sigma", "xi"]

    with_se = symcl.variance(fit, split, coords)
    assert all(se > 0 for se in with_se.std_errors)
    assert json.loads(with_se.to_json())["std_errors"] == with_se.std_errors

    levels = fit.return_levels(coords, 95.0)
    assert len(levels) == 3 and all(math.isfinite(v) for v in levels)

    assert abs(symcl.bivariate_normal_cdf(0.0, 0.0, 0.5) - 1.0 / 3.0) < 1e-12
    assert symcl.count_terms(936, 105)["classic"] == 5110560
    assert symcl.count_terms(936, 105, bins=25)["symbolic_max"] == 3412500
    p = symcl.smith_cdf([1.0, 1.0], [0, 1], (300.0, 0.0, 300.0), coords)
    assert 0.0 < p < 1.0

    try:
        symcl.HistogramSeries.aggregate([[1.0, float("nan")]], bins=2)
    except symcl.SymclError:
        pass
    else:
        raise AssertionError("non-finite data accepted")

    print("symcl", symcl.__version__, "smoke test passed:", fit)


if __name__ == "__main__":
    main()
