"""Synthetic tabular data with planted weak regions.

Features are driven by two latent factors so that they are correlated with
one another; permuting a column breaks those correlations and moves rows in
and out of two-feature slices. Misclassifications are rare in general and
concentrated in a few planted regions, each defined by two features.
"""
from __future__ import annotations

import numpy as np

from ._random import make_rng
from .data_model import CATEGORICAL, NUMERIC, Dataset, Feature, FeatureSchema

REGIONS = ("north", "south", "east", "west", "central")
EDUCATION = ("primary", "secondary", "bachelor", "graduate")
SECTORS = ("public", "private", "self")

SCHEMA = FeatureSchema(
    features=(
        Feature("age", NUMERIC),
        Feature("income", NUMERIC),
        Feature("hours", NUMERIC),
        Feature("score", NUMERIC),
        Feature("tenure", NUMERIC),
        Feature("debt", NUMERIC),
        Feature("noise", NUMERIC),
        Feature("region", CATEGORICAL),
        Feature("education", CATEGORICAL),
        Feature("sector", CATEGORICAL),
    ),
    indicator="misclassified",
    categories={"region": REGIONS, "education": EDUCATION, "sector": SECTORS},
)


def _bucket(x, cuts):
    return np.searchsorted(np.asarray(cuts), x).astype(np.int64)


def make_synthetic(n=10_000, seed=0, base_logit=-3.45, coupling=1.0, name="synthetic"):
    """Draw ``n`` rows; with the default ``base_logit`` the error rate is about 0.15.

    ``coupling`` scales how strongly the features follow the shared latent
    factors relative to their independent noise.
    """
    rng = make_rng(seed)
    z = coupling * rng.standard_normal(n)
    w = coupling * rng.standard_normal(n)

    def noise(scale=1.0):
        return scale * rng.standard_normal(n)

    age = np.round(40 + 12 * (0.85 * z + 0.5 * noise()), 0)
    income = np.round(50 + 15 * (0.75 * z + 0.35 * w + 0.55 * noise()), 1)
    hours = np.round(40 + 8 * (0.8 * w + 0.6 * noise()), 0)
    score = 0.7 * w - 0.5 * z + 0.5 * noise()
    tenure = np.round(np.maximum(0.0, 8 + 4 * (0.6 * z + 0.6 * w + 0.5 * noise())), 1)
    debt = np.round(20 + 10 * (-0.6 * w + 0.4 * z + 0.7 * noise()), 1)
    junk = noise()
    region = _bucket(0.9 * z + 0.45 * noise(), [-1.0, -0.3, 0.3, 1.0])
    education = _bucket(0.8 * w + 0.3 * z + 0.5 * noise(), [-0.8, 0.2, 1.0])
    sector = _bucket(0.7 * w - 0.6 * z + 0.6 * noise(), [-0.5, 0.6])

    logit = np.full(n, base_logit)
    logit += 3.4 * ((age > 50) & (hours < 38))
    logit += 3.0 * ((education == 0) & (income < 45))
    logit += 2.8 * ((score > 0.9) & (region == 1))
    logit += 2.6 * ((tenure > 11) & (sector == 2))
    theta = rng.random(n) < 1.0 / (1.0 + np.exp(-logit))

    columns = {
        "age": age,
        "income": income,
        "hours": hours,
        "score": score,
        "tenure": tenure,
        "debt": debt,
        "noise": junk,
        "region": region,
        "education": education,
        "sector": sector,
    }
    return Dataset(SCHEMA, columns, theta, name=name)
