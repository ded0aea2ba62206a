"""Fitted parameter tables and initial conditions for the two case studies.

Germany runs in days, Cameroon in months. Lambda is mu times the initial
total population in both tables.
"""
import math

from .model import CompartmentState, Parameters

GERMANY_POPULATION = 83_900_473
GERMANY_MU = 1.0 / (81.72 * 365.0)

GERMANY = Parameters(
    lambda_rec=GERMANY_POPULATION * GERMANY_MU,
    mu=GERMANY_MU,
    beta=0.92429,
    eta=0.35625,
    phi1=0.52,
    phi2=0.00062,
    c1=0.77,
    c2=0.18564,
    r1=0.02534,
    p=0.2,
    a1=0.34949,
    gamma=0.01729,
    sigma=0.1428,
    theta=0.557148,
    delta=0.0018,
)

GERMANY_INITIAL = CompartmentState(
    s=83674478.0, v=49939.0, e=22924.0, a=22920.0, i=32552.0, r=97660.0
)

CAMEROON_POPULATION = 30_000_000
CAMEROON_MU = 1.0 / (60.0 * 12.0)

CAMEROON = Parameters(
    lambda_rec=CAMEROON_POPULATION * CAMEROON_MU,
    mu=CAMEROON_MU,
    beta=0.399092568990682,
    eta=0.004502832608954,
    phi1=0.52,
    phi2=0.000583942451446,
    c1=0.77,
    c2=0.000000000008747,
    r1=0.061216305968569,
    p=0.8262,
    a1=0.000000000000092,
    gamma=0.869896361913556,
    sigma=0.1428,
    theta=0.386526046062348,
    delta=0.0018,
)

CAMEROON_INITIAL = CompartmentState(
    s=29982802.0, v=0.0, e=6679.0, a=0.0, i=10519.0, r=0.0
)

# free-parameter set fitted in both case studies
FREE_PARAMETERS = ("beta", "phi2", "r1", "a1", "c2", "eta", "theta", "gamma")

PRESETS = {
    "germany": {"parameters": GERMANY, "initial": GERMANY_INITIAL, "time_unit": "day"},
    "cameroon": {"parameters": CAMEROON, "initial": CAMEROON_INITIAL, "time_unit": "month"},
}

# seasonal beta used in the oscillating scenarios
OSCILLATION_ALPHA = 0.0228
OSCILLATION_PHASE = math.pi / 6.0
OSCILLATION_PERIOD = 12.0
