"""Shared function corpus for the tests."""
from bergman_lab.analytic import AnalyticFunction, ZeroSequence


def _z(*pts):
    return ZeroSequence.from_points(pts)


CORPUS = {
    "one": AnalyticFunction.polynomial([1.0]),
    "z": AnalyticFunction.polynomial([0.0, 1.0]),
    "blaschke_half": AnalyticFunction.blaschke([0.5]),
    "blaschke_pair": AnalyticFunction.blaschke([0.3 + 0.4j, -0.6]),
    "poly_zero_off": AnalyticFunction(poly=(2.0, 0.5), zeros=_z(0.45j)),
    "double_zero": AnalyticFunction(zeros=ZeroSequence.from_pairs([(0.2 - 0.5j, 2)]),
                                    exp_poly=(0.0, 0.3)),
    "three_zeros": AnalyticFunction(poly=(1.0, -0.25), zeros=_z(0.7, -0.35 + 0.55j, 0.1j)),
    "exp_factor": AnalyticFunction(zeros=_z(-0.4 - 0.3j), exp_poly=(0.1, 0.0, 0.4)),
    "four_zeros": AnalyticFunction.blaschke([0.6j, -0.6j, 0.25, -0.8]),
    "quadratic": AnalyticFunction.polynomial([0.3, -1.0, 0.5]),
}
