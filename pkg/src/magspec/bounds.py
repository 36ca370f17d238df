"""Closed-form eigenvalue and Cheeger estimates, checked against computed data.

Every checker returns a :class:`BoundReport` whose verdict is one of
``holds``, ``violated`` or ``not-applicable``.  Cheeger values entering a
check are upper bounds ``h_hat >= h`` from the candidate search, and the
``soundness`` field states what that means for the verdict.

Theorem ids are stable identifiers used by the command line and in JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cheeger import CheegerReport
from .eigensolve import Spectrum

LICHNEROWICZ = "Lichnerowicz-1.1"
BUSER_K = "Buser-k-1.2"
BUSER_1 = "Buser-1.3"
CHEEGER_A = "Cheeger-2.5a"
CHEEGER_B = "Cheeger-2.5b-report-only"
HIGHER_BUSER = "HigherBuser-6.2"
SHIGEKAWA = "Shigekawa"
QUADRATIC = "QuadraticIneq-5"

HOLDS, VIOLATED, NOT_APPLICABLE = "holds", "violated", "not-applicable"

TOL_REL = 0.02
TOL_ABS_BUSER = 1e-6
# eigenvalues that vanish in exact arithmetic come out at roundoff level
ZERO_TOL = 1e-9
CLOSED_FIELD_TOL = 1e-9
BUSER_CONST = 4.0 * math.e ** 2 / (math.e - 1.0) ** 2

SOUND_UPPER_H = ("rhs uses h_hat >= h; a violation is a genuine falsification, "
                 "a pass is evidence only")
SOUND_SPECTRAL = "both sides computed; tolerance absorbs discretization error"


@dataclass(eq=False)
class BoundReport:
    theorem: str
    inputs: dict
    lhs: object
    rhs: object
    margin: float
    verdict: str
    soundness: str
    tolerances: dict
    model_descriptor: str = ""
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theorem": self.theorem,
            "inputs": _plain(self.inputs),
            "lhs": _plain(self.lhs),
            "rhs": _plain(self.rhs),
            "margin": _plain(self.margin),
            "verdict": self.verdict,
            "soundness": self.soundness,
            "tolerances": _plain(self.tolerances),
            "model_descriptor": self.model_descriptor,
            "notes": list(self.notes),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_plain(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _lams(S, count):
    lam = np.asarray(S.eigenvalues if isinstance(S, Spectrum) else S, dtype=float)
    if lam.size < count:
        raise ValueError(f"need at least {count} eigenvalues, got {lam.size}")
    return lam


def _closed(dsup):
    return dsup <= CLOSED_FIELD_TOL


def lichnerowicz_bounds(K: float, dsup: float, n: int) -> dict:
    """Spectral window ``a_-, a_+`` and gap under a positive Ricci bound ``K``.

    Applicable iff ``dsup <= K / (1 + 2 sqrt((n-1)/n))``.  At the boundary of
    applicability the discriminant vanishes and ``a_- = a_+``.
    """
    if n < 2:
        raise ValueError("dimension n must be >= 2")
    if dsup < 0:
        raise ValueError("dsup must be nonnegative")
    r = math.sqrt((n - 1) / n)
    applicable = K > 0 and dsup <= K / (1.0 + 2.0 * r) * (1.0 + 1e-12)
    disc = (K - dsup) ** 2 - 4.0 * ((n - 1) / n) * dsup ** 2
    root = math.sqrt(max(disc, 0.0)) if applicable else float("nan")
    c = n / (2.0 * (n - 1))
    return {
        "a_minus": c * ((K - dsup) - root),
        "a_plus": c * ((K - dsup) + root),
        "gap": (n / (n - 1)) * root,
        "applicable": bool(applicable),
    }


def check_lichnerowicz(S, K: float, dsup: float, n: int, tol_rel: float = TOL_REL, *,
                       zero_tol: float = ZERO_TOL, model: str = "") -> BoundReport:
    lam = _lams(S, 2)
    inputs = {"K": K, "dsup": dsup, "n": n, "lambda": lam[:2].tolist()}
    tols = {"tol_rel": tol_rel, "zero_tol": zero_tol}
    if n < 2 or K <= 0:
        return BoundReport(LICHNEROWICZ, inputs, None, None, float("nan"), NOT_APPLICABLE,
                           "requires dimension >= 2 and a positive Ricci bound", tols, model)
    lb = lichnerowicz_bounds(K, dsup, n)
    if not lb["applicable"]:
        return BoundReport(LICHNEROWICZ, inputs, None, lb, float("nan"), NOT_APPLICABLE,
                           "hypothesis dsup <= K/(1+2sqrt((n-1)/n)) fails", tols, model)
    l1, l2 = lam[0], lam[1]
    lhs = {"lambda_1": l1, "lambda_2": l2, "gap": l2 - l1}
    rhs = {"a_minus": lb["a_minus"], "a_plus": lb["a_plus"], "gap": lb["gap"]}
    slack = [lb["a_minus"] - l1, l2 - lb["a_plus"], (l2 - l1) - lb["gap"]]
    ok = (l1 <= lb["a_minus"] * (1 + tol_rel) + zero_tol
          and l2 >= lb["a_plus"] * (1 - tol_rel) - zero_tol
          and l2 - l1 >= lb["gap"] * (1 - tol_rel) - zero_tol)
    return BoundReport(LICHNEROWICZ, inputs, lhs, rhs, float(min(slack)),
                       HOLDS if ok else VIOLATED, SOUND_SPECTRAL, tols, model)


def quadratic_value(lam1: float, K: float, dsup: float, n: int) -> float:
    return (1.0 - 1.0 / n) * lam1 ** 2 - (K - dsup) * lam1 + dsup ** 2


def check_quadratic_inequality(S, K: float, dsup: float, n: int, tol: float = TOL_REL, *,
                               model: str = "") -> BoundReport:
    """``(1-1/n) l^2 - (K-dsup) l + dsup^2 >= 0`` at the computed first eigenvalue."""
    lam = _lams(S, 1)
    inputs = {"K": K, "dsup": dsup, "n": n, "lambda_1": float(lam[0])}
    if n < 2 or K <= 0:
        return BoundReport(QUADRATIC, inputs, None, 0.0, float("nan"), NOT_APPLICABLE,
                           "requires dimension >= 2 and a positive Ricci bound",
                           {"tol_times_K2": tol}, model)
    val = quadratic_value(float(lam[0]), K, dsup, n)
    ok = val >= -tol * K ** 2
    return BoundReport(QUADRATIC, inputs, val, 0.0, val, HOLDS if ok else VIOLATED,
                       SOUND_SPECTRAL, {"tol_times_K2": tol}, model)


def default_t_grid(K: float, num: int = 25) -> np.ndarray:
    """Geometric grid; ``[1e-3, 1e3]`` when ``K == 0``, else up to ``1/(2K)``."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    hi = 1e3 if K == 0 else 1.0 / (2.0 * K)
    return np.geomspace(min(1e-3, hi / 10), hi, num)


def _check_t_grid(t_grid, K):
    t = np.asarray(t_grid if t_grid is not None else default_t_grid(K), dtype=float).ravel()
    if t.size == 0:
        raise ValueError("empty t grid")
    if np.any(t < 0):
        raise ValueError("t grid must be nonnegative")
    if K > 0 and np.any(t > 1.0 / (2.0 * K) * (1 + 1e-12)):
        raise ValueError(f"t grid must lie in [0, 1/(2K)] = [0, {1 / (2 * K):g}]")
    return t


def _hk(cheeger, k):
    if isinstance(cheeger, CheegerReport):
        if cheeger.k != k:
            raise ValueError(f"Cheeger report is for k={cheeger.k}, not {k}")
        return float(cheeger.value), cheeger.model
    return float(cheeger), ""


def check_buser_k(S, cheeger, K: float, k: int, t_grid=None, *, dsup: float = 0.0,
                  tol_abs: float = TOL_ABS_BUSER, model: str = "") -> BoundReport:
    """``2 sqrt(t) h_k >= 1/k - exp(-t lambda_k)`` on every ``t`` of the grid.

    For ``K == 0`` the admissible range is all ``t >= 0``.
    """
    lam = _lams(S, k)
    t = _check_t_grid(t_grid, K)
    hk, m = _hk(cheeger, k)
    model = model or m
    inputs = {"K": K, "dsup": dsup, "k": k, "lambda_k": float(lam[k - 1]), "h_hat_k": hk,
              "t_grid": t.tolist()}
    tols = {"tol_abs": tol_abs}
    if not _closed(dsup):
        return BoundReport(BUSER_K, inputs, None, None, float("nan"), NOT_APPLICABLE,
                           "requires a closed potential (vanishing field)", tols, model)
    lhs = 2.0 * np.sqrt(t) * hk
    rhs = 1.0 / k - np.exp(-t * lam[k - 1])
    slack = lhs - rhs
    ok = bool(np.all(slack >= -tol_abs))
    return BoundReport(BUSER_K, inputs, lhs.tolist(), rhs.tolist(), float(slack.min()),
                       HOLDS if ok else VIOLATED, SOUND_UPPER_H.replace("rhs", "lhs"), tols, model)


def buser1_upper(K: float, h1: float) -> float:
    if K < 0:
        raise ValueError("K must be nonnegative")
    return max(4.0 * math.sqrt(2.0 * K) * h1, BUSER_CONST * h1 ** 2)


def _upper_check(theorem, lam_k, bound, inputs, dsup, tol_rel, zero_tol, model):
    tols = {"tol_rel": tol_rel, "zero_tol": zero_tol}
    if not _closed(dsup):
        return BoundReport(theorem, inputs, lam_k, bound, float("nan"), NOT_APPLICABLE,
                           "requires a closed potential (vanishing field)", tols, model)
    ok = lam_k <= bound * (1 + tol_rel) + zero_tol
    return BoundReport(theorem, inputs, lam_k, bound, bound - lam_k,
                       HOLDS if ok else VIOLATED, SOUND_UPPER_H, tols, model)


def check_buser1(S, cheeger, K: float, *, dsup: float = 0.0, tol_rel: float = TOL_REL,
                 zero_tol: float = ZERO_TOL, model: str = "") -> BoundReport:
    lam = _lams(S, 1)
    h1, m = _hk(cheeger, 1)
    bound = buser1_upper(K, h1)
    inputs = {"K": K, "dsup": dsup, "lambda_1": float(lam[0]), "h_hat_1": h1}
    return _upper_check(BUSER_1, float(lam[0]), bound, inputs, dsup, tol_rel, zero_tol, model or m)


def higher_buser_upper(K: float, k: int, hk: float) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if K < 0:
        raise ValueError("K must be nonnegative")
    return 2.0 * math.log(2 * k) * max(K, 2.0 * k * k * hk * hk)


def check_higher_buser(S, cheeger, K: float, k: int, *, dsup: float = 0.0,
                       tol_rel: float = TOL_REL, zero_tol: float = ZERO_TOL,
                       model: str = "") -> BoundReport:
    lam = _lams(S, k)
    hk, m = _hk(cheeger, k)
    bound = higher_buser_upper(K, k, hk)
    inputs = {"K": K, "dsup": dsup, "k": k, "lambda_k": float(lam[k - 1]), "h_hat_k": hk}
    return _upper_check(HIGHER_BUSER, float(lam[k - 1]), bound, inputs, dsup, tol_rel, zero_tol,
                        model or m)


def check_cheeger_inequality(S, cheeger: CheegerReport, tol_rel: float = TOL_REL, *,
                             zero_tol: float = ZERO_TOL, model: str = "") -> BoundReport:
    """``h_1 <= 2 sqrt(2 lambda_1)``, checked only where ``h_hat_1`` is near exact.

    An upper bound on ``h_1`` can only falsify this inequality if it is close
    to the true value, so other instances are reported without a verdict.
    """
    lam = _lams(S, 1)
    h1, m = _hk(cheeger, 1)
    model = model or m
    rhs = 2.0 * math.sqrt(2.0 * max(float(lam[0]), 0.0))
    inputs = {"lambda_1": float(lam[0]), "h_hat_1": h1,
              "near_exact": bool(getattr(cheeger, "near_exact", False))}
    tols = {"tol_rel": tol_rel, "zero_tol": zero_tol}
    if not inputs["near_exact"]:
        return BoundReport(CHEEGER_A, inputs, h1, rhs, rhs - h1, NOT_APPLICABLE,
                           "report-only: h_hat_1 is not known to be near exact, so an upper "
                           "bound cannot test an upper estimate of h_1", tols, model)
    ok = h1 <= rhs * (1 + tol_rel) + zero_tol
    return BoundReport(CHEEGER_A, inputs, h1, rhs, rhs - h1, HOLDS if ok else VIOLATED,
                       "h_hat_1 near exact on this model; verdict uses it as h_1", tols, model)


def report_higher_cheeger(S, cheeger: CheegerReport, k: int, *, model: str = "") -> BoundReport:
    """Ratio ``h_hat_k / (k^3 sqrt(lambda_k))``, an empirical lower bound on the unknown constant."""
    lam = _lams(S, k)
    hk, m = _hk(cheeger, k)
    den = k ** 3 * math.sqrt(max(float(lam[k - 1]), 0.0))
    ratio = hk / den if den > 0 else float("inf")
    return BoundReport(CHEEGER_B, {"k": k, "lambda_k": float(lam[k - 1]), "h_hat_k": hk},
                       hk, den, ratio, NOT_APPLICABLE,
                       "report-only: the constant is unspecified; margin holds h_hat_k/(k^3 sqrt(lambda_k))",
                       {}, model or m)


def check_shigekawa(S, gauge_trivial: bool, *, trivial_tol: float = 1e-6,
                    nontrivial_floor: float = 1e-12, model: str = "") -> BoundReport:
    """Gauge triviality holds exactly when the bottom eigenvalue vanishes."""
    lam = _lams(S, 1)
    l1 = float(lam[0])
    if gauge_trivial:
        ok = l1 <= trivial_tol
        margin = trivial_tol - l1
    else:
        ok = l1 > nontrivial_floor
        margin = l1 - nontrivial_floor
    return BoundReport(SHIGEKAWA, {"lambda_1": l1, "gauge_trivial": bool(gauge_trivial)},
                       l1, "0" if gauge_trivial else "> 0", margin, HOLDS if ok else VIOLATED,
                       "gauge triviality decided from holonomies and face fluxes",
                       {"trivial_tol": trivial_tol, "nontrivial_floor": nontrivial_floor}, model)
