"""Data bundles for the privacy-profile figure panels.

Each bundle is a table of columns written as CSV.  Panel ``a`` holds the
base profiles calibrated to a common ``delta(0)``; panels ``b`` to ``e``
hold amplified curves, one ``(eps_out, delta_out)`` column group per curve.
"""

from __future__ import annotations

import io
import csv
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from privamp.amplification import Relation, WithoutReplacement, WithReplacement, amplified_profile_curve
from privamp.profiles import (
    GroupMode,
    PrivacyProfile,
    calibrate_theta,
    gaussian_profile,
    laplace_profile,
    rr_profile,
)

FLOAT_FMT = "{:.15g}"


@dataclass(frozen=True)
class Curve:
    label: str
    base: PrivacyProfile
    eps_out: tuple[float, ...]
    delta_out: tuple[float, ...]


@dataclass(frozen=True)
class Bundle:
    name: str
    title: str
    eps_in: tuple[float, ...]
    curves: tuple[Curve, ...]
    params: dict = field(default_factory=dict)

    def header(self) -> list[str]:
        if not self.curves[0].eps_out:
            return ["epsilon"] + [f"delta_{c.label}" for c in self.curves]
        cols = ["eps_in"]
        for c in self.curves:
            cols += [f"eps_out_{c.label}", f"delta_out_{c.label}"]
        return cols

    def rows(self) -> list[list[float]]:
        out = []
        for i, e in enumerate(self.eps_in):
            row = [e]
            for c in self.curves:
                row += [c.eps_out[i], c.delta_out[i]] if c.eps_out else [c.delta_out[i]]
            out.append(row)
        return out

    def to_csv(self) -> str:
        return format_csv(self.header(), self.rows())


def format_csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([FLOAT_FMT.format(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def calibrated_profiles(delta0: float) -> dict[str, PrivacyProfile]:
    """Randomized response, Laplace and Gaussian profiles sharing ``delta(0) = delta0``."""
    # For randomized response delta(0) = 2p - 1, so p is explicit.
    return {
        "rr": rr_profile((1.0 + delta0) / 2.0),
        "laplace": laplace_profile(calibrate_theta(laplace_profile, delta0)),
        "gaussian": gaussian_profile(calibrate_theta(gaussian_profile, delta0)),
    }


def _amplified(label, scheme, profile, grid, mode, relation=Relation.SUBSTITUTE) -> Curve:
    tab = amplified_profile_curve(scheme, relation, profile, grid, group_mode=mode)
    return Curve(label, profile, tuple(e for e, _ in tab.points), tuple(d for _, d in tab.points))


def build_bundles(delta0: float = 0.25, gaussian_theta: float = 1.0, laplace_theta: float = 3.0,
                  n: int = 100, m: int = 10,
                  m_values: Sequence[int] = (10, 25, 50), m_group: int = 50,
                  eps_max: float = 3.0, points: int = 61) -> list[Bundle]:
    """All five panels.

    The amplified panels share one grid of input ``eps`` on ``[0, eps_max]``.
    With replacement, a record drawn k times sees sensitivity ``k theta``, so
    once ``eps'`` approaches the Laplace ``theta`` the with-replacement curves
    can exceed the base profile (which is exactly zero past ``theta``); the
    default ``laplace_theta`` keeps the plotted range below that regime.
    """
    grid = tuple(np.linspace(0.0, eps_max, points).tolist())
    bundles = []
    profs = calibrated_profiles(delta0)
    bundles.append(Bundle(
        "fig1a_profiles", "calibrated base profiles", grid,
        tuple(Curve(k, p, (), tuple(p(e) for e in grid)) for k, p in profs.items()),
        {"delta0": delta0, "rr_p": profs["rr"].p, "laplace_theta": profs["laplace"].theta,
         "gaussian_theta": profs["gaussian"].theta},
    ))
    for name, make, theta in (("fig1b_gaussian_wor_wr", gaussian_profile, gaussian_theta),
                              ("fig1c_laplace_wor_wr", laplace_profile, laplace_theta)):
        base = make(theta)
        bundles.append(Bundle(
            name, "without vs with replacement, white-box groups", grid,
            (_amplified("wor", WithoutReplacement(n, m), base, grid, None),
             _amplified("wr", WithReplacement(n, m), base, grid, GroupMode.WHITE_BOX)),
            {"theta": theta, "n": n, "m": m},
        ))
    theta = laplace_theta
    base = laplace_profile(theta)
    curves = []
    for mm in m_values:
        curves.append(_amplified(f"wr_m{mm}", WithReplacement(n, mm), base, grid, GroupMode.WHITE_BOX))
        curves.append(_amplified(f"wr_m{mm}_nogroup", WithReplacement(n, mm), base, grid, GroupMode.CONSTANT))
    bundles.append(Bundle("fig1d_laplace_wr_group_effect", "group-privacy effect under with-replacement",
                          grid, tuple(curves), {"theta": theta, "n": n, "m_values": list(m_values)}))
    bundles.append(Bundle(
        "fig1e_laplace_wr_white_black", "white-box vs black-box group privacy", grid,
        (_amplified("whitebox", WithReplacement(n, m_group), base, grid, GroupMode.WHITE_BOX),
         _amplified("blackbox", WithReplacement(n, m_group), base, grid, GroupMode.BLACK_BOX)),
        {"theta": theta, "n": n, "m": m_group},
    ))
    return bundles
